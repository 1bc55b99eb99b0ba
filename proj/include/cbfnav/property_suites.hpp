#pragma once

// Bulk randomized checks of the library's core guarantees.  Each suite
// hammers one invariant with an independent oracle and reports counts,
// so a regression shows up as a nonzero failure total rather than a
// silently shifted trajectory.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cbfnav/cbf_composer.hpp"
#include "cbfnav/jet.hpp"
#include "cbfnav/perception_barrier.hpp"
#include "cbfnav/safety_filter.hpp"
#include "cbfnav/smooth_math.hpp"

namespace cbfnav {

struct SuiteResult {
  std::string name;
  bool passed = true;
  long long checks = 0;
  long long failures = 0;
  double max_error = 0.0;
  double seconds = 0.0;
  std::string detail;  // first failure, for the log
};

namespace detail {

class SuiteClock {
 public:
  SuiteClock() : start_(std::chrono::steady_clock::now()) {}
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline void record_failure(SuiteResult& result, const std::string& what) {
  ++result.failures;
  result.passed = false;
  if (result.detail.empty()) result.detail = what;
}

inline void check(SuiteResult& result, bool ok, double err,
                  const char* what) {
  ++result.checks;
  if (!ok) {
    result.max_error = std::max(result.max_error, err);
    std::ostringstream os;
    os << what << " (error " << err << ")";
    record_failure(result, os.str());
  }
}

// Synthetic scan with a random mix of returns and free rays.
inline RawScan random_scan(std::mt19937_64& rng, const Eigen::Vector2d& origin,
                           int rays) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RawScan scan;
  scan.origin = origin;
  scan.max_range = 5.0;
  for (int j = 0; j < rays; ++j) {
    scan.bearings.push_back(2.0 * std::numbers::pi * j / rays);
    scan.ranges.push_back(unit(rng) < 0.6 ? 1.0 + 3.8 * unit(rng) : 5.0);
  }
  return scan;
}

inline BarrierBuffer random_buffer(std::mt19937_64& rng, int window,
                                   int pushes, double period, int rays) {
  std::uniform_real_distribution<double> step(-0.25, 0.25);
  Eigen::Vector2d origin(step(rng), step(rng));
  PerceptionMargins margins;
  BarrierBuffer buffer(build_frame(random_scan(rng, origin, rays), 0, margins,
                                   30.0, 100),
                       window, period, 30.0, EtaParams{});
  for (int k = 1; k <= pushes; ++k) {
    origin += Eigen::Vector2d(step(rng), step(rng));
    buffer.push(build_frame(random_scan(rng, origin, rays), k, margins, 30.0,
                            100));
  }
  return buffer;
}

}  // namespace detail

/* ------------------------------------------------- soft extrema suite */

inline SuiteResult run_softmin_bounds_suite(long long vectors = 100000,
                                            unsigned seed = 7001) {
  detail::SuiteClock clock;
  SuiteResult result;
  result.name = "softmin_bounds";
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(1, 10);
  std::uniform_real_distribution<double> value(-100.0, 100.0);
  const double kappas[] = {1.0, 10.0, 30.0};

  std::vector<double> z, shuffled;
  for (long long trial = 0; trial < vectors; ++trial) {
    const int n = len(rng);
    z.resize(n);
    for (double& x : z) x = value(rng);
    const double lo = *std::min_element(z.begin(), z.end());
    const double hi = *std::max_element(z.begin(), z.end());
    // One ulp at the dominant magnitude; the envelope inequalities are
    // otherwise exact in floating point (monotone rounding of log and
    // the final subtraction).
    const double dom = std::max({1.0, std::abs(lo), std::abs(hi)});
    const double slack =
        std::nextafter(dom, std::numeric_limits<double>::infinity()) - dom;

    for (double kappa : kappas) {
      const double sm = softmin(z, kappa);
      const double sx = softmax(z, kappa);
      const double gap = std::log(double(n)) / kappa;
      detail::check(result, sm <= lo + slack, sm - lo, "softmin above min");
      detail::check(result, sm >= lo - gap - slack, (lo - gap) - sm,
                    "softmin below its floor");
      detail::check(result, sx >= hi - gap - slack, hi - gap - sx,
                    "softmax below its floor");
      detail::check(result, sx <= hi + slack, sx - hi, "softmax above max");

      shuffled = z;
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      detail::check(result, softmin(shuffled, kappa) == sm, 0.0,
                    "softmin depends on argument order");
      detail::check(result, softmax(shuffled, kappa) == sx, 0.0,
                    "softmax depends on argument order");
    }
  }
  result.seconds = clock.elapsed();
  return result;
}

/* --------------------------------------------------- blend ramp suite */

inline SuiteResult run_eta_suite(int grid = 2001) {
  detail::SuiteClock clock;
  SuiteResult result;
  result.name = "eta_ramp";
  const int orders[] = {1, 2, 3};
  const double rates[] = {1.1, 1.2, 2.0};

  for (int r : orders) {
    for (double nu : rates) {
      const double sat = 1.0 / nu;
      double prev = -1.0;
      for (int i = 0; i < grid; ++i) {
        const double t = -0.2 + (sat + 0.4) * i / (grid - 1);
        const double eta = smoothstep_eta(t, r, nu);
        detail::check(result, eta >= 0.0 && eta <= 1.0,
                      std::max(-eta, eta - 1.0), "eta out of [0, 1]");
        detail::check(result, eta >= prev - 1e-15, prev - eta,
                      "eta not monotone");
        prev = eta;
        if (t <= 0.0) {
          detail::check(result, eta == 0.0, std::abs(eta),
                        "eta not hard zero before the ramp");
        }
        if (t * nu >= 1.0) {
          detail::check(result, eta == 1.0, std::abs(eta - 1.0),
                        "eta not hard one after saturation");
        }
      }

      // Junction jets: every derivative up to order r+1 is exactly zero
      // on both flats.  The jet carries the truth; finite differences
      // of the next-lower derivative corroborate it without the noise
      // of a direct high-order difference.
      for (const double t0 : {0.0, 1.05 * sat}) {
        const auto jet = smoothstep_eta(Jet<double>::variable(t0, r + 2), r,
                                        nu);
        for (int m = 1; m <= r + 1; ++m) {
          double deriv = jet.c[m];
          for (int j = 2; j <= m; ++j) deriv *= j;  // coefficient -> value
          detail::check(result, deriv == 0.0, std::abs(deriv),
                        "junction derivative not exactly zero");
        }
      }
      for (int m = 1; m <= r + 1; ++m) {
        // Difference the (m-1)-th derivative toward each junction and
        // halve the offset: the quotient must shrink, which pins the
        // m-th derivative to zero independently of the jet algebra.
        auto lower = [&](double t) {
          const auto jet =
              smoothstep_eta(Jet<double>::variable(t, r + 2), r, nu);
          double val = jet.c[m - 1];
          for (int j = 2; j <= m - 1; ++j) val *= j;
          return val;
        };
        for (const double t0 : {0.0, sat}) {
          const double sign = (t0 == 0.0) ? 1.0 : -1.0;
          const double f0 = lower(t0);
          const double d1 = std::abs(lower(t0 + sign * 1e-4) - f0) / 1e-4;
          const double d2 = std::abs(lower(t0 + sign * 5e-5) - f0) / 5e-5;
          // Halving must shrink the quotient, unless both sit at the
          // rounding floor already; a real nonzero derivative would
          // show up orders of magnitude above either branch.
          const bool vanishing =
              d2 <= 0.75 * d1 + 1e-12 || (d1 < 1e-8 && d2 < 1e-8);
          detail::check(result, vanishing, d2,
                        "difference quotient does not vanish at junction");
        }
      }

      // Ramp midpoint: the polynomial is antisymmetric about it, so the
      // value there is exactly one half.
      {
        const double mid = smoothstep_eta(0.5 / nu, r, nu);
        detail::check(result, std::abs(mid - 0.5) <= 1e-12,
                      std::abs(mid - 0.5), "ramp midpoint off one half");
      }

      // Interior: the jet's first derivative against a central
      // difference of values.
      for (int i = 1; i <= 20; ++i) {
        const double t = sat * i / 21.0;
        const auto jet = smoothstep_eta(Jet<double>::variable(t, 2), r, nu);
        const double fd = (smoothstep_eta(t + 1e-7, r, nu) -
                           smoothstep_eta(t - 1e-7, r, nu)) /
                          2e-7;
        const double err = std::abs(jet.c[1] - fd);
        detail::check(result, err <= 1e-6 * std::max(1.0, std::abs(fd)), err,
                      "interior derivative mismatch");
      }
    }
  }
  result.seconds = clock.elapsed();
  return result;
}

/* -------------------------------------------- derivative oracle suite */

inline SuiteResult run_derivative_oracle_suite(int states = 200,
                                               unsigned seed = 7003) {
  detail::SuiteClock clock;
  SuiteResult result;
  result.name = "derivative_oracle";
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);

  HocbfChainConfig cfg;
  cfg.xi = speed_band(3.0);
  cfg.phi = input_box(6.0, 4.0);

  const Eigen::Matrix2d A2 =
      (Eigen::Matrix2d() << -1.0, 0.2, 0.1, -1.5).finished();
  const Eigen::Matrix2d B2 =
      (Eigen::Matrix2d() << 2.0, 0.5, -0.3, 1.5).finished();

  for (int trial = 0; trial < states; ++trial) {
    const auto buffer = detail::random_buffer(rng, 3, 3, 0.2, 24);
    const ControlDynamics stage = (trial % 2 == 0)
                                      ? ControlDynamics::identity_stage()
                                      : ControlDynamics::make(A2, B2);
    const double t = 0.6 + 0.19 * unit(rng);
    std::array<double, 6> x{0.4 * sym(rng), 0.4 * sym(rng), 2.0 * sym(rng),
                            3.0 * sym(rng), 3.0 * sym(rng), 2.0 * sym(rng)};

    const auto ev = eval_h(buffer, cfg, stage, t, x);

    auto h_at = [&](double tt, const std::array<double, 6>& xx) {
      return detail::evaluate_chain<double>(buffer, cfg, stage, tt, xx)
          .h.c[0];
    };

    const double dt = 1e-6;
    const double fd_dt = (h_at(t + dt, x) - h_at(t - dt, x)) / (2.0 * dt);
    double err = std::abs(ev.dh_dt - fd_dt);
    detail::check(result, err <= 1e-4 * std::max(1.0, std::abs(fd_dt)), err,
                  "clock rate disagrees with finite differences");

    for (int col = 0; col < 2; ++col) {
      std::array<double, 6> xp = x, xm = x;
      xp[4] += dt * stage.B(0, col);
      xp[5] += dt * stage.B(1, col);
      xm[4] -= dt * stage.B(0, col);
      xm[5] -= dt * stage.B(1, col);
      const double fd = (h_at(t, xp) - h_at(t, xm)) / (2.0 * dt);
      err = std::abs(ev.Lg_h[col] - fd);
      detail::check(result, err <= 1e-4 * std::max(1.0, std::abs(fd)), err,
                    "input sensitivity disagrees with finite differences");
    }

    // Drift rate: difference h along the autonomous flow, then strip
    // the explicit clock part measured above.  Richardson-extrapolated
    // because the stiff chain makes a plain central difference too
    // coarse at any single step size.
    auto flow = [&](double hh) {
      std::array<double, 6> y = x;
      auto f = [&](const std::array<double, 6>& s) {
        return cascade_drift(s, stage.A);
      };
      const auto k1 = f(y);
      std::array<double, 6> p;
      for (int j = 0; j < 6; ++j) p[j] = y[j] + 0.5 * hh * k1[j];
      const auto k2 = f(p);
      for (int j = 0; j < 6; ++j) p[j] = y[j] + 0.5 * hh * k2[j];
      const auto k3 = f(p);
      for (int j = 0; j < 6; ++j) p[j] = y[j] + hh * k3[j];
      const auto k4 = f(p);
      for (int j = 0; j < 6; ++j) {
        y[j] += hh / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
      }
      return h_at(t + hh, y);
    };
    const double fd1 = (flow(1e-4) - flow(-1e-4)) / 2e-4;
    const double fd2 = (flow(5e-5) - flow(-5e-5)) / 1e-4;
    const double fd_total = (4.0 * fd2 - fd1) / 3.0;
    const double fd_lf = fd_total - ev.dh_dt;
    err = std::abs(ev.Lf_h - fd_lf);
    detail::check(result, err <= 1e-4 * std::max(1.0, std::abs(fd_lf)), err,
                  "drift rate disagrees with finite differences");
  }
  result.seconds = clock.elapsed();
  return result;
}

/* ------------------------------------------------------ filter suite */

inline SuiteResult run_qp_suite(int instances_each = 100,
                                int samples_per = 100000,
                                unsigned seed = 7004) {
  detail::SuiteClock clock;
  SuiteResult result;
  result.name = "filter_qp";
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> sym(-3.0, 3.0);
  FilterConfig cfg;

  int made_active = 0;
  int made_inactive = 0;
  unsigned sub = 1;
  while (made_active < instances_each || made_inactive < instances_each) {
    BarrierEvaluation ev;
    ev.h = sym(rng);
    ev.dh_dt = sym(rng);
    ev.Lf_h = 3.0 * sym(rng);
    ev.Lg_h = {sym(rng), sym(rng)};
    Eigen::Vector2d v_d(3.0 * sym(rng), 3.0 * sym(rng));
    if (ev.Lg_h.norm() < 1e-3) continue;

    const double w =
        ev.dh_dt + ev.Lf_h + ev.Lg_h.dot(v_d) + cfg.alpha_slope * ev.h;
    const bool want_active = made_active < instances_each;
    if (want_active && w >= 0.0) {
      // Push the desired input just past the boundary.
      v_d -= ((w + 1.0 + std::abs(sym(rng))) / ev.Lg_h.squaredNorm()) *
             ev.Lg_h;
    } else if (!want_active && w < 0.0) {
      v_d += ((-w + 1.0) / ev.Lg_h.squaredNorm()) * ev.Lg_h;
    }

    const auto dec = solve_filter(ev, v_d, cfg);
    if (dec.active) {
      ++made_active;
    } else {
      ++made_inactive;
    }

    const auto report =
        qp_reference_oracle(ev, v_d, cfg, dec, samples_per, seed + 17 * sub++);
    detail::check(result, report.cost_violations == 0,
                  double(report.cost_violations),
                  "a sampled point beat the closed form");
    detail::check(result, report.kkt_residual < 1e-9, report.kkt_residual,
                  "optimality residual too large");
    const double slack_at_solution =
        constraint_value(ev, dec.v_star, dec.mu_star, cfg.alpha_slope);
    detail::check(result, slack_at_solution >= -1e-9, -slack_at_solution,
                  "closed form violates its own constraint");
  }
  result.seconds = clock.elapsed();
  return result;
}

/* ------------------------------------------------- containment suite */

inline SuiteResult run_containment_suite(int configs = 50, int grid = 200,
                                         unsigned seed = 7005) {
  detail::SuiteClock clock;
  SuiteResult result;
  result.name = "containment";
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> window_pick(1, 3);

  for (int c = 0; c < configs; ++c) {
    const int window = window_pick(rng);
    const int pushes = window + int(3.0 * unit(rng));
    const auto buffer = detail::random_buffer(rng, window, pushes, 0.2, 20);
    const int k = buffer.newest_index();
    const double t = (k + unit(rng)) * 0.2;

    const Eigen::Vector2d center = buffer.frames().back().origin;
    for (int iy = 0; iy < grid; ++iy) {
      for (int ix = 0; ix < grid; ++ix) {
        const double x = center.x() - 6.0 + 12.0 * ix / (grid - 1);
        const double y = center.y() - 6.0 + 12.0 * iy / (grid - 1);
        const double psi0 = buffer.eval_psi0(t, x, y);
        ++result.checks;
        if (psi0 < 0.0) continue;
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& frame : buffer.frames()) {
          best = std::max(best, frame.eval(x, y));
        }
        if (!(best >= 0.0)) {
          result.max_error = std::max(result.max_error, -best);
          detail::record_failure(
              result, "combined barrier positive where every frame is not");
        }
      }
    }
  }
  result.seconds = clock.elapsed();
  return result;
}

inline std::vector<SuiteResult> run_all_suites() {
  return {run_softmin_bounds_suite(), run_eta_suite(),
          run_derivative_oracle_suite(), run_qp_suite(),
          run_containment_suite()};
}

}  // namespace cbfnav
