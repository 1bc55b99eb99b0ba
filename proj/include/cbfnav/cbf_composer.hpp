#pragma once

// Combines the perception barrier, state limits, and input limits into
// one scalar certificate h with its derivatives.
//
// The perception barrier has no direct input dependence; repeatedly
// differentiating it along the closed drift and mixing back a slope
// each stage produces a function whose own derivative finally sees the
// input.  State limits get the same treatment at lower depth; input
// limits participate directly since the inputs are state here.  The
// soft minimum of all terminal stages is h.
//
// Everything is evaluated in a single pass: the drift flow is expanded
// as a short time series, the barrier is evaluated on that series with
// derivative-carrying coefficients, and chain stages become series
// operations.  One evaluation yields h, its explicit clock rate, its
// drift rate, and its input sensitivity.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cbfnav/control_dynamics.hpp"
#include "cbfnav/jet.hpp"
#include "cbfnav/perception_barrier.hpp"
#include "cbfnav/robot_model.hpp"
#include "cbfnav/smooth_math.hpp"

namespace cbfnav {

// Affine function of the cascade state (qx, qy, v, theta, u1, u2).
struct AffineConstraint {
  std::array<double, 6> weights{};
  double offset = 0.0;
  std::string name;
};

inline std::vector<AffineConstraint> speed_band(double limit) {
  AffineConstraint hi, lo;
  hi.weights[2] = -1.0;
  hi.offset = limit;
  hi.name = "speed_upper";
  lo.weights[2] = 1.0;
  lo.offset = limit;
  lo.name = "speed_lower";
  return {hi, lo};
}

inline std::vector<AffineConstraint> input_box(double accel_limit,
                                               double turn_limit) {
  std::vector<AffineConstraint> out(4);
  out[0].weights[4] = -1.0;
  out[0].offset = accel_limit;
  out[0].name = "accel_upper";
  out[1].weights[4] = 1.0;
  out[1].offset = accel_limit;
  out[1].name = "accel_lower";
  out[2].weights[5] = -1.0;
  out[2].offset = turn_limit;
  out[2].name = "turn_upper";
  out[3].weights[5] = 1.0;
  out[3].offset = turn_limit;
  out[3].name = "turn_lower";
  return out;
}

struct HocbfChainConfig {
  int barrier_depth = 2;                       // stages for the perception term
  std::vector<double> psi_gains{25.0, 20.0};   // one slope per stage
  int state_depth = 1;                         // stages for state limits
  std::vector<double> xi_gains{15.0};
  double epsilon = 10.0;                       // sharpness of the soft minimum
  double outer_alpha = 30.0;                   // slope used by the filter
  int jet_order = 4;                           // series degree for the flow
  std::vector<AffineConstraint> xi;            // state limits
  std::vector<AffineConstraint> phi;           // input limits

  void validate() const {
    if (barrier_depth < 1 ||
        psi_gains.size() != static_cast<std::size_t>(barrier_depth)) {
      throw std::invalid_argument("barrier stage gains mis-sized");
    }
    if (!xi.empty() &&
        (state_depth < 1 ||
         xi_gains.size() != static_cast<std::size_t>(state_depth))) {
      throw std::invalid_argument("state stage gains mis-sized");
    }
    for (double g : psi_gains) {
      if (g <= 0.0) throw std::invalid_argument("stage slopes must be positive");
    }
    for (double g : xi_gains) {
      if (g <= 0.0) throw std::invalid_argument("stage slopes must be positive");
    }
    if (epsilon <= 0.0 || outer_alpha <= 0.0) {
      throw std::invalid_argument("sharpness and slope must be positive");
    }
    const int deepest = std::max(barrier_depth, xi.empty() ? 0 : state_depth);
    if (jet_order < deepest + 1 || jet_order > kMaxJetOrder) {
      throw std::invalid_argument("series degree too low for the chain depth");
    }
  }
};

/* -------------------------------------------------- series evaluation */

// Drift of the cascade (plant plus input stage); the free input enters
// elsewhere through the gain columns.
template <class S>
std::array<S, 6> cascade_drift(const std::array<S, 6>& y,
                               const Eigen::Matrix2d& A) {
  const std::array<S, 4> base{y[0], y[1], y[2], y[3]};
  auto f = unicycle_drift(base);
  return {f[0],
          f[1],
          f[2] + y[4],
          f[3] + y[5],
          A(0, 0) * y[4] + A(0, 1) * y[5],
          A(1, 0) * y[4] + A(1, 1) * y[5]};
}

namespace detail {

template <class S>
struct ChainSeries {
  std::vector<Jet<S>> psi;              // stage series, degree shrinking
  std::vector<std::vector<Jet<S>>> xi;  // per state limit
  std::vector<Jet<S>> phi;              // at the final shared degree
  Jet<S> h;
};

template <class S>
Jet<S> affine_over(const std::array<Jet<S>, 6>& y,
                   const AffineConstraint& c) {
  Jet<S> acc = constant_like(y[0], c.offset);
  for (int m = 0; m < 6; ++m) {
    if (c.weights[m] != 0.0) acc += c.weights[m] * y[m];
  }
  return acc;
}

template <class S>
ChainSeries<S> evaluate_chain(const BarrierBuffer& buffer,
                              const HocbfChainConfig& cfg,
                              const ControlDynamics& stage, const S& t,
                              const std::array<S, 6>& state) {
  cfg.validate();
  const int order = cfg.jet_order;

  const auto y = flow_series<S, 6>(
      state, [&](const auto& v) { return cascade_drift(v, stage.A); }, order);
  Jet<S> tau = Jet<S>::variable(t, order);

  ChainSeries<S> out;
  out.psi.reserve(static_cast<std::size_t>(cfg.barrier_depth) + 1);
  out.psi.push_back(buffer.eval_psi0(tau, y[0], y[1]));
  for (int i = 0; i < cfg.barrier_depth; ++i) {
    const Jet<S>& prev = out.psi.back();
    out.psi.push_back(prev.derivative() +
                      cfg.psi_gains[static_cast<std::size_t>(i)] *
                          prev.truncated(prev.deg - 1));
  }

  for (const AffineConstraint& c : cfg.xi) {
    std::vector<Jet<S>> chain;
    chain.reserve(static_cast<std::size_t>(cfg.state_depth) + 1);
    chain.push_back(affine_over(y, c));
    for (int i = 0; i < cfg.state_depth; ++i) {
      const Jet<S>& prev = chain.back();
      chain.push_back(prev.derivative() +
                      cfg.xi_gains[static_cast<std::size_t>(i)] *
                          prev.truncated(prev.deg - 1));
    }
    out.xi.push_back(std::move(chain));
  }

  const int deepest =
      std::max(cfg.barrier_depth, cfg.xi.empty() ? 0 : cfg.state_depth);
  const int hdeg = order - deepest;

  std::vector<Jet<S>> components;
  components.reserve(1 + out.xi.size() + cfg.phi.size());
  components.push_back(out.psi.back().truncated(hdeg));
  for (const auto& chain : out.xi) {
    components.push_back(chain.back().truncated(hdeg));
  }
  for (const AffineConstraint& c : cfg.phi) {
    out.phi.push_back(affine_over(y, c).truncated(hdeg));
    components.push_back(out.phi.back());
  }
  out.h = components.size() == 1
              ? components[0]
              : softmin(std::span<const Jet<S>>(components.data(),
                                                components.size()),
                        cfg.epsilon);
  return out;
}

}  // namespace detail

/* --------------------------------------------------- plain interfaces */

struct BarrierEvaluation {
  double h = 0.0;
  double dh_dt = 0.0;               // explicit clock rate, state frozen
  double Lf_h = 0.0;                // drift rate
  Eigen::Vector2d Lg_h{0.0, 0.0};   // sensitivity to the free input
  std::vector<double> psi;                // stage values, index 0 raw
  std::vector<std::vector<double>> xi;    // per limit, index 0 raw
  std::vector<double> phi;
};

inline BarrierEvaluation eval_h(const BarrierBuffer& buffer,
                                const HocbfChainConfig& cfg,
                                const ControlDynamics& stage, double t,
                                const std::array<double, 6>& state) {
  using S = Dual<3>;
  std::array<S, 6> seeded;
  for (int i = 0; i < 6; ++i) seeded[i] = S(state[i]);
  // Slot 0 rides the clock; slots 1 and 2 ride the input through the
  // gain columns, so the extracted sensitivities absorb B.
  seeded[4].d[1] = stage.B(0, 0);
  seeded[4].d[2] = stage.B(0, 1);
  seeded[5].d[1] = stage.B(1, 0);
  seeded[5].d[2] = stage.B(1, 1);
  S ts(t);
  ts.d[0] = 1.0;

  const auto series = detail::evaluate_chain<S>(buffer, cfg, stage, ts, seeded);

  BarrierEvaluation out;
  out.h = series.h.c[0].v;
  out.dh_dt = series.h.c[0].d[0];
  out.Lf_h = series.h.c[1].v - out.dh_dt;  // total rate minus clock part
  out.Lg_h = {series.h.c[0].d[1], series.h.c[0].d[2]};
  for (const auto& p : series.psi) out.psi.push_back(p.c[0].v);
  for (const auto& chain : series.xi) {
    std::vector<double> vals;
    for (const auto& stage_series : chain) vals.push_back(stage_series.c[0].v);
    out.xi.push_back(std::move(vals));
  }
  for (const auto& p : series.phi) out.phi.push_back(p.c[0].v);
  return out;
}

inline std::vector<double> eval_psi_chain(const BarrierBuffer& buffer,
                                          const HocbfChainConfig& cfg,
                                          const ControlDynamics& stage,
                                          double t,
                                          const std::array<double, 6>& state) {
  const auto series =
      detail::evaluate_chain<double>(buffer, cfg, stage, t, state);
  std::vector<double> out;
  for (const auto& p : series.psi) out.push_back(p.c[0]);
  return out;
}

inline std::vector<std::vector<double>> eval_xi_chains(
    const BarrierBuffer& buffer, const HocbfChainConfig& cfg,
    const ControlDynamics& stage, double t,
    const std::array<double, 6>& state) {
  const auto series =
      detail::evaluate_chain<double>(buffer, cfg, stage, t, state);
  std::vector<std::vector<double>> out;
  for (const auto& chain : series.xi) {
    std::vector<double> vals;
    for (const auto& s : chain) vals.push_back(s.c[0]);
    out.push_back(std::move(vals));
  }
  return out;
}

inline std::vector<double> eval_phi(const HocbfChainConfig& cfg,
                                    const std::array<double, 6>& state) {
  std::vector<double> out;
  for (const AffineConstraint& c : cfg.phi) {
    double acc = c.offset;
    for (int m = 0; m < 6; ++m) acc += c.weights[m] * state[m];
    out.push_back(acc);
  }
  return out;
}

/* ----------------------------------------------- membership reporting */

enum class SignClass { negative, boundary, positive };

struct MembershipReport {
  struct Entry {
    std::string name;
    double value = 0.0;
    SignClass cls = SignClass::positive;
  };
  std::vector<Entry> entries;
  bool all_nonnegative = true;
};

// Classifies every stage of every chain at one instant.  The composed
// set admits the state only if nothing is negative.
inline MembershipReport check_membership(const BarrierBuffer& buffer,
                                         const HocbfChainConfig& cfg,
                                         const ControlDynamics& stage,
                                         double t,
                                         const std::array<double, 6>& state,
                                         double tol = 1e-12) {
  const auto series =
      detail::evaluate_chain<double>(buffer, cfg, stage, t, state);
  MembershipReport report;
  auto add = [&](const std::string& name, double value) {
    SignClass cls = SignClass::positive;
    if (value < -tol) {
      cls = SignClass::negative;
      report.all_nonnegative = false;
    } else if (value <= tol) {
      cls = SignClass::boundary;
    }
    report.entries.push_back({name, value, cls});
  };
  for (std::size_t i = 0; i < series.psi.size(); ++i) {
    add("psi" + std::to_string(i), series.psi[i].c[0]);
  }
  for (std::size_t j = 0; j < series.xi.size(); ++j) {
    for (std::size_t i = 0; i < series.xi[j].size(); ++i) {
      add(cfg.xi[j].name + "_stage" + std::to_string(i),
          series.xi[j][i].c[0]);
    }
  }
  for (std::size_t j = 0; j < series.phi.size(); ++j) {
    add(cfg.phi[j].name, series.phi[j].c[0]);
  }
  return report;
}

}  // namespace cbfnav
