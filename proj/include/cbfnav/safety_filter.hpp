#pragma once

// Minimal-intervention input filter.
//
// The certificate h admits an input v when its total rate plus a slope
// times h stays nonnegative, with a penalized relaxation variable as
// escape hatch.  Projecting the desired input onto that half-space has
// a closed form: one multiplier lambda scales the constraint gradient.
//
// The desired input itself is a surrogate: the nominal controller
// commands plant inputs, and the surrogate drives the input stage so
// the held input tracks the nominal command at a fixed decay rate.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

#include "cbfnav/cbf_composer.hpp"
#include "cbfnav/control_dynamics.hpp"

namespace cbfnav {

struct FilterConfig {
  double gamma = 200.0;          // relaxation penalty
  double sigma = 0.6;            // surrogate tracking rate
  double alpha_slope = 30.0;     // admissibility slope on h
  bool full_ud_derivative = true;  // differentiate the nominal command
                                   // along the full state motion
};

/* ---------------------------------------------------------- surrogate */

struct SurrogateCommand {
  Eigen::Vector2d v_d{0.0, 0.0};     // input-stage command
  Eigen::Vector2d u_d{0.0, 0.0};     // nominal plant input
  Eigen::Vector2d ud_dot{0.0, 0.0};  // its rate along the motion
};

// ud_fn maps the 4-state plant state to the nominal input, generically
// over the scalar so one directional derivative comes out of a seeded
// pass.  With the full derivative and v = v_d, the held input error
// decays exactly at rate sigma.
template <class UdFn>
SurrogateCommand desired_surrogate(const UdFn& ud_fn,
                                   const std::array<double, 6>& state,
                                   const ControlDynamics& stage,
                                   const FilterConfig& cfg) {
  const std::array<double, 4> x4{state[0], state[1], state[2], state[3]};
  const Eigen::Vector2d u(state[4], state[5]);

  std::array<double, 4> w = unicycle_drift(x4);
  if (cfg.full_ud_derivative) {
    w[2] += u.x();
    w[3] += u.y();
  }
  std::array<Dual<1>, 4> seeded;
  for (int i = 0; i < 4; ++i) {
    seeded[i] = Dual<1>(x4[i]);
    seeded[i].d[0] = w[i];
  }
  const auto ud = ud_fn(seeded);

  SurrogateCommand out;
  out.u_d = {ud[0].v, ud[1].v};
  out.ud_dot = {ud[0].d[0], ud[1].d[0]};
  out.v_d = stage.B_inv *
            (out.ud_dot - stage.A * u + cfg.sigma * (out.u_d - u));
  return out;
}

/* ------------------------------------------------------------- filter */

struct FilterDecision {
  Eigen::Vector2d v_star{0.0, 0.0};
  double mu_star = 0.0;
  double lambda = 0.0;
  double omega = 0.0;       // admissibility of the desired input
  bool active = false;      // command was altered
  bool degenerate = false;  // active with no input authority
};

inline double constraint_value(const BarrierEvaluation& ev,
                               const Eigen::Vector2d& v, double mu,
                               double alpha_slope) {
  return ev.dh_dt + ev.Lf_h + ev.Lg_h.dot(v) + alpha_slope * ev.h +
         mu * ev.h;
}

inline FilterDecision solve_filter(const BarrierEvaluation& ev,
                                   const Eigen::Vector2d& v_d,
                                   const FilterConfig& cfg) {
  FilterDecision dec;
  dec.omega = constraint_value(ev, v_d, 0.0, cfg.alpha_slope);
  dec.v_star = v_d;
  if (dec.omega >= 0.0) return dec;

  const double den =
      ev.Lg_h.squaredNorm() + ev.h * ev.h / cfg.gamma;
  if (den <= 1e-18) {
    // No direction moves the constraint: flag and pass through.
    dec.degenerate = true;
    return dec;
  }
  dec.lambda = -dec.omega / den;
  dec.v_star = v_d + dec.lambda * ev.Lg_h;
  dec.mu_star = dec.lambda * ev.h / cfg.gamma;
  dec.active = true;
  dec.degenerate = ev.Lg_h.norm() < 1e-9;
  return dec;
}

/* -------------------------------------------------------- input stage */

namespace detail {

// Scaling-and-squaring matrix exponential, 2x2.
inline Eigen::Matrix2d expm2(const Eigen::Matrix2d& M) {
  double norm = M.cwiseAbs().rowwise().sum().maxCoeff();
  Eigen::Matrix2d S = M;
  int squarings = 0;
  while (norm > 0.25) {
    S *= 0.5;
    norm *= 0.5;
    ++squarings;
  }
  Eigen::Matrix2d sum = Eigen::Matrix2d::Identity();
  Eigen::Matrix2d term = Eigen::Matrix2d::Identity();
  for (int k = 1; k <= 16; ++k) {
    term = term * S / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

}  // namespace detail

// Exact hold-and-step update of the input stage: over one step with v
// held constant, u advances by the closed-form linear response.
struct ZohStepper {
  Eigen::Matrix2d E;  // free response
  Eigen::Matrix2d F;  // forced response

  static ZohStepper make(const ControlDynamics& stage, double dt) {
    if (dt <= 0.0) throw std::invalid_argument("step must be positive");
    ZohStepper out;
    out.E = detail::expm2(stage.A * dt);
    out.F = stage.A.inverse() *
            (out.E - Eigen::Matrix2d::Identity()) * stage.B;
    return out;
  }

  Eigen::Vector2d step(const Eigen::Vector2d& u,
                       const Eigen::Vector2d& v) const {
    return E * u + F * v;
  }
};

/* ----------------------------------------------- optimality reference */

struct QpOracleReport {
  int samples = 0;
  int cost_violations = 0;   // feasible samples beating the solution
  double kkt_residual = 0.0; // stationarity plus slackness defects
  double min_cost_gap = std::numeric_limits<double>::infinity();
};

// Monte-Carlo cross-check that a decision really solves the projection:
// no sampled feasible point may cost less, and the optimality
// conditions must hold to tight tolerance.
inline QpOracleReport qp_reference_oracle(const BarrierEvaluation& ev,
                                          const Eigen::Vector2d& v_d,
                                          const FilterConfig& cfg,
                                          const FilterDecision& dec,
                                          int samples, std::uint64_t seed) {
  QpOracleReport report;
  report.samples = samples;

  auto cost = [&](const Eigen::Vector2d& v, double mu) {
    return 0.5 * (v - v_d).squaredNorm() + 0.5 * cfg.gamma * mu * mu;
  };
  const double star_cost = cost(dec.v_star, dec.mu_star);
  const double b_star =
      constraint_value(ev, dec.v_star, dec.mu_star, cfg.alpha_slope);

  double residual = (dec.v_star - v_d - dec.lambda * ev.Lg_h).norm() +
                    std::abs(cfg.gamma * dec.mu_star - dec.lambda * ev.h);
  residual += std::max(0.0, -b_star);          // primal feasibility
  residual += std::max(0.0, -dec.lambda);      // dual feasibility
  residual += std::abs(dec.lambda * b_star);   // complementary slackness
  report.kkt_residual = residual;

  std::mt19937_64 rng(seed);
  const double v_spread = 3.0 * std::max(1.0, dec.lambda * ev.Lg_h.norm());
  const double mu_spread = 3.0 * std::max(std::abs(dec.mu_star), 0.02);
  std::uniform_real_distribution<double> dv(-v_spread, v_spread);
  std::uniform_real_distribution<double> dmu(-mu_spread, mu_spread);
  for (int i = 0; i < samples; ++i) {
    const Eigen::Vector2d v = dec.v_star + Eigen::Vector2d(dv(rng), dv(rng));
    const double mu = dec.mu_star + dmu(rng);
    if (constraint_value(ev, v, mu, cfg.alpha_slope) < 0.0) continue;
    const double gap = cost(v, mu) - star_cost;
    report.min_cost_gap = std::min(report.min_cost_gap, gap);
    if (gap < -1e-12 * std::max(1.0, star_cost)) ++report.cost_violations;
  }
  return report;
}

}  // namespace cbfnav
