#pragma once

// Closed-loop driver: sensing on a fixed clock, barrier synthesis,
// filtered control, and plant integration, with a full audit trail.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cbfnav/cbf_composer.hpp"
#include "cbfnav/control_dynamics.hpp"
#include "cbfnav/environment.hpp"
#include "cbfnav/perception_barrier.hpp"
#include "cbfnav/robot_model.hpp"
#include "cbfnav/safety_filter.hpp"

namespace cbfnav {

struct SimulationSettings {
  double control_rate = 100.0;  // filter updates per second
  double scan_period = 0.2;     // seconds between frames
  double horizon = 60.0;
  int rk_substeps = 1;          // plant integration refinement per update
  bool stop_on_arrival = true;
  double audit_floor = -1e-2;   // h below this counts as an audit failure

  LidarConfig lidar;
  PerceptionMargins margins;
  double rho = 30.0;
  int max_ellipses = 100;
  int window = 3;
  double kappa = 30.0;
  EtaParams eta;
};

struct SimulationProblem {
  EnvironmentMap map;
  SimulationSettings settings;
  HocbfChainConfig chain;
  FilterConfig filter;
  ControlDynamics stage = ControlDynamics::identity_stage();
  GoalSpec goal;
  std::array<double, 6> initial_state{};
};

struct StepRecord {
  double t = 0.0;
  std::array<double, 6> state{};
  Eigen::Vector2d v_star{0.0, 0.0};
  Eigen::Vector2d v_d{0.0, 0.0};
  Eigen::Vector2d u_d{0.0, 0.0};
  double h = 0.0;
  double psi0 = 0.0;
  double min_xi = 0.0;
  double min_phi = 0.0;
  double omega = 0.0;
  double lambda = 0.0;
  bool active = false;
  int frame_k = 0;
};

enum class StopReason { goal_reached, horizon_elapsed, crashed, non_finite };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::goal_reached: return "goal_reached";
    case StopReason::horizon_elapsed: return "horizon_elapsed";
    case StopReason::crashed: return "crashed";
    case StopReason::non_finite: return "non_finite";
  }
  return "unknown";
}

struct TerminationReport {
  StopReason reason = StopReason::horizon_elapsed;
  double end_time = 0.0;
  std::array<double, 6> final_state{};
  double goal_distance = std::numeric_limits<double>::infinity();
  double time_to_goal = std::numeric_limits<double>::quiet_NaN();
  double min_h = std::numeric_limits<double>::infinity();
  double min_psi0 = std::numeric_limits<double>::infinity();
  double min_xi = std::numeric_limits<double>::infinity();
  double min_phi = std::numeric_limits<double>::infinity();
  double max_abs_u1 = 0.0;
  double max_abs_u2 = 0.0;
  double max_abs_v = 0.0;
  double active_fraction = 0.0;
  long long degenerate_steps = 0;
  long long audit_failures = 0;
  long long overlap_warnings = 0;
  bool initial_membership_ok = true;
  long long steps = 0;
  long long scans = 0;
};

struct SimulationResult {
  std::vector<StepRecord> trajectory;
  std::vector<PerceptionFrame> frames;
  TerminationReport report;
};

namespace detail {

inline std::array<double, 6> cascade_rk4_step(const std::array<double, 6>& x,
                                              const Eigen::Vector2d& v,
                                              const ControlDynamics& stage,
                                              double h) {
  auto deriv = [&](const std::array<double, 6>& s) {
    std::array<double, 6> d = cascade_drift(s, stage.A);
    d[4] += stage.B(0, 0) * v.x() + stage.B(0, 1) * v.y();
    d[5] += stage.B(1, 0) * v.x() + stage.B(1, 1) * v.y();
    return d;
  };
  const auto k1 = deriv(x);
  std::array<double, 6> p;
  for (int j = 0; j < 6; ++j) p[j] = x[j] + 0.5 * h * k1[j];
  const auto k2 = deriv(p);
  for (int j = 0; j < 6; ++j) p[j] = x[j] + 0.5 * h * k2[j];
  const auto k3 = deriv(p);
  for (int j = 0; j < 6; ++j) p[j] = x[j] + h * k3[j];
  const auto k4 = deriv(p);
  std::array<double, 6> out;
  for (int j = 0; j < 6; ++j) {
    out[j] = x[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
  }
  return out;
}

inline double min_or_inf(const std::vector<double>& v) {
  double m = std::numeric_limits<double>::infinity();
  for (double x : v) m = std::min(m, x);
  return m;
}

inline double min_nested(const std::vector<std::vector<double>>& v) {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& inner : v) m = std::min(m, min_or_inf(inner));
  return m;
}

// Consecutive frames should watch overlapping ground; a handoff with
// no point positive in both frames means the robot outran its sensing.
inline bool frames_overlap(const PerceptionFrame& a,
                           const PerceptionFrame& b) {
  for (int s = 0; s <= 8; ++s) {
    const double w = s / 8.0;
    const Eigen::Vector2d p = (1.0 - w) * a.origin + w * b.origin;
    if (std::min(a.eval(p.x(), p.y()), b.eval(p.x(), p.y())) > 0.0) {
      return true;
    }
  }
  return false;
}

}  // namespace detail

inline SimulationResult run_simulation(const SimulationProblem& prob) {
  const SimulationSettings& st = prob.settings;
  if (st.control_rate <= 0.0) {
    throw std::invalid_argument("control rate must be positive");
  }
  if (st.horizon <= 0.0) {
    throw std::invalid_argument("horizon must be positive");
  }
  if (st.rk_substeps < 1) {
    throw std::invalid_argument("integration needs at least one substep");
  }
  const double steps_per_scan_real = st.control_rate * st.scan_period;
  const long long steps_per_scan = std::llround(steps_per_scan_real);
  if (steps_per_scan < 1 ||
      std::abs(steps_per_scan_real - static_cast<double>(steps_per_scan)) >
          1e-9 * std::max(1.0, steps_per_scan_real)) {
    throw std::invalid_argument(
        "scan period must be a whole number of control updates");
  }
  prob.chain.validate();

  const double dt = 1.0 / st.control_rate;
  const long long total_steps = std::llround(st.horizon * st.control_rate);

  SimulationResult result;
  TerminationReport& rep = result.report;

  std::array<double, 6> state = prob.initial_state;
  auto position = [&]() { return Eigen::Vector2d(state[0], state[1]); };
  auto crashed_at = [&](const Eigen::Vector2d& p) {
    return !prob.map.bounds.contains(p) || point_in_obstacle(p, prob.map);
  };

  if (crashed_at(position())) {
    rep.reason = StopReason::crashed;
    rep.end_time = 0.0;
    rep.final_state = state;
    rep.goal_distance = (position() - prob.goal.position).norm();
    return result;
  }

  const RawScan scan0 = cast_scan(prob.map, st.lidar, position());
  PerceptionFrame frame0 =
      build_frame(scan0, 0, st.margins, st.rho, st.max_ellipses);
  BarrierBuffer buffer(frame0, st.window, st.scan_period, st.kappa, st.eta);
  result.frames.push_back(frame0);
  rep.scans = 1;

  rep.initial_membership_ok =
      check_membership(buffer, prob.chain, prob.stage, 0.0, state)
          .all_nonnegative;

  auto ud_fn = [&prob](const auto& x) {
    return desired_control(x, prob.goal);
  };

  long long active_steps = 0;
  bool arrived = false;

  for (long long i = 0;; ++i) {
    const double t = static_cast<double>(i) * dt;

    if (crashed_at(position())) {
      rep.reason = StopReason::crashed;
      rep.end_time = t;
      break;
    }

    if (i > 0 && i % steps_per_scan == 0) {
      const int k = static_cast<int>(i / steps_per_scan);
      const RawScan scan = cast_scan(prob.map, st.lidar, position());
      PerceptionFrame frame =
          build_frame(scan, k, st.margins, st.rho, st.max_ellipses);
      if (!detail::frames_overlap(result.frames.back(), frame)) {
        ++rep.overlap_warnings;
      }
      buffer.push(frame);
      result.frames.push_back(std::move(frame));
      ++rep.scans;
    }

    const BarrierEvaluation ev =
        eval_h(buffer, prob.chain, prob.stage, t, state);
    const SurrogateCommand cmd =
        desired_surrogate(ud_fn, state, prob.stage, prob.filter);
    const FilterDecision dec = solve_filter(ev, cmd.v_d, prob.filter);

    StepRecord row;
    row.t = t;
    row.state = state;
    row.v_star = dec.v_star;
    row.v_d = cmd.v_d;
    row.u_d = cmd.u_d;
    row.h = ev.h;
    row.psi0 = ev.psi.empty() ? 0.0 : ev.psi.front();
    row.min_xi = detail::min_nested(ev.xi);
    row.min_phi = detail::min_or_inf(ev.phi);
    row.omega = dec.omega;
    row.lambda = dec.lambda;
    row.active = dec.active;
    row.frame_k = buffer.newest_index();
    result.trajectory.push_back(row);

    rep.min_h = std::min(rep.min_h, ev.h);
    rep.min_psi0 = std::min(rep.min_psi0, row.psi0);
    rep.min_xi = std::min(rep.min_xi, row.min_xi);
    rep.min_phi = std::min(rep.min_phi, row.min_phi);
    rep.max_abs_u1 = std::max(rep.max_abs_u1, std::abs(state[4]));
    rep.max_abs_u2 = std::max(rep.max_abs_u2, std::abs(state[5]));
    rep.max_abs_v = std::max(rep.max_abs_v, std::abs(state[2]));
    if (dec.active) ++active_steps;
    if (dec.degenerate) ++rep.degenerate_steps;
    if (ev.h < st.audit_floor) ++rep.audit_failures;

    const double goal_dist = (position() - prob.goal.position).norm();
    if (!arrived && goal_dist <= prob.goal.arrival_tolerance) {
      arrived = true;
      rep.time_to_goal = t;
      if (st.stop_on_arrival) {
        rep.reason = StopReason::goal_reached;
        rep.end_time = t;
        break;
      }
    }

    if (i == total_steps) {
      rep.reason = arrived && st.stop_on_arrival
                       ? StopReason::goal_reached
                       : StopReason::horizon_elapsed;
      rep.end_time = t;
      break;
    }

    const double h_sub = dt / st.rk_substeps;
    for (int s = 0; s < st.rk_substeps; ++s) {
      state = detail::cascade_rk4_step(state, dec.v_star, prob.stage, h_sub);
    }

    bool finite = true;
    for (double x : state) finite = finite && std::isfinite(x);
    if (!finite) {
      rep.reason = StopReason::non_finite;
      rep.end_time = t + dt;
      break;
    }
  }

  rep.final_state = state;
  rep.goal_distance = (position() - prob.goal.position).norm();
  rep.steps = static_cast<long long>(result.trajectory.size());
  rep.active_fraction =
      rep.steps > 0 ? static_cast<double>(active_steps) / rep.steps : 0.0;
  return result;
}

/* ------------------------------------------------------------ output */

inline void write_trajectory_csv(std::ostream& os,
                                 const std::vector<StepRecord>& rows) {
  os << "t,qx,qy,v,theta,u1,u2,vstar1,vstar2,vd1,vd2,ud1,ud2,"
        "h,psi0,min_xi,min_phi,omega,lambda,active,frame_k\n";
  char buf[64];
  auto put = [&](double x, char sep) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    os << buf << sep;
  };
  for (const StepRecord& r : rows) {
    put(r.t, ',');
    for (int j = 0; j < 6; ++j) put(r.state[j], ',');
    put(r.v_star.x(), ',');
    put(r.v_star.y(), ',');
    put(r.v_d.x(), ',');
    put(r.v_d.y(), ',');
    put(r.u_d.x(), ',');
    put(r.u_d.y(), ',');
    put(r.h, ',');
    put(r.psi0, ',');
    put(r.min_xi, ',');
    put(r.min_phi, ',');
    put(r.omega, ',');
    put(r.lambda, ',');
    os << (r.active ? 1 : 0) << ',' << r.frame_k << '\n';
  }
}

inline std::string describe(const TerminationReport& rep) {
  char buf[256];
  std::string out;
  auto line = [&](const char* fmt, auto... args) {
    std::snprintf(buf, sizeof(buf), fmt, args...);
    out += buf;
    out += '\n';
  };
  line("outcome:              %s", to_string(rep.reason));
  line("end time:             %.3f s", rep.end_time);
  line("steps / scans:        %lld / %lld", rep.steps, rep.scans);
  line("final position:       (%.4f, %.4f)", rep.final_state[0],
       rep.final_state[1]);
  line("distance to goal:     %.4f m", rep.goal_distance);
  if (std::isfinite(rep.time_to_goal)) {
    line("time to goal:         %.2f s", rep.time_to_goal);
  }
  line("min h:                %.6g", rep.min_h);
  line("min psi0:             %.6g", rep.min_psi0);
  line("min xi stages:        %.6g", rep.min_xi);
  line("min phi:              %.6g", rep.min_phi);
  line("peak |v|:             %.4f", rep.max_abs_v);
  line("peak |u1|, |u2|:      %.4f, %.4f", rep.max_abs_u1, rep.max_abs_u2);
  line("filter active:        %.1f%% of steps", 100.0 * rep.active_fraction);
  line("degenerate steps:     %lld", rep.degenerate_steps);
  line("audit failures:       %lld", rep.audit_failures);
  line("overlap warnings:     %lld", rep.overlap_warnings);
  line("start inside the set: %s", rep.initial_membership_ok ? "yes" : "no");
  return out;
}

}  // namespace cbfnav
