#pragma once

// Unicycle plant and its goal-seeking nominal controller.
//
// State layout is (qx, qy, v, theta); the two inputs command forward
// acceleration and turn rate.  The nominal controller steers toward a
// goal point and brakes once inside the arrival tolerance.  Everything
// is generic over the scalar so the controller can be differentiated
// along trajectories.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>

#include "cbfnav/jet.hpp"

namespace cbfnav {

struct GoalSpec {
  Eigen::Vector2d position{0.0, 0.0};
  double arrival_tolerance = 0.1;
  double k1 = 0.2;  // heading-error coupling
  double k2 = 1.0;  // approach speed scale
  double k3 = 2.0;  // speed damping
};

template <class S>
std::array<S, 4> unicycle_drift(const std::array<S, 4>& x) {
  using std::cos;
  using std::sin;
  return {x[2] * cos(x[3]), x[2] * sin(x[3]), zero_like(x[0]),
          zero_like(x[0])};
}

// Inputs enter speed and heading directly; the matrix is constant.
inline Eigen::Matrix<double, 4, 2> unicycle_input_matrix() {
  Eigen::Matrix<double, 4, 2> g = Eigen::Matrix<double, 4, 2>::Zero();
  g(2, 0) = 1.0;
  g(3, 1) = 1.0;
  return g;
}

// Wraps an angle to (-pi, pi] by subtracting a whole number of turns.
// The shift is constant, so derivative information passes through.
template <class S>
S wrap_angle(const S& raw) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  const double turns = std::round(value_of(raw) / two_pi);
  S w = raw - two_pi * turns;
  if (value_of(w) <= -std::numbers::pi) w = w + two_pi;
  return w;
}

template <class S>
std::array<S, 2> desired_control(const std::array<S, 4>& x,
                                 const GoalSpec& goal) {
  using std::atan2;
  using std::cos;
  using std::sin;
  using std::sqrt;

  const S dx = x[0] - goal.position.x();
  const S dy = x[1] - goal.position.y();
  const S dist = sqrt(dx * dx + dy * dy);
  const S& v = x[2];

  if (value_of(dist) <= goal.arrival_tolerance) {
    return {(-goal.k3) * v, zero_like(v)};
  }

  const S delta = wrap_angle(atan2(dy, dx) - x[3] + std::numbers::pi);
  const S sd = sin(delta);
  const S cd = cos(delta);
  const S accel = -(goal.k1 + goal.k3) * v +
                  (1.0 + goal.k1 * goal.k3) * dist * cd +
                  goal.k1 * (goal.k2 * dist + v) * (sd * sd);
  const S turn = (goal.k2 + v / dist) * sd;
  return {accel, turn};
}

}  // namespace cbfnav
