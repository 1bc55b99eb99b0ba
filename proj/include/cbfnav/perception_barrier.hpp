#pragma once

// Scan-to-barrier construction.
//
// Each scan becomes a frame: a sensing disk shrunk by a margin, minus
// soft-blended ellipses that cover every obstruction the scanner saw.
// An ellipse sits along its ray between the return point and the
// scanner ceiling, padded so its interior strictly covers the blocked
// segment.  Frames are immutable; a rolling buffer blends the newest
// frame in smoothly while the oldest fades out, which keeps the
// combined barrier differentiable in time across frame swaps.

#include <Eigen/Dense>

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "cbfnav/environment.hpp"
#include "cbfnav/smooth_math.hpp"

namespace cbfnav {

struct PerceptionMargins {
  double epsilon_a = 0.15;    // ellipse padding along the ray
  double epsilon_beta = 0.15; // sensing-disk shrink
};

struct EllipseParam {
  Eigen::Vector2d center{0.0, 0.0};
  double bearing = 0.0;
  double semi_major = 0.0;  // along the ray
  double semi_minor = 0.0;
  // Quadratic form of the unit-level set, world frame.
  double m00 = 0.0, m01 = 0.0, m11 = 0.0;
};

struct PerceptionFrame {
  int index = 0;
  Eigen::Vector2d origin{0.0, 0.0};
  double disk_radius = 0.0;
  double epsilon_beta = 0.0;
  double rho = 30.0;
  std::vector<EllipseParam> ellipses;

  // Barrier value of this frame alone.  Positive inside the shrunk
  // sensing disk and outside every ellipse.  Generic over the scalar
  // so the same code yields values, gradients, and time series.
  template <class T>
  T eval(const T& x, const T& y) const {
    const double fr = disk_radius - epsilon_beta;
    const T dx = x - origin.x();
    const T dy = y - origin.y();
    std::vector<T> vals;
    vals.reserve(ellipses.size() + 1);
    vals.push_back(fr * fr - dx * dx - dy * dy);
    for (const EllipseParam& e : ellipses) {
      const T ex = x - e.center.x();
      const T ey = y - e.center.y();
      vals.push_back(e.m00 * ex * ex + 2.0 * e.m01 * ex * ey +
                     e.m11 * ey * ey - 1.0);
    }
    if (vals.size() == 1) return vals[0];
    return softmin(std::span<const T>(vals.data(), vals.size()), rho);
  }
};

// Builds the frame for one scan.  Rays that reached the ceiling carry
// no obstruction and produce no ellipse.  If more rays returned than
// max_ellipses allows, the closest returns win.
inline PerceptionFrame build_frame(const RawScan& scan, int index,
                                   const PerceptionMargins& margins,
                                   double rho, int max_ellipses = 100) {
  if (margins.epsilon_a <= 0.0 || margins.epsilon_beta <= 0.0) {
    throw std::invalid_argument("build_frame: margins must be positive");
  }
  if (margins.epsilon_beta >= scan.max_range) {
    throw std::invalid_argument("build_frame: disk margin swallows the disk");
  }
  if (rho <= 0.0) throw std::invalid_argument("build_frame: rho must be positive");

  PerceptionFrame frame;
  frame.index = index;
  frame.origin = scan.origin;
  frame.disk_radius = scan.max_range;
  frame.epsilon_beta = margins.epsilon_beta;
  frame.rho = rho;

  std::vector<std::size_t> returns;
  for (std::size_t j = 0; j < scan.ranges.size(); ++j) {
    if (scan.ranges[j] < scan.max_range) returns.push_back(j);
  }
  if (static_cast<int>(returns.size()) > max_ellipses) {
    std::stable_sort(returns.begin(), returns.end(),
                     [&](std::size_t a, std::size_t b) {
                       return scan.ranges[a] < scan.ranges[b];
                     });
    returns.resize(max_ellipses);
  }

  for (std::size_t j : returns) {
    const double r = scan.ranges[j];
    const double theta = scan.bearings[j];
    const double m = (scan.max_range - r) / 2.0;
    const double a = m + margins.epsilon_a;
    const double z = std::sqrt(a * a - m * m);
    const double c = std::cos(theta);
    const double s = std::sin(theta);

    EllipseParam e;
    e.bearing = theta;
    e.semi_major = a;
    e.semi_minor = z;
    e.center = scan.origin + ((r + scan.max_range) / 2.0) *
                                 Eigen::Vector2d(c, s);
    const double ia = 1.0 / (a * a);
    const double iz = 1.0 / (z * z);
    e.m00 = c * c * ia + s * s * iz;
    e.m01 = c * s * (ia - iz);
    e.m11 = s * s * ia + c * c * iz;
    frame.ellipses.push_back(e);
  }
  return frame;
}

/* ------------------------------------------------------ frame buffer */

struct EtaParams {
  int r = 2;        // junction smoothness order of the blend
  double nu = 1.2;  // ramp rate; > 1 so the blend saturates early
};

// Rolling window of the last N+1 frames with a soft union across them.
// While frame k is active the barrier blends frame k in against frame
// k-N fading out; frames k-1 .. k-N+1 contribute at full weight.  The
// argument multiset is identical on both sides of a frame swap, so the
// combined barrier hands off without a jump.
class BarrierBuffer {
 public:
  BarrierBuffer(const PerceptionFrame& initial, int window, double period,
                double kappa, const EtaParams& eta)
      : window_(checked_window(window)),
        period_(period),
        kappa_(kappa),
        eta_(eta),
        frames_(static_cast<std::size_t>(window_) + 1, initial) {
    if (period <= 0.0) throw std::invalid_argument("period must be positive");
    if (kappa <= 0.0) throw std::invalid_argument("kappa must be positive");
    if (eta.nu <= 1.0) {
      throw std::invalid_argument("blend must saturate inside the period");
    }
    if (initial.index != 0) {
      throw std::logic_error("buffer seeds from frame index 0");
    }
  }

  int window() const { return window_; }
  double period() const { return period_; }
  int newest_index() const { return frames_.back().index; }
  const std::vector<PerceptionFrame>& frames() const { return frames_; }

  void push(const PerceptionFrame& frame) {
    if (frame.index != newest_index() + 1) {
      throw std::logic_error("frame indices must advance by one");
    }
    frames_.erase(frames_.begin());
    frames_.push_back(frame);
  }

  // Combined barrier at clock t, which must fall inside the active
  // frame interval (a hair of slack covers boundary evaluations).
  template <class T>
  T eval_psi0(const T& t, const T& x, const T& y) const {
    const int k = newest_index();
    const double tv = value_of(t);
    if (tv < k * period_ - 1e-9 || tv > (k + 1) * period_ + 1e-9) {
      throw std::logic_error("barrier clock out of sync with frame buffer");
    }
    const T s = t * (1.0 / period_) - static_cast<double>(k);
    const T eta = smoothstep_eta(s, eta_.r, eta_.nu);

    const std::size_t n = frames_.size();
    std::vector<T> args;
    args.reserve(static_cast<std::size_t>(window_));
    for (int i = 1; i <= window_ - 1; ++i) {
      args.push_back(frames_[n - 1 - static_cast<std::size_t>(i)].eval(x, y));
    }
    args.push_back(eta * frames_[n - 1].eval(x, y) +
                   (1.0 - eta) * frames_[0].eval(x, y));
    return softmax(std::span<const T>(args.data(), args.size()), kappa_);
  }

 private:
  static int checked_window(int w) {
    if (w < 1) throw std::invalid_argument("window must be at least 1");
    return w;
  }

  int window_;
  double period_;
  double kappa_;
  EtaParams eta_;
  std::vector<PerceptionFrame> frames_;
};

}  // namespace cbfnav
