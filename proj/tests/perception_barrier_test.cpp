#include "cbfnav/perception_barrier.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

namespace cbfnav {
namespace {

RawScan one_ray_scan(const Eigen::Vector2d& origin, double bearing,
                     double range, double max_range) {
  RawScan scan;
  scan.origin = origin;
  scan.max_range = max_range;
  scan.bearings = {bearing};
  scan.ranges = {range};
  return scan;
}

RawScan synthetic_scan(std::mt19937_64& rng, const Eigen::Vector2d& origin) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RawScan scan;
  scan.origin = origin;
  scan.max_range = 5.0;
  const int n = 24;
  for (int j = 0; j < n; ++j) {
    scan.bearings.push_back(2.0 * std::numbers::pi * j / n);
    scan.ranges.push_back(unit(rng) < 0.5 ? 5.0 : 0.8 + 4.0 * unit(rng));
  }
  return scan;
}

PerceptionFrame synthetic_frame(std::mt19937_64& rng, int index,
                                const Eigen::Vector2d& origin) {
  return build_frame(synthetic_scan(rng, origin), index, PerceptionMargins{},
                     30.0);
}

/* ------------------------------------------------------------ frames */

TEST(Frame, WorkedEllipseGeometry) {
  const auto scan = one_ray_scan({0.0, 0.0}, 0.0, 3.0, 5.0);
  const PerceptionFrame frame =
      build_frame(scan, 0, PerceptionMargins{0.15, 0.15}, 30.0);
  ASSERT_EQ(frame.ellipses.size(), 1u);
  const EllipseParam& e = frame.ellipses[0];
  EXPECT_DOUBLE_EQ(e.center.x(), 4.0);
  EXPECT_DOUBLE_EQ(e.center.y(), 0.0);
  EXPECT_DOUBLE_EQ(e.semi_major, 1.15);
  EXPECT_DOUBLE_EQ(e.semi_minor, std::sqrt(0.3225));
  EXPECT_DOUBLE_EQ(e.m00, 1.0 / (1.15 * 1.15));
  EXPECT_DOUBLE_EQ(e.m01, 0.0);
  EXPECT_DOUBLE_EQ(e.m11, 1.0 / 0.3225);
}

TEST(Frame, RotatedFormMatchesDirectConstruction) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ang(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> rr(0.3, 4.5);
  for (int trial = 0; trial < 50; ++trial) {
    const double theta = ang(rng);
    const double range = rr(rng);
    const auto scan = one_ray_scan({1.0, -2.0}, theta, range, 5.0);
    const PerceptionFrame frame =
        build_frame(scan, 0, PerceptionMargins{0.15, 0.15}, 30.0);
    ASSERT_EQ(frame.ellipses.size(), 1u);
    const EllipseParam& e = frame.ellipses[0];

    Eigen::Matrix2d R;
    R << std::cos(theta), std::sin(theta), -std::sin(theta), std::cos(theta);
    const Eigen::Matrix2d P =
        Eigen::Vector2d(1.0 / (e.semi_major * e.semi_major),
                        1.0 / (e.semi_minor * e.semi_minor))
            .asDiagonal();
    const Eigen::Matrix2d M = R.transpose() * P * R;
    EXPECT_NEAR(e.m00, M(0, 0), 1e-12);
    EXPECT_NEAR(e.m01, M(0, 1), 1e-12);
    EXPECT_NEAR(e.m11, M(1, 1), 1e-12);

    // Axis endpoints sit on the unit level set; the covered segment
    // endpoints sit strictly inside.
    const Eigen::Vector2d dir(std::cos(theta), std::sin(theta));
    const Eigen::Vector2d perp(-std::sin(theta), std::cos(theta));
    auto quad = [&](const Eigen::Vector2d& p) {
      const Eigen::Vector2d d = p - e.center;
      return e.m00 * d.x() * d.x() + 2.0 * e.m01 * d.x() * d.y() +
             e.m11 * d.y() * d.y();
    };
    EXPECT_NEAR(quad(e.center + e.semi_major * dir), 1.0, 1e-9);
    EXPECT_NEAR(quad(e.center - e.semi_major * dir), 1.0, 1e-9);
    EXPECT_NEAR(quad(e.center + e.semi_minor * perp), 1.0, 1e-9);
    const double m = (5.0 - range) / 2.0;
    EXPECT_LT(quad(e.center + m * dir), 1.0);
    EXPECT_LT(quad(e.center - m * dir), 1.0);
  }
}

TEST(Frame, FreeDiskFrozenValue) {
  RawScan scan;
  scan.origin = {0.0, 0.0};
  scan.max_range = 5.0;
  scan.bearings = {0.0, 1.0};
  scan.ranges = {5.0, 5.0};  // nothing returned
  const PerceptionFrame frame =
      build_frame(scan, 0, PerceptionMargins{0.15, 0.15}, 30.0);
  EXPECT_TRUE(frame.ellipses.empty());
  EXPECT_DOUBLE_EQ(frame.eval(0.0, 0.0), 23.5225);
  EXPECT_DOUBLE_EQ(frame.eval(2.0, 0.0), 23.5225 - 4.0);
}

TEST(Frame, StaysBelowEveryComponent) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> pos(-6.0, 6.0);
  for (int trial = 0; trial < 40; ++trial) {
    const Eigen::Vector2d origin(pos(rng) * 0.5, pos(rng) * 0.5);
    const PerceptionFrame frame = synthetic_frame(rng, 0, origin);
    for (int p = 0; p < 30; ++p) {
      const Eigen::Vector2d q(pos(rng), pos(rng));
      const double b = frame.eval(q.x(), q.y());
      const double fr = frame.disk_radius - frame.epsilon_beta;
      const double beta = fr * fr - (q - frame.origin).squaredNorm();
      double lowest = beta;
      EXPECT_LE(b, beta + 1e-12);
      for (const EllipseParam& e : frame.ellipses) {
        const Eigen::Vector2d d = q - e.center;
        const double sigma = e.m00 * d.x() * d.x() +
                             2.0 * e.m01 * d.x() * d.y() +
                             e.m11 * d.y() * d.y() - 1.0;
        EXPECT_LE(b, sigma + 1e-12);
        lowest = std::min(lowest, sigma);
      }
      const double count = 1.0 + static_cast<double>(frame.ellipses.size());
      EXPECT_GE(b, lowest - std::log(count) / frame.rho - 1e-12);
    }
  }
}

// Wherever the scanner actually hit something, the frame barrier must
// read unsafe.
TEST(Frame, NegativeAtScanHitPoints) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> pos(-8.0, 8.0);
  LidarConfig lidar;
  for (int scene = 0; scene < 10; ++scene) {
    EnvironmentMap map;
    map.bounds = {{-10.0, -10.0}, {10.0, 10.0}};
    for (int i = 0; i < 5; ++i) {
      map.obstacles.emplace_back(
          Circle{{pos(rng), pos(rng)}, 0.5 + 0.1 * i});
    }
    Eigen::Vector2d origin;
    for (;;) {
      origin = {pos(rng), pos(rng)};
      if (!point_in_obstacle(origin, map)) break;
    }
    const RawScan scan = cast_scan(map, lidar, origin);
    const PerceptionFrame frame =
        build_frame(scan, 0, PerceptionMargins{}, 30.0);
    for (std::size_t j = 0; j < scan.ranges.size(); ++j) {
      if (scan.ranges[j] >= scan.max_range) continue;
      const Eigen::Vector2d hit =
          origin + scan.ranges[j] * Eigen::Vector2d(std::cos(scan.bearings[j]),
                                                    std::sin(scan.bearings[j]));
      EXPECT_LT(frame.eval(hit.x(), hit.y()), 0.0) << "ray " << j;
    }
  }
}

TEST(Frame, CapKeepsTheClosestReturns) {
  RawScan scan;
  scan.origin = {0.0, 0.0};
  scan.max_range = 5.0;
  scan.bearings = {0.0, 0.5, 1.0, 1.5, 2.0};
  scan.ranges = {4.0, 1.5, 3.0, 0.9, 2.2};
  const PerceptionFrame frame =
      build_frame(scan, 0, PerceptionMargins{}, 30.0, 3);
  ASSERT_EQ(frame.ellipses.size(), 3u);
  // Closest three returns: ranges 0.9, 1.5, 2.2.
  std::vector<double> kept;
  for (const EllipseParam& e : frame.ellipses) kept.push_back(e.bearing);
  std::sort(kept.begin(), kept.end());
  EXPECT_DOUBLE_EQ(kept[0], 0.5);
  EXPECT_DOUBLE_EQ(kept[1], 1.5);
  EXPECT_DOUBLE_EQ(kept[2], 2.0);
}

TEST(Frame, GradientMatchesFiniteDifference) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> pos(-5.0, 5.0);
  const double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    const PerceptionFrame frame =
        synthetic_frame(rng, 0, {pos(rng) * 0.3, pos(rng) * 0.3});
    for (int p = 0; p < 10; ++p) {
      const double x = pos(rng);
      const double y = pos(rng);
      const Dual<2> bx = frame.eval(Dual<2>::seeded(x, 0), Dual<2>::seeded(y, 1));
      const double fdx =
          (frame.eval(x + h, y) - frame.eval(x - h, y)) / (2.0 * h);
      const double fdy =
          (frame.eval(x, y + h) - frame.eval(x, y - h)) / (2.0 * h);
      EXPECT_NEAR(bx.d[0], fdx, 1e-5 * std::max(1.0, std::abs(fdx)));
      EXPECT_NEAR(bx.d[1], fdy, 1e-5 * std::max(1.0, std::abs(fdy)));
    }
  }
}

/* ------------------------------------------------------ frame buffer */

TEST(Buffer, PrefillReproducesTheInitialFrame) {
  std::mt19937_64 rng(41);
  const PerceptionFrame frame = synthetic_frame(rng, 0, {0.5, -0.5});
  const BarrierBuffer buffer(frame, 3, 0.2, 30.0, EtaParams{});
  for (double t : {0.0, 0.05, 0.1, 0.19}) {
    for (double x : {-2.0, 0.0, 1.7}) {
      EXPECT_EQ(buffer.eval_psi0(t, x, 0.3), frame.eval(x, 0.3));
    }
  }
}

TEST(Buffer, HandoffIsSeamless) {
  std::mt19937_64 rng(43);
  BarrierBuffer buffer(synthetic_frame(rng, 0, {0.0, 0.0}), 3, 0.2, 30.0,
                       EtaParams{});
  for (int k = 1; k <= 3; ++k) {
    buffer.push(synthetic_frame(rng, k, {0.1 * k, -0.05 * k}));
  }
  const PerceptionFrame next = synthetic_frame(rng, 4, {0.4, -0.2});

  const double t_swap = 4 * 0.2;
  for (double x : {-1.0, 0.3, 2.2}) {
    for (double y : {-0.7, 1.1}) {
      const double before = buffer.eval_psi0(t_swap, x, y);
      // Time derivative is exactly flat at the swap on both sides.
      const auto jb = buffer.eval_psi0(Jet<double>::variable(t_swap, 1),
                                       Jet<double>(x, 1), Jet<double>(y, 1));
      BarrierBuffer advanced = buffer;
      advanced.push(next);
      const double after = advanced.eval_psi0(t_swap, x, y);
      const auto ja = advanced.eval_psi0(Jet<double>::variable(t_swap, 1),
                                         Jet<double>(x, 1), Jet<double>(y, 1));
      EXPECT_EQ(before, after);
      EXPECT_EQ(jb.c[1], 0.0);
      EXPECT_EQ(ja.c[1], 0.0);
    }
  }
}

TEST(Buffer, SingleFrameWindowBlendsExactly) {
  std::mt19937_64 rng(47);
  const PerceptionFrame f0 = synthetic_frame(rng, 0, {0.0, 0.0});
  const PerceptionFrame f1 = synthetic_frame(rng, 1, {0.2, 0.1});
  BarrierBuffer buffer(f0, 1, 0.2, 30.0, EtaParams{});
  buffer.push(f1);
  const double t = 0.27;
  const double s = t / 0.2 - 1.0;
  const double eta = smoothstep_eta(s, 2, 1.2);
  for (double x : {-0.5, 1.4}) {
    const double manual = eta * f1.eval(x, 0.6) + (1.0 - eta) * f0.eval(x, 0.6);
    EXPECT_DOUBLE_EQ(buffer.eval_psi0(t, x, 0.6), manual);
  }
}

TEST(Buffer, TimeDerivativeMatchesFiniteDifference) {
  std::mt19937_64 rng(53);
  BarrierBuffer buffer(synthetic_frame(rng, 0, {0.0, 0.0}), 3, 0.2, 30.0,
                       EtaParams{});
  for (int k = 1; k <= 3; ++k) {
    buffer.push(synthetic_frame(rng, k, {0.05 * k, 0.02 * k}));
  }
  const double h = 1e-7;
  for (double t : {0.62, 0.685, 0.73, 0.765}) {
    for (double x : {-1.3, 0.8}) {
      const auto jet = buffer.eval_psi0(Jet<double>::variable(t, 1),
                                        Jet<double>(x, 1), Jet<double>(0.4, 1));
      const double fd = (buffer.eval_psi0(t + h, x, 0.4) -
                         buffer.eval_psi0(t - h, x, 0.4)) /
                        (2.0 * h);
      EXPECT_NEAR(jet.c[1], fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
}

TEST(Buffer, RejectsIndexGapsAndStaleClocks) {
  std::mt19937_64 rng(59);
  const PerceptionFrame f0 = synthetic_frame(rng, 0, {0.0, 0.0});
  EXPECT_THROW(BarrierBuffer(synthetic_frame(rng, 2, {0.0, 0.0}), 3, 0.2, 30.0,
                             EtaParams{}),
               std::logic_error);
  EXPECT_THROW(BarrierBuffer(f0, 0, 0.2, 30.0, EtaParams{}),
               std::invalid_argument);
  EXPECT_THROW(BarrierBuffer(f0, 3, 0.2, 30.0, EtaParams{2, 0.9}),
               std::invalid_argument);

  BarrierBuffer buffer(f0, 3, 0.2, 30.0, EtaParams{});
  EXPECT_THROW(buffer.push(synthetic_frame(rng, 2, {0.1, 0.0})),
               std::logic_error);
  buffer.push(synthetic_frame(rng, 1, {0.1, 0.0}));
  EXPECT_EQ(buffer.frames().size(), 4u);
  EXPECT_EQ(buffer.newest_index(), 1);
  EXPECT_THROW(buffer.eval_psi0(0.05, 0.0, 0.0), std::logic_error);
  EXPECT_THROW(buffer.eval_psi0(0.45, 0.0, 0.0), std::logic_error);
  EXPECT_NO_THROW(buffer.eval_psi0(0.3, 0.0, 0.0));
}

// The soft union can flag a point safe only if some buffered frame
// does.
TEST(Buffer, PositiveImpliesSomeFramePositive) {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> drift(-0.1, 0.1);
  for (int round = 0; round < 5; ++round) {
    Eigen::Vector2d origin(drift(rng) * 10.0, drift(rng) * 10.0);
    BarrierBuffer buffer(synthetic_frame(rng, 0, origin), 3, 0.2, 30.0,
                         EtaParams{});
    for (int k = 1; k <= 3; ++k) {
      origin += Eigen::Vector2d(drift(rng), drift(rng));
      buffer.push(synthetic_frame(rng, k, origin));
    }
    const double t = 0.2 * 3 + 0.11;
    int safe_points = 0;
    for (int ix = 0; ix < 60; ++ix) {
      for (int iy = 0; iy < 60; ++iy) {
        const double x = -9.0 + 18.0 * ix / 59.0;
        const double y = -9.0 + 18.0 * iy / 59.0;
        const double psi0 = buffer.eval_psi0(t, x, y);
        if (psi0 < 0.0) continue;
        ++safe_points;
        double best = -std::numeric_limits<double>::infinity();
        for (const PerceptionFrame& f : buffer.frames()) {
          best = std::max(best, f.eval(x, y));
        }
        EXPECT_GT(best, -1e-12) << "at (" << x << ", " << y << ")";
      }
    }
    EXPECT_GT(safe_points, 0) << "degenerate round";
  }
}

}  // namespace
}  // namespace cbfnav
