#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "vftrack/pillar.hpp"

namespace vftrack {
namespace {

DisplacementVector step(double dx, double dy, std::int64_t frame) {
  DisplacementVector v;
  v.frame_index = frame;
  v.dx = dx;
  v.dy_growth = dy;
  return v;
}

std::vector<DisplacementVector> uniform_steps(double dx, double dy, std::int64_t frame, int n) {
  return std::vector<DisplacementVector>(std::size_t(n), step(dx, dy, frame));
}

TEST(ReconstructStep, ConstantGrowthStacksLayers) {
  const double g = 3.0;
  const int k = 4, n = 20;
  PillarShape s;
  for (int t = 1; t <= n; ++t) {
    std::vector<TrackPoint> born;
    for (int i = 0; i < k; ++i) born.push_back({t, double(i), 0.0});
    s = reconstruct_step(std::move(s), uniform_steps(0.0, g, t, 5), born, t);
  }
  ASSERT_EQ(s.points.size(), std::size_t(n * k));
  for (const auto& p : s.points) {
    EXPECT_NEAR(p.y_pillar, double(n - p.birth_frame) * g, 1e-12);
  }
  EXPECT_NEAR(s.cumulative_height, n * g, 1e-12);
}

TEST(ReconstructStep, PureDriftStaysAtBase) {
  PillarShape s;
  const int n = 10;
  for (int t = 1; t <= n; ++t) {
    s = reconstruct_step(std::move(s), uniform_steps(0.5, 0.0, t, 3), {{t, 0.0, 0.0}}, t);
  }
  for (const auto& p : s.points) EXPECT_EQ(p.y_pillar, 0.0);
  EXPECT_NEAR(s.cumulative_drift, n * 0.5, 1e-12);
}

TEST(ReconstructStep, MeanVectorShift) {
  PillarShape s;
  s.points = {{0, 0, 0}, {1, 1, 0}, {-2, 5, 0}};
  const std::vector<DisplacementVector> d{step(0, 1, 1), step(2, 3, 1)};
  const auto out = reconstruct_step(s, d, {}, 1);
  ASSERT_EQ(out.points.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(out.points[i].x_pillar, s.points[i].x_pillar + 1.0);
    EXPECT_EQ(out.points[i].y_pillar, s.points[i].y_pillar + 2.0);
  }
}

TEST(ReconstructStep, FrameCentreOffset) {
  PillarOptions opt;
  opt.frame_center_x = 255.5;
  const auto s = reconstruct_step({}, {}, {{0, 300.0, 17.0}}, 0, opt);
  ASSERT_EQ(s.points.size(), 1u);
  EXPECT_EQ(s.points[0].x_pillar, 44.5);
  EXPECT_EQ(s.points[0].y_pillar, 0.0);
}

TEST(ReconstructStep, TrimmedMeanIgnoresOutliers) {
  std::vector<DisplacementVector> d(38, step(0.0, 2.0, 1));
  d.push_back(step(500.0, 500.0, 1));
  d.push_back(step(-500.0, -300.0, 1));
  PillarOptions opt;
  opt.trimmed_mean = true;
  const auto [mx, my] = mean_displacement(d, opt);
  EXPECT_EQ(mx, 0.0);
  EXPECT_EQ(my, 2.0);
  const auto [rx, ry] = mean_displacement(d);
  EXPECT_NEAR(ry, (38 * 2.0 + 200.0) / 40.0, 1e-12);
  (void)rx;
}

TEST(ReconstructStep, RigidMotionPreservesDistances) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-5, 5), pos(-100, 100);
  PillarShape s;
  for (int t = 1; t <= 60; ++t) {
    std::vector<DisplacementVector> d;
    for (int i = 0; i < 7; ++i) d.push_back(step(u(rng), u(rng), t));
    const auto before = s.points;
    std::vector<TrackPoint> born;
    for (int i = 0; i < 3; ++i) born.push_back({t, pos(rng), 0.0});
    s = reconstruct_step(std::move(s), d, born, t);
    for (std::size_t i = 0; i < before.size(); ++i) {
      for (std::size_t j = i + 1; j < before.size(); ++j) {
        const double a = std::hypot(before[i].x_pillar - before[j].x_pillar,
                                    before[i].y_pillar - before[j].y_pillar);
        const double b = std::hypot(s.points[i].x_pillar - s.points[j].x_pillar,
                                    s.points[i].y_pillar - s.points[j].y_pillar);
        EXPECT_NEAR(a, b, 1e-9);
      }
    }
  }
}

TEST(ReconstructStep, NonNegativeGrowthIsMonotone) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(0, 4), v(-2, 2);
  PillarShape s;
  for (int t = 1; t <= 40; ++t) {
    std::vector<DisplacementVector> d;
    for (int i = 0; i < 5; ++i) d.push_back(step(v(rng), u(rng), t));
    s = reconstruct_step(std::move(s), d, {{t, 0.0, 0.0}, {t, 1.0, 0.0}}, t);
  }
  for (std::size_t i = 1; i < s.points.size(); ++i) {
    if (s.points[i].birth_frame > s.points[i - 1].birth_frame) {
      EXPECT_LE(s.points[i].y_pillar, s.points[i - 1].y_pillar);
    }
  }
}

TEST(ReconstructSequence, EmptyInput) {
  const auto r = reconstruct_sequence({}, {});
  EXPECT_TRUE(r.shape.points.empty());
  EXPECT_TRUE(r.series.empty());
}

TEST(ReconstructSequence, LinearGrowthHeight) {
  std::vector<TrackPoint> pts;
  for (int t = 0; t <= 100; ++t) pts.push_back({t, 50.0, 400.0 - 3.0 * t});
  const std::vector<Track> tracks{Track(0, pts)};
  const auto disp = displacements_from_tracks(tracks);
  const auto r = reconstruct_sequence(tracks, disp, 0.1);
  EXPECT_NEAR(r.shape.cumulative_height, 300.0, 1e-6);
  EXPECT_NEAR(*r.series.back().height_um, 30.0, 1e-6);
  EXPECT_EQ(r.series.size(), 101u);
  EXPECT_EQ(r.series.front().height_px, 0.0);
}

TEST(ReconstructSequence, DriftRampClosedForm) {
  const int n = 100;
  std::vector<TrackPoint> pts{{0, 0.0, 0.0}};
  for (int t = 1; t <= n; ++t) pts.push_back({t, pts.back().x + 0.1 * t, 0.0});
  const std::vector<Track> tracks{Track(0, pts)};
  const auto r = reconstruct_sequence(tracks, displacements_from_tracks(tracks));
  EXPECT_NEAR(r.shape.cumulative_drift, 0.1 * n * (n + 1) / 2.0, 1e-6);
  EXPECT_FALSE(r.series.back().drift_um);
}

TEST(ReconstructSequence, HeightEqualsGrowthIntegral) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2, 5);
  std::vector<Track> tracks;
  for (TrackId id = 0; id < 60; ++id) {
    const std::int64_t start = std::int64_t(rng() % 30);
    std::vector<TrackPoint> pts{{start, 100.0, 100.0}};
    for (std::size_t k = 0; k < rng() % 15; ++k) {
      pts.push_back({pts.back().frame_index + 1, pts.back().x + u(rng), pts.back().y - u(rng)});
    }
    tracks.emplace_back(id, pts);
  }
  const auto disp = displacements_from_tracks(tracks);
  const auto r = reconstruct_sequence(tracks, disp);
  EXPECT_NEAR(r.shape.cumulative_height, growth_series(disp, SequenceCalibration{}).integral(), 1e-9);
}

TEST(PillarCsv, Layout) {
  PillarShape s;
  s.points = {{-1.5, 3.0, 2}};
  std::stringstream a, b;
  write_pillar_shape_csv(a, s);
  EXPECT_EQ(a.str(), "x_pillar,y_pillar,birth_frame\n-1.5,3,2\n");
  write_pillar_series_csv(b, {{4, 6.0, 0.5, 0.6, std::nullopt}});
  EXPECT_EQ(b.str(), "frame,height_px,drift_px,height_um,drift_um\n4,6,0.5,0.6,\n");
}

}  // namespace
}  // namespace vftrack
