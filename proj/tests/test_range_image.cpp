// Copyright 2026 The BeamForge Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <random>

#include <gtest/gtest.h>

#include "beamforge/range_image.hpp"
#include "beamforge/simulator.hpp"
#include "test_util.hpp"

namespace bf = beamforge;
using bf::testing::TempDir;

namespace {

bf::RangeImage constant_image(std::size_t rows, std::size_t cols, double value) {
  std::vector<double> angles(rows);
  for (std::size_t r = 0; r < rows; ++r) angles[r] = -0.3 + 0.01 * r;
  bf::RangeImage img(angles, cols);
  std::fill(img.range_m.begin(), img.range_m.end(), value);
  std::fill(img.valid.begin(), img.valid.end(), 1);
  return img;
}

}  // namespace

TEST(RangeImage, SinglePoint) {
  bf::PointCloud c;
  c.points = {bf::from_spherical({0.02, 0.0, 7.0})};
  c.beam_labels = std::vector<bf::BeamIndex>{3};
  const std::vector<double> rows{-0.1, -0.05, 0.0, 0.02, 0.05};
  const auto img = bf::project_labeled(c, rows, 64);
  EXPECT_EQ(img.valid_count(), 1u);
  EXPECT_TRUE(img.is_valid(3, 32));
  EXPECT_NEAR(img.range(3, 32), 7.0, 1e-12);
}

TEST(RangeImage, AzimuthBins) {
  EXPECT_EQ(bf::azimuth_bin(-bf::kPi, 8), 0u);
  EXPECT_EQ(bf::azimuth_bin(bf::kPi, 8), 0u);  // wraps
  EXPECT_EQ(bf::azimuth_bin(0.0, 8), 4u);
  EXPECT_EQ(bf::azimuth_bin(bf::kPi - 1e-12, 8), 7u);
  bf::RangeImage img({0.0}, 8);
  for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(bf::azimuth_bin(img.bin_center(c), 8), c);
}

TEST(RangeImage, NearestRangeWinsAndOrderIndependent) {
  bf::PointCloud c;
  c.points = {bf::from_spherical({0.0, 0.1, 9.0}), bf::from_spherical({0.0, 0.1001, 4.0}),
              bf::from_spherical({0.0, 0.1002, 6.0})};
  c.beam_labels = std::vector<bf::BeamIndex>{0, 0, 0};
  const std::vector<double> rows{0.0};
  const auto a = bf::project_labeled(c, rows, 16);
  std::reverse(c.points.begin(), c.points.end());
  const auto b = bf::project_labeled(c, rows, 16);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.valid_count(), 1u);
  EXPECT_NEAR(a.range(0, bf::azimuth_bin(0.1, 16)), 4.0, 1e-12);
}

TEST(RangeImage, UnprojectSingleCell) {
  // with an odd width the middle column is centered on azimuth 0
  bf::RangeImage img({0.0}, 9);
  img.range_m[4] = 1.0;
  img.valid[4] = 1;
  const auto cloud = bf::unproject(img);
  ASSERT_EQ(cloud.size(), 1u);
  EXPECT_NEAR(cloud.points[0].x, 1.0, 1e-15);
  EXPECT_NEAR(cloud.points[0].y, 0.0, 1e-15);
  EXPECT_NEAR(cloud.points[0].z, 0.0, 1e-15);
  EXPECT_EQ((*cloud.beam_labels)[0], 0);

  EXPECT_TRUE(bf::unproject(bf::RangeImage({0.0, 0.1}, 16)).empty());
}

TEST(RangeImage, SimulatorOccupancy) {
  auto cfg = bf::testing::small_sim(8, 2400, 1);
  const auto sim = bf::simulate_scan(cfg);
  const auto img = bf::project(sim.cloud, bf::model_from_labels(sim.cloud, sim.truth.centers), 2048);
  EXPECT_GE(static_cast<double>(img.valid_count()) / (8.0 * 2048), 0.9);
}

TEST(RangeImage, ProjectionFixpoint) {
  const auto sim = bf::simulate_scan(bf::testing::small_sim(16, 3000, 2));
  const auto first = bf::project_labeled(sim.cloud, sim.truth.centers, 1024);
  const auto second = bf::project_labeled(bf::unproject(first), first.row_angles, 1024);
  ASSERT_EQ(first.valid, second.valid);
  for (std::size_t i = 0; i < first.range_m.size(); ++i) EXPECT_NEAR(first.range_m[i], second.range_m[i], 1e-9);
}

TEST(RangeImage, RoundTripBound) {
  auto cfg = bf::testing::small_sim(16, 1500, 3);
  cfg.zenith_noise = bf::deg2rad(0.1);
  cfg.azimuth_jitter = 0.001;
  const auto sim = bf::simulate_scan(cfg);
  bf::ClusterConfig cc;
  cc.beam_count = 16;
  const auto model = bf::cluster_cloud(sim.cloud, cc);
  const std::size_t w = 512;
  const auto img = bf::project(sim.cloud, model, w);
  const auto out = bf::unproject(img);
  double max_gap = 0;
  for (std::size_t k = 1; k < model.centers.size(); ++k) max_gap = std::max(max_gap, model.centers[k] - model.centers[k - 1]);
  // nearest input in the same cell
  std::vector<double> best(img.rows * w, std::numeric_limits<double>::infinity());
  std::vector<bf::SphericalCoord> winner(img.rows * w);
  for (std::size_t i = 0; i < sim.cloud.size(); ++i) {
    const auto s = bf::to_spherical(sim.cloud.points[i]);
    const auto idx = model.assignments[i] * w + bf::azimuth_bin(s.azimuth, w);
    if (s.range < best[idx]) {
      best[idx] = s.range;
      winner[idx] = s;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto s = bf::to_spherical(out.points[i]);
    const auto idx = (*out.beam_labels)[i] * w + bf::azimuth_bin(s.azimuth, w);
    const auto& in = winner[idx];
    EXPECT_LE(std::abs(std::remainder(s.azimuth - in.azimuth, 2 * bf::kPi)), bf::kPi / w + 1e-12);
    EXPECT_LE(std::abs(s.zenith - in.zenith), max_gap / 2 + 1e-12);
    EXPECT_NEAR(s.range, in.range, 1e-12);
    EXPECT_EQ(img.range_m[idx], in.range);
  }
}

TEST(RangeImage, UpsampleConstant) {
  const auto img = constant_image(32, 64, 12.5);
  const auto up = bf::upsample_bilinear(img, 64);
  EXPECT_EQ(up.rows, 64u);
  EXPECT_EQ(up.row_angles.front(), img.row_angles.front());
  EXPECT_EQ(up.row_angles.back(), img.row_angles.back());
  EXPECT_EQ(up.valid_count(), 64u * 64);
  for (double v : up.range_m) EXPECT_EQ(v, 12.5);
}

TEST(RangeImage, UpsampleMidpoint) {
  bf::RangeImage img({0.0, 0.1}, 8);
  for (std::size_t c = 0; c < 8; ++c) {
    img.range_m[c] = 10;
    img.range_m[8 + c] = 20;
    img.valid[c] = img.valid[8 + c] = 1;
  }
  img.valid[8 + 5] = 0;
  const auto up = bf::upsample_bilinear(img, 3);
  EXPECT_NEAR(up.row_angles[1], 0.05, 1e-15);
  EXPECT_NEAR(up.range(1, 2), 15.0, 1e-12);
  EXPECT_FALSE(up.is_valid(1, 5));
  EXPECT_TRUE(up.is_valid(0, 5));
  EXPECT_FALSE(up.is_valid(2, 5));
}

TEST(RangeImage, UpsampleStaysInHull) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> r(1, 80);
  std::bernoulli_distribution hole(0.2);
  auto img = constant_image(10, 32, 0);
  for (std::size_t i = 0; i < img.range_m.size(); ++i) {
    img.range_m[i] = r(rng);
    img.valid[i] = hole(rng) ? 0 : 1;
  }
  const auto up = bf::upsample_bilinear(img, 37);
  for (std::size_t t = 0; t < up.rows; ++t) {
    const double a = up.row_angles[t];
    EXPECT_GE(a, img.row_angles.front());
    EXPECT_LE(a, img.row_angles.back());
    auto it = std::upper_bound(img.row_angles.begin(), img.row_angles.end(), a);
    const std::size_t hi = std::min<std::size_t>(it - img.row_angles.begin(), img.rows - 1);
    const std::size_t lo = hi == 0 ? 0 : hi - 1;
    for (std::size_t c = 0; c < 32; ++c) {
      if (!up.is_valid(t, c)) continue;
      const double mn = std::min(img.range(lo, c), img.range(hi, c)), mx = std::max(img.range(lo, c), img.range(hi, c));
      EXPECT_GE(up.range(t, c), mn - 1e-9);
      EXPECT_LE(up.range(t, c), mx + 1e-9);
    }
  }
}

TEST(RangeImage, UpsampleRejectsShrink) {
  EXPECT_THROW(bf::upsample_bilinear(constant_image(4, 8, 1), 3), bf::Error);
}

TEST(RangeImage, TileRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> r(1, 80);
  auto img = constant_image(7, 40, 0);
  for (std::size_t i = 0; i < img.range_m.size(); ++i) {
    img.valid[i] = (i * 7919) % 5 != 0;
    img.range_m[i] = img.valid[i] ? r(rng) : 0.0;
  }
  bf::write_range_image(img, dir / "a.bfri");
  EXPECT_EQ(bf::read_range_image(dir / "a.bfri"), img);
  bf::write_range_image_pgm(img, dir / "a.pgm");
  EXPECT_TRUE(std::filesystem::file_size(dir / "a.pgm") > 7u * 40);

  auto bytes = bf::encode_range_image(img);
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{20}, bytes.size() - 1}) {
    std::vector<std::byte> head(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(bf::decode_range_image(head), bf::Error);
  }
}
