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

#include <gtest/gtest.h>

#include "beamforge/io.hpp"
#include "beamforge/simulator.hpp"
#include "test_util.hpp"

namespace bf = beamforge;
using bf::testing::TempDir;

namespace {

double surface_residual(const bf::Scene& scene, const bf::Point3& p) {
  double best = std::numeric_limits<double>::infinity();
  if (scene.ground_height) best = std::abs(p.z - *scene.ground_height);
  const double q[3] = {p.x, p.y, p.z};
  for (const auto& b : scene.boxes) {
    bool inside = true;
    for (int a = 0; a < 3; ++a) inside = inside && q[a] >= b.min[a] - 1e-9 && q[a] <= b.max[a] + 1e-9;
    if (!inside) continue;
    for (int a = 0; a < 3; ++a) best = std::min({best, std::abs(q[a] - b.min[a]), std::abs(q[a] - b.max[a])});
  }
  return best;
}

}  // namespace

TEST(Simulator, SingleBeamAgainstBox) {
  bf::SimConfig cfg;
  cfg.beam_angles = {0.0};
  cfg.points_per_beam = 360;
  cfg.scene.boxes = {{{10.0, -2.0, -1.0}, {12.0, 2.0, 1.0}}};
  const auto sim = bf::simulate_scan(cfg);
  ASSERT_GT(sim.cloud.size(), 0u);
  EXPECT_EQ(sim.cloud.size() + sim.no_hit, 360u);
  for (const auto& p : sim.cloud.points) {
    EXPECT_NEAR(p.x, 10.0, 1e-9);
    EXPECT_NEAR(std::hypot(p.x, p.y), std::sqrt(100.0 + p.y * p.y), 1e-9);
    EXPECT_LE(std::hypot(p.x, p.y), std::hypot(10.0, 2.0) + 1e-9);
  }
}

TEST(Simulator, NoiselessZenithsMatchTable) {
  bf::SimConfig cfg;
  cfg.beam_count = 4;
  cfg.vfov_min = bf::deg2rad(-10);
  cfg.vfov_max = bf::deg2rad(2);
  cfg.points_per_beam = 100;
  cfg.scene = bf::default_scene();
  const auto sim = bf::simulate_scan(cfg);
  const double gap = bf::deg2rad(4);
  for (std::size_t i = 0; i < sim.cloud.size(); ++i) {
    const auto b = (*sim.cloud.beam_labels)[i];
    EXPECT_NEAR(bf::to_spherical(sim.cloud.points[i]).zenith, bf::deg2rad(-10) + gap * b, 1e-12);
  }
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(sim.truth.centers[k], bf::deg2rad(-10) + gap * k, 1e-15);
}

TEST(Simulator, KittiPreset) {
  const auto sim = bf::simulate_scan(bf::sim_config_for(bf::profiles::kitti(), 1));
  EXPECT_LE(sim.cloud.size(), 64u * 1863);
  EXPECT_EQ(sim.cloud.size() + sim.no_hit + sim.dropped, 64u * 1863);
  EXPECT_EQ(sim.truth.beam_count(), 64u);
  EXPECT_NEAR(bf::rad2deg(sim.truth.vfov_min), -23.6, 1e-9);
  EXPECT_NEAR(bf::rad2deg(sim.truth.vfov_max), 3.2, 1e-9);
  EXPECT_DOUBLE_EQ(sim.truth.mean_points_per_beam, 1863.0);
}

TEST(Simulator, SelfConsistency) {
  auto cfg = bf::sim_config_for(bf::profiles::waymo(), 2);
  cfg.azimuth_jitter = 0.0005;
  const auto sim = bf::simulate_scan(cfg);
  const double sigma = cfg.zenith_noise;
  const double slot = 2 * bf::kPi / cfg.points_per_beam;
  std::size_t beyond4 = 0;
  for (std::size_t i = 0; i < sim.cloud.size(); ++i) {
    const auto s = bf::to_spherical(sim.cloud.points[i]);
    const auto b = (*sim.cloud.beam_labels)[i];
    const double dz = std::abs(s.zenith - sim.truth.centers[b]);
    beyond4 += dz > 4 * sigma;
    ASSERT_LT(dz, 6 * sigma);
    // azimuth within jitter of its slot center
    const double u = (s.azimuth + bf::kPi) / slot - 0.5;
    const double off = std::abs(u - std::round(u)) * slot;
    ASSERT_LE(off, cfg.azimuth_jitter + 1e-9);
    ASSERT_LT(surface_residual(cfg.scene, sim.cloud.points[i]), 1e-9);
  }
  EXPECT_LT(static_cast<double>(beyond4) / sim.cloud.size(), 1e-3);
}

TEST(Simulator, DeterministicAcrossThreadCounts) {
  auto cfg = bf::testing::small_sim(16, 500, 3);
  cfg.zenith_noise = 0.001;
  cfg.dropout_rate = 0.1;
  const auto a = bf::simulate_scan(cfg);
  cfg.threads = 4;
  const auto b = bf::simulate_scan(cfg);
  EXPECT_EQ(bf::encode_scan(a.cloud, bf::ScanFileFormat::beam_labeled_bin),
            bf::encode_scan(b.cloud, bf::ScanFileFormat::beam_labeled_bin));
  EXPECT_GT(a.dropped, 0u);
  cfg.seed = 4;
  const auto c = bf::simulate_scan(cfg);
  EXPECT_NE(bf::encode_scan(a.cloud, bf::ScanFileFormat::beam_labeled_bin),
            bf::encode_scan(c.cloud, bf::ScanFileFormat::beam_labeled_bin));
}

TEST(Simulator, PerturbedTableAscending) {
  auto cfg = bf::testing::small_sim(64, 10, 5);
  cfg.spacing = bf::BeamSpacing::perturbed;
  cfg.pattern_sigma = bf::deg2rad(1.0);
  const auto angles = bf::resolve_beam_angles(cfg);
  EXPECT_TRUE(std::is_sorted(angles.begin(), angles.end()));
  cfg.spacing = bf::BeamSpacing::uniform;
  EXPECT_NE(angles, bf::resolve_beam_angles(cfg));
}

TEST(Simulator, ConfigDocument) {
  TempDir dir;
  bf::detail::write_file_text(dir / "c.json", R"({"preset": "nuscenes", "points_per_beam": 100, "seed": 9,
    "spacing": "perturbed", "pattern_sigma_deg": 0.2, "dropout_rate": 0.05,
    "scene": {"ground_height": -2.0, "boxes": [{"min": [5, -1, -2], "max": [6, 1, 0]}]}})");
  const auto cfg = bf::load_sim_config(dir / "c.json");
  EXPECT_EQ(cfg.beam_count, 32u);
  EXPECT_EQ(cfg.points_per_beam, 100u);
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.spacing, bf::BeamSpacing::perturbed);
  ASSERT_EQ(cfg.scene.boxes.size(), 1u);
  EXPECT_EQ(*cfg.scene.ground_height, -2.0);

  bf::detail::write_file_text(dir / "bad.json", R"({"spacing": "zigzag"})");
  EXPECT_THROW(bf::load_sim_config(dir / "bad.json"), bf::Error);
  bf::detail::write_file_text(dir / "desc.json", R"({"beam_angles_deg": [1, 0]})");
  EXPECT_THROW(bf::simulate_scan(bf::load_sim_config(dir / "desc.json")), bf::Error);
  bf::SimConfig drop;
  drop.dropout_rate = 1.0;
  EXPECT_THROW(bf::simulate_scan(drop), bf::Error);
}
