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

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "beamforge/beam_model.hpp"
#include "beamforge/detail/bytes.hpp"
#include "beamforge/detail/parallel.hpp"
#include "beamforge/error.hpp"
#include "beamforge/geometry.hpp"
#include "beamforge/profile.hpp"

namespace beamforge {

/// Axis-aligned box obstacle, meters in the sensor frame.
struct SceneBox {
  std::array<double, 3> min{};
  std::array<double, 3> max{};
};

struct Scene {
  /// z of the ground plane (below the sensor, so negative); none disables it.
  std::optional<double> ground_height;
  std::vector<SceneBox> boxes;
};

enum class BeamSpacing { uniform, perturbed };

struct SimConfig {
  /// Explicit beam table in radians; when empty the table is generated from
  /// beam_count / vfov / spacing.
  std::vector<double> beam_angles;
  std::size_t beam_count = 64;
  double vfov_min = deg2rad(-23.6);
  double vfov_max = deg2rad(3.2);
  BeamSpacing spacing = BeamSpacing::uniform;
  /// Std-dev of the per-beam offset from the uniform table (perturbed spacing).
  double pattern_sigma = 0.0;

  std::size_t points_per_beam = 1863;
  double zenith_noise = 0.0;
  double azimuth_jitter = 0.0;
  Scene scene;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct SimResult {
  PointCloud cloud;
  BeamModel truth;
  std::size_t no_hit = 0;
  std::size_t dropped = 0;
};

/// Ground at -1.73 m inside a 100 m x 100 m x 30 m enclosure with a few
/// vehicle and building sized boxes, so every ray returns and box edges give
/// range discontinuities.
inline Scene default_scene() {
  Scene s;
  s.ground_height = -1.73;
  s.boxes = {
      {{-50.0, -50.0, -1.73}, {50.0, 50.0, 30.0}},
      {{8.0, -1.0, -1.73}, {12.5, 1.0, -0.2}},
      {{-15.0, 3.0, -1.73}, {-10.5, 5.0, -0.1}},
      {{5.0, 6.0, -1.73}, {7.0, 14.0, 1.5}},
      {{20.0, -30.0, -1.73}, {30.0, -10.0, 8.0}},
  };
  return s;
}

/// Nearest positive hit distance of the ray from the origin along the unit
/// direction of (zenith, azimuth). A ray starting inside a box hits its inner faces.
inline std::optional<double> cast_ray(const Scene& scene, double zenith, double azimuth) {
  const std::array<double, 3> d{std::cos(zenith) * std::cos(azimuth), std::cos(zenith) * std::sin(azimuth),
                                std::sin(zenith)};
  double best = std::numeric_limits<double>::infinity();
  if (scene.ground_height && *scene.ground_height < 0.0 && d[2] < 0.0) {
    best = *scene.ground_height / d[2];
  }
  for (const auto& box : scene.boxes) {
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();
    bool miss = false;
    for (int a = 0; a < 3 && !miss; ++a) {
      if (d[a] == 0.0) {
        miss = box.min[a] > 0.0 || box.max[a] < 0.0;
        continue;
      }
      double t1 = box.min[a] / d[a], t2 = box.max[a] / d[a];
      if (t1 > t2) std::swap(t1, t2);
      t_near = std::max(t_near, t1);
      t_far = std::min(t_far, t2);
    }
    if (miss || t_near > t_far || t_far <= 0.0) continue;
    const double t = t_near > 0.0 ? t_near : t_far;
    best = std::min(best, t);
  }
  if (!std::isfinite(best)) return std::nullopt;
  return best;
}

inline std::vector<double> resolve_beam_angles(const SimConfig& cfg) {
  std::vector<double> angles = cfg.beam_angles;
  if (angles.empty()) {
    if (cfg.beam_count == 0) throw Error(ErrorCode::config_error, "simulator needs at least one beam");
    if (cfg.beam_count > 1 && !(cfg.vfov_max > cfg.vfov_min)) {
      throw Error(ErrorCode::invalid_vfov, "simulator vfov upper bound must exceed lower bound");
    }
    const std::size_t b = cfg.beam_count;
    const double gap = b > 1 ? (cfg.vfov_max - cfg.vfov_min) / static_cast<double>(b - 1) : 0.0;
    angles.resize(b);
    for (std::size_t k = 0; k < b; ++k) angles[k] = cfg.vfov_min + gap * static_cast<double>(k);
    if (cfg.spacing == BeamSpacing::perturbed && cfg.pattern_sigma > 0.0 && b > 1) {
      // Offsets truncated to +-0.45 gap keep the table strictly ascending.
      std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
      std::normal_distribution<double> offset(0.0, cfg.pattern_sigma);
      for (auto& a : angles) a += std::clamp(offset(rng), -0.45 * gap, 0.45 * gap);
    }
  }
  for (std::size_t k = 1; k < angles.size(); ++k) {
    if (!(angles[k] > angles[k - 1])) throw Error(ErrorCode::config_error, "beam angles must be strictly ascending");
  }
  return angles;
}

inline SimResult simulate_scan(const SimConfig& cfg) {
  if (cfg.zenith_noise < 0.0 || cfg.azimuth_jitter < 0.0) {
    throw Error(ErrorCode::config_error, "noise parameters must be non-negative");
  }
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) {
    throw Error(ErrorCode::config_error, "dropout_rate must be in [0, 1)");
  }
  if (cfg.points_per_beam == 0) throw Error(ErrorCode::config_error, "points_per_beam must be >= 1");
  const auto angles = resolve_beam_angles(cfg);
  const std::size_t b = angles.size();
  if (b > std::numeric_limits<BeamIndex>::max()) throw Error(ErrorCode::config_error, "too many beams");

  struct BeamOut {
    std::vector<Point3> points;
    std::size_t no_hit = 0;
    std::size_t dropped = 0;
  };
  std::vector<BeamOut> per_beam(b);
  const double slot = 2.0 * kPi / static_cast<double>(cfg.points_per_beam);

  detail::parallel_for(b, cfg.threads, [&](std::size_t beam) {
    std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                      static_cast<std::uint32_t>(beam)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> zenith_noise(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto& out = per_beam[beam];
    out.points.reserve(cfg.points_per_beam);
    for (std::size_t k = 0; k < cfg.points_per_beam; ++k) {
      const double dz = zenith_noise(rng) * cfg.zenith_noise;
      const double jitter = (2.0 * unit(rng) - 1.0) * cfg.azimuth_jitter;
      const double drop = unit(rng);
      if (drop < cfg.dropout_rate) {
        ++out.dropped;
        continue;
      }
      double azimuth = -kPi + (static_cast<double>(k) + 0.5) * slot + jitter;
      if (azimuth > kPi) azimuth -= 2.0 * kPi;
      if (azimuth <= -kPi) azimuth += 2.0 * kPi;
      const double zenith = angles[beam] + dz;
      const auto range = cast_ray(cfg.scene, zenith, azimuth);
      if (!range) {
        ++out.no_hit;
        continue;
      }
      out.points.push_back(from_spherical({zenith, azimuth, *range}));
    }
  });

  SimResult res;
  res.cloud.beam_labels.emplace();
  res.cloud.beam_count = b;
  res.cloud.frame_id = "sim-" + std::to_string(cfg.seed);
  for (std::size_t beam = 0; beam < b; ++beam) {
    auto& out = per_beam[beam];
    res.no_hit += out.no_hit;
    res.dropped += out.dropped;
    res.cloud.points.insert(res.cloud.points.end(), out.points.begin(), out.points.end());
    res.cloud.beam_labels->insert(res.cloud.beam_labels->end(), out.points.size(), static_cast<BeamIndex>(beam));
  }
  res.truth = model_from_labels(res.cloud, angles);
  return res;
}

/// Uniform beam table from a sensor profile, zenith noise one tenth of the
/// beam gap, default scene.
inline SimConfig sim_config_for(const SensorProfile& profile, std::uint64_t seed = 0) {
  SimConfig cfg;
  cfg.beam_count = profile.beam_count;
  cfg.vfov_min = profile.vfov_min;
  cfg.vfov_max = profile.vfov_max;
  cfg.points_per_beam = static_cast<std::size_t>(std::llround(profile.points_per_beam));
  const double gap = profile.beam_count > 1 ? profile.vfov_span() / static_cast<double>(profile.beam_count - 1) : 0.0;
  cfg.zenith_noise = gap / 10.0;
  cfg.scene = default_scene();
  cfg.seed = seed;
  return cfg;
}

// Config document (angles in degrees):
// {"preset": "kitti"} overrides the defaults below it, then any of
// "beam_angles_deg", "beam_count", "vfov_deg", "spacing" ("uniform" | "perturbed"),
// "pattern_sigma_deg", "points_per_beam", "zenith_noise_deg", "azimuth_jitter_deg",
// "dropout_rate", "seed", "scene": {"ground_height": z | null, "boxes": [{"min": [..], "max": [..]}]}
inline SimConfig sim_config_from_json(const nlohmann::json& j) {
  try {
    SimConfig cfg;
    cfg.scene = default_scene();
    if (j.contains("preset")) {
      const auto name = j.at("preset").get<std::string>();
      const auto p = profiles::preset(name);
      if (!p) throw Error(ErrorCode::config_error, "unknown simulator preset '" + name + "'");
      cfg = sim_config_for(*p);
    }
    if (j.contains("beam_angles_deg")) {
      cfg.beam_angles.clear();
      for (double d : j.at("beam_angles_deg").get<std::vector<double>>()) cfg.beam_angles.push_back(deg2rad(d));
    }
    if (j.contains("beam_count")) cfg.beam_count = j.at("beam_count").get<std::size_t>();
    if (j.contains("vfov_deg")) {
      const auto v = j.at("vfov_deg").get<std::vector<double>>();
      if (v.size() != 2) throw Error(ErrorCode::config_error, "vfov_deg must have two entries");
      cfg.vfov_min = deg2rad(v[0]);
      cfg.vfov_max = deg2rad(v[1]);
    }
    if (j.contains("spacing")) {
      const auto s = j.at("spacing").get<std::string>();
      if (s == "uniform") {
        cfg.spacing = BeamSpacing::uniform;
      } else if (s == "perturbed") {
        cfg.spacing = BeamSpacing::perturbed;
      } else {
        throw Error(ErrorCode::config_error, "spacing must be uniform or perturbed");
      }
    }
    if (j.contains("pattern_sigma_deg")) cfg.pattern_sigma = deg2rad(j.at("pattern_sigma_deg").get<double>());
    if (j.contains("points_per_beam")) cfg.points_per_beam = j.at("points_per_beam").get<std::size_t>();
    if (j.contains("zenith_noise_deg")) cfg.zenith_noise = deg2rad(j.at("zenith_noise_deg").get<double>());
    if (j.contains("azimuth_jitter_deg")) cfg.azimuth_jitter = deg2rad(j.at("azimuth_jitter_deg").get<double>());
    if (j.contains("dropout_rate")) cfg.dropout_rate = j.at("dropout_rate").get<double>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("scene")) {
      const auto& s = j.at("scene");
      cfg.scene = Scene{};
      if (s.contains("ground_height") && !s.at("ground_height").is_null()) {
        cfg.scene.ground_height = s.at("ground_height").get<double>();
      }
      if (s.contains("boxes")) {
        for (const auto& b : s.at("boxes")) {
          cfg.scene.boxes.push_back({b.at("min").get<std::array<double, 3>>(), b.at("max").get<std::array<double, 3>>()});
        }
      }
    }
    return cfg;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("simulator config: ") + e.what());
  }
}

inline SimConfig load_sim_config(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, path.string() + ": " + e.what());
  }
  return sim_config_from_json(j);
}

}  // namespace beamforge
