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

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "beamforge/detail/bytes.hpp"
#include "beamforge/error.hpp"
#include "beamforge/geometry.hpp"

namespace beamforge {

/// Beam count, vertical field of view and mean returns per beam of one sensor.
struct SensorProfile {
  std::string name;
  std::size_t beam_count = 0;
  double vfov_min = 0.0;  // radians
  double vfov_max = 0.0;  // radians
  double points_per_beam = 0.0;

  double vfov_span() const noexcept { return vfov_max - vfov_min; }

  void validate() const {
    if (beam_count == 0) throw Error(ErrorCode::config_error, "profile '" + name + "': beam_count must be >= 1");
    if (!(vfov_max > vfov_min)) throw Error(ErrorCode::degenerate_vfov, "profile '" + name + "': empty vfov");
    if (!(points_per_beam > 0.0)) {
      throw Error(ErrorCode::config_error, "profile '" + name + "': points_per_beam must be > 0");
    }
  }

  friend bool operator==(const SensorProfile&, const SensorProfile&) = default;
};

inline SensorProfile make_profile(std::string name, std::size_t beams, double vfov_min_deg, double vfov_max_deg,
                                  double points_per_beam) {
  return SensorProfile{std::move(name), beams, deg2rad(vfov_min_deg), deg2rad(vfov_max_deg), points_per_beam};
}

namespace profiles {
inline SensorProfile waymo() { return make_profile("waymo", 64, -17.6, 2.4, 2258); }
inline SensorProfile kitti() { return make_profile("kitti", 64, -23.6, 3.2, 1863); }
inline SensorProfile nuscenes() { return make_profile("nuscenes", 32, -30.0, 10.0, 1084); }

inline std::optional<SensorProfile> preset(std::string_view name) {
  if (name == "waymo") return waymo();
  if (name == "kitti") return kitti();
  if (name == "nuscenes") return nuscenes();
  return std::nullopt;
}
}  // namespace profiles

// Profile document: {"name": "...", "beam_count": N, "vfov_deg": [lo, hi], "points_per_beam": P}
inline SensorProfile profile_from_json(const nlohmann::json& j) {
  try {
    SensorProfile p;
    p.name = j.at("name").get<std::string>();
    p.beam_count = j.at("beam_count").get<std::size_t>();
    const auto vfov = j.at("vfov_deg").get<std::vector<double>>();
    if (vfov.size() != 2) throw Error(ErrorCode::config_error, "vfov_deg must have two entries");
    p.vfov_min = deg2rad(vfov[0]);
    p.vfov_max = deg2rad(vfov[1]);
    p.points_per_beam = j.at("points_per_beam").get<double>();
    p.validate();
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("profile document: ") + e.what());
  }
}

inline nlohmann::json profile_to_json(const SensorProfile& p) {
  return {{"name", p.name},
          {"beam_count", p.beam_count},
          {"vfov_deg", {rad2deg(p.vfov_min), rad2deg(p.vfov_max)}},
          {"points_per_beam", p.points_per_beam}};
}

inline SensorProfile load_profile_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(detail::read_file_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, path.string() + ": " + e.what());
  }
  return profile_from_json(j);
}

/// Resolves a profile reference: an existing file path, then
/// $BEAMFORGE_PROFILE_DIR/<name>.json, then a built-in preset.
inline SensorProfile resolve_profile(const std::string& ref) {
  namespace fs = std::filesystem;
  if (fs::is_regular_file(ref)) return load_profile_file(ref);
  if (const char* dir = std::getenv("BEAMFORGE_PROFILE_DIR"); dir && *dir) {
    const fs::path candidate = fs::path(dir) / (ref + ".json");
    if (fs::is_regular_file(candidate)) return load_profile_file(candidate);
  }
  if (auto p = profiles::preset(ref)) return *p;
  throw Error(ErrorCode::config_error, "unknown sensor profile '" + ref + "'");
}

}  // namespace beamforge
