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
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "beamforge/error.hpp"

namespace beamforge {

using BeamIndex = std::uint16_t;

inline constexpr double kPi = std::numbers::pi;

constexpr double deg2rad(double deg) noexcept { return deg * kPi / 180.0; }
constexpr double rad2deg(double rad) noexcept { return rad * 180.0 / kPi; }

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  std::optional<double> intensity;

  bool finite() const noexcept { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
  friend bool operator==(const Point3&, const Point3&) = default;
};

/// Spherical decomposition of a return. zenith is the elevation above the
/// sensor's horizontal plane, azimuth the full-circle angle of (x, y) as
/// returned by atan2, so it lies in (-pi, pi] (pi for points on the -x axis).
struct SphericalCoord {
  double zenith = 0.0;
  double azimuth = 0.0;
  double range = 0.0;
};

struct PointCloud {
  std::vector<Point3> points;
  /// Aligned 1:1 with points when present.
  std::optional<std::vector<BeamIndex>> beam_labels;
  /// Number of beams the labels refer to; 0 when unknown.
  std::size_t beam_count = 0;
  std::string frame_id;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_labels() const noexcept { return beam_labels.has_value(); }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;
};

inline SphericalCoord to_spherical(const Point3& p) {
  const double planar = std::hypot(p.x, p.y);
  if (planar == 0.0) {
    throw Error(ErrorCode::degenerate_axis, "point lies on the sensor's vertical axis");
  }
  SphericalCoord s;
  s.zenith = std::atan(p.z / planar);
  s.azimuth = std::atan2(p.y, p.x);
  s.range = std::sqrt(p.x * p.x + p.y * p.y + p.z * p.z);
  return s;
}

inline Point3 from_spherical(const SphericalCoord& s) {
  const double planar = s.range * std::cos(s.zenith);
  return Point3{planar * std::cos(s.azimuth), planar * std::sin(s.azimuth),
                s.range * std::sin(s.zenith), std::nullopt};
}

inline bool is_degenerate(const Point3& p) noexcept { return p.x == 0.0 && p.y == 0.0; }

struct SphericalBatch {
  std::vector<SphericalCoord> coords;
  /// Index into the source cloud for each coordinate.
  std::vector<std::size_t> source_index;
  std::size_t dropped = 0;
};

inline SphericalBatch batch_to_spherical(const PointCloud& cloud) {
  SphericalBatch out;
  out.coords.reserve(cloud.size());
  out.source_index.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    if (is_degenerate(p) || !p.finite()) {
      ++out.dropped;
      continue;
    }
    out.coords.push_back(to_spherical(p));
    out.source_index.push_back(i);
  }
  return out;
}

/// Ingestion filter: removes points that are non-finite or on the vertical
/// axis, keeping labels aligned. Returns the number of removed points.
inline std::size_t drop_degenerate(PointCloud& cloud) {
  std::size_t kept = 0;
  const std::size_t n = cloud.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = cloud.points[i];
    if (is_degenerate(p) || !p.finite()) continue;
    if (kept != i) {
      cloud.points[kept] = cloud.points[i];
      if (cloud.beam_labels) (*cloud.beam_labels)[kept] = (*cloud.beam_labels)[i];
    }
    ++kept;
  }
  cloud.points.resize(kept);
  if (cloud.beam_labels) cloud.beam_labels->resize(kept);
  return n - kept;
}

inline std::vector<double> zeniths_of(const PointCloud& cloud) {
  std::vector<double> z;
  z.reserve(cloud.size());
  for (const auto& p : cloud.points) z.push_back(to_spherical(p).zenith);
  return z;
}

}  // namespace beamforge
