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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "beamforge/beam_model.hpp"
#include "beamforge/error.hpp"
#include "beamforge/geometry.hpp"
#include "beamforge/profile.hpp"

namespace beamforge {

/// Round-half-away-from-zero after snapping values within 1e-9 of a half
/// integer, so ratios of degree spans converted to radians round as written.
inline long long round_count(double x) {
  const double snapped = std::round(x * 1e9) / 1e9;
  return std::llround(snapped);
}

struct ResamplePlan {
  SensorProfile source;
  SensorProfile target;
  std::size_t equivalent_beams = 0;
  /// Sorted subset of [0, source.beam_count).
  std::vector<std::size_t> keep_beam_indices;
  double per_beam_keep_ratio = 1.0;

  bool is_identity() const noexcept {
    return keep_beam_indices.size() == source.beam_count && per_beam_keep_ratio == 1.0;
  }
};

/// Number of source-VFOV beams matching the target's angular beam density.
inline std::size_t equivalent_beams(const SensorProfile& source, const SensorProfile& target) {
  if (!(source.vfov_span() > 0.0) || !(target.vfov_span() > 0.0)) {
    throw Error(ErrorCode::degenerate_vfov, "both sensors need a non-empty vertical field of view");
  }
  const double value = source.vfov_span() / target.vfov_span() * static_cast<double>(target.beam_count);
  return static_cast<std::size_t>(round_count(value));
}

/// Evenly strided beam subset: index_i = round(i * from / to).
inline std::vector<std::size_t> uniform_beam_indices(std::size_t from, std::size_t to) {
  if (to == 0 || to > from) throw Error(ErrorCode::invalid_argument, "beam subset must satisfy 0 < to <= from");
  std::vector<std::size_t> idx;
  idx.reserve(to);
  for (std::size_t i = 0; i < to; ++i) {
    // round-half-away on the exact rational i*from/to
    std::size_t k = (2 * i * from + to) / (2 * to);
    k = std::min(k, from - 1);
    if (!idx.empty() && k <= idx.back()) k = idx.back() + 1;
    idx.push_back(k);
  }
  if (idx.back() >= from) throw Error(ErrorCode::invalid_argument, "beam subset overflow");
  return idx;
}

/// Plan for an explicit beam target and point keep ratio. Used directly by the
/// progressive pipeline, whose intermediate stages do not align points.
inline ResamplePlan make_plan(const SensorProfile& source, const SensorProfile& target, std::size_t beam_target,
                              double keep_ratio) {
  source.validate();
  if (beam_target > source.beam_count) {
    throw Error(ErrorCode::upsample_requested, "target needs " + std::to_string(beam_target) +
                                                   " beams but the source has " +
                                                   std::to_string(source.beam_count));
  }
  if (beam_target == 0) throw Error(ErrorCode::invalid_argument, "beam target rounds to zero");
  if (!(keep_ratio > 0.0 && keep_ratio <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "per-beam keep ratio must be in (0, 1]");
  }
  ResamplePlan plan;
  plan.source = source;
  plan.target = target;
  plan.equivalent_beams = beam_target;
  plan.keep_beam_indices = uniform_beam_indices(source.beam_count, beam_target);
  plan.per_beam_keep_ratio = keep_ratio;
  return plan;
}

inline double point_keep_ratio(const SensorProfile& source, const SensorProfile& target) {
  return std::min(1.0, target.points_per_beam / source.points_per_beam);
}

inline ResamplePlan plan_resample(const SensorProfile& source, const SensorProfile& target) {
  source.validate();
  target.validate();
  return make_plan(source, target, equivalent_beams(source, target), point_keep_ratio(source, target));
}

/// Beam angles of the kept beams, in output label order.
inline std::vector<double> kept_centers(const BeamModel& model, const ResamplePlan& plan) {
  std::vector<double> c;
  c.reserve(plan.keep_beam_indices.size());
  for (auto k : plan.keep_beam_indices) c.push_back(model.centers.at(k));
  return c;
}

/// Drops beams outside the plan and keeps an azimuth-ordered uniform stride of
/// points inside each kept beam. Output is grouped by new beam label, each
/// group in ascending azimuth; coordinates are copied unmodified.
inline PointCloud apply_resample(const PointCloud& cloud, const BeamModel& model, const ResamplePlan& plan) {
  if (model.assignments.size() != cloud.size()) {
    throw Error(ErrorCode::model_cloud_mismatch, "beam model covers " + std::to_string(model.assignments.size()) +
                                                     " points, cloud has " + std::to_string(cloud.size()));
  }
  if (model.centers.size() != plan.source.beam_count) {
    throw Error(ErrorCode::model_cloud_mismatch, "beam model has " + std::to_string(model.centers.size()) +
                                                     " beams, plan expects " +
                                                     std::to_string(plan.source.beam_count));
  }
  constexpr std::size_t kDropped = static_cast<std::size_t>(-1);
  std::vector<std::size_t> remap(model.centers.size(), kDropped);
  for (std::size_t n = 0; n < plan.keep_beam_indices.size(); ++n) remap.at(plan.keep_beam_indices[n]) = n;

  const std::size_t out_beams = plan.keep_beam_indices.size();
  std::vector<std::vector<std::size_t>> buckets(out_beams);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto b = model.assignments[i];
    if (b >= remap.size()) throw Error(ErrorCode::model_cloud_mismatch, "assignment exceeds beam count");
    if (remap[b] != kDropped) buckets[remap[b]].push_back(i);
  }

  struct Key {
    double azimuth;
    double range;
    std::size_t index;
  };
  PointCloud out;
  out.frame_id = cloud.frame_id;
  out.beam_count = out_beams;
  out.beam_labels.emplace();
  std::vector<Key> keys;
  for (std::size_t nb = 0; nb < out_beams; ++nb) {
    const auto& bucket = buckets[nb];
    keys.clear();
    keys.reserve(bucket.size());
    for (auto i : bucket) {
      const auto s = to_spherical(cloud.points[i]);
      keys.push_back({s.azimuth, s.range, i});
    }
    std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
      if (a.azimuth != b.azimuth) return a.azimuth < b.azimuth;
      if (a.range != b.range) return a.range < b.range;
      return a.index < b.index;
    });
    const std::size_t total = keys.size();
    const auto wanted = static_cast<std::size_t>(
        std::clamp<long long>(round_count(plan.per_beam_keep_ratio * static_cast<double>(total)), 0,
                              static_cast<long long>(total)));
    for (std::size_t j = 0; j < wanted; ++j) {
      // round-half-away of j * total / wanted, in exact integer arithmetic
      const std::size_t pos = (2 * j * total + wanted) / (2 * wanted);
      out.points.push_back(cloud.points[keys[pos].index]);
      out.beam_labels->push_back(static_cast<BeamIndex>(nb));
    }
  }
  return out;
}

}  // namespace beamforge
