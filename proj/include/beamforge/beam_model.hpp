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
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "beamforge/error.hpp"
#include "beamforge/geometry.hpp"

namespace beamforge {

struct UniformSpanInit {};
struct FixedSeedInit {
  std::uint64_t seed = 0;
};

struct ClusterConfig {
  std::size_t beam_count = 1;
  std::size_t max_iters = 100;
  /// Convergence threshold on the largest center movement, radians.
  double tol = 1e-6;
  std::variant<UniformSpanInit, FixedSeedInit> init = UniformSpanInit{};
  /// Fraction of zeniths excluded from each tail when estimating centers
  /// (0.001 gives the 0.1% quantile trim). Trimmed points are still assigned.
  double trim_fraction = 0.0;
};

struct BeamModel {
  /// Beam zenith angles, strictly ascending, radians.
  std::vector<double> centers;
  /// Beam index per input zenith, in input order.
  std::vector<BeamIndex> assignments;
  double vfov_min = 0.0;
  double vfov_max = 0.0;
  std::vector<std::size_t> per_beam_counts;
  double mean_points_per_beam = 0.0;

  std::size_t iterations = 0;
  /// K-means objective after initialization and after every update step.
  std::vector<double> objective_history;

  std::size_t beam_count() const noexcept { return centers.size(); }
};

struct SensorStats {
  std::size_t beam_count = 0;
  double vfov_min = 0.0;
  double vfov_max = 0.0;
  double mean_points_per_beam = 0.0;
};

namespace detail {

// Index of the nearest center; exact ties go to the lower index.
inline std::size_t nearest_center(std::span<const double> centers, double z) noexcept {
  const auto it = std::upper_bound(centers.begin(), centers.end(), z);
  if (it == centers.begin()) return 0;
  if (it == centers.end()) return centers.size() - 1;
  const std::size_t hi = static_cast<std::size_t>(it - centers.begin());
  const std::size_t lo = hi - 1;
  return (z - centers[lo] <= centers[hi] - z) ? lo : hi;
}

// Cluster boundaries over sorted values: cluster k owns [splits[k], splits[k+1]).
inline void compute_splits(std::span<const double> sorted, std::span<const double> centers,
                           std::vector<std::size_t>& splits) {
  const std::size_t b = centers.size();
  splits.assign(b + 1, 0);
  splits[b] = sorted.size();
  auto first = sorted.begin();
  for (std::size_t k = 0; k + 1 < b; ++k) {
    const double lo = centers[k], hi = centers[k + 1];
    first = std::partition_point(first, sorted.end(), [&](double z) { return z - lo <= hi - z; });
    splits[k + 1] = static_cast<std::size_t>(first - sorted.begin());
  }
}

inline double objective(std::span<const double> sorted, std::span<const double> centers,
                        const std::vector<std::size_t>& splits) {
  double total = 0.0;
  for (std::size_t k = 0; k < centers.size(); ++k) {
    for (std::size_t i = splits[k]; i < splits[k + 1]; ++i) {
      const double d = sorted[i] - centers[k];
      total += d * d;
    }
  }
  return total;
}

// Midpoint of the widest gap between surviving centers; falls back to the
// data extremes when fewer than two centers survive.
inline double widest_gap_midpoint(const std::vector<double>& survivors, double data_min, double data_max) {
  std::vector<double> anchors = survivors;
  if (anchors.size() < 2) {
    anchors.insert(anchors.begin(), data_min);
    anchors.push_back(data_max);
  }
  std::size_t best = 0;
  double widest = -1.0;
  for (std::size_t i = 0; i + 1 < anchors.size(); ++i) {
    const double gap = anchors[i + 1] - anchors[i];
    if (gap > widest) {
      widest = gap;
      best = i;
    }
  }
  return anchors[best] + 0.5 * widest;
}

inline std::vector<double> initial_centers(std::span<const double> sorted, const ClusterConfig& cfg) {
  const std::size_t b = cfg.beam_count;
  std::vector<double> centers(b);
  if (std::holds_alternative<UniformSpanInit>(cfg.init)) {
    const double lo = sorted.front(), hi = sorted.back();
    if (b == 1) {
      centers[0] = 0.5 * (lo + hi);
    } else {
      for (std::size_t k = 0; k < b; ++k) {
        centers[k] = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(b - 1);
      }
    }
    return centers;
  }
  std::vector<double> distinct;
  std::unique_copy(sorted.begin(), sorted.end(), std::back_inserter(distinct));
  std::mt19937_64 rng(std::get<FixedSeedInit>(cfg.init).seed);
  centers.clear();
  std::sample(distinct.begin(), distinct.end(), std::back_inserter(centers), b, rng);
  std::sort(centers.begin(), centers.end());
  return centers;
}

}  // namespace detail

/// One-dimensional Lloyd iteration over zenith angles. Deterministic for a
/// given input and config: ties resolve to the lower center, empty clusters
/// are re-seeded at the widest gap between surviving centers.
inline BeamModel cluster_beams(std::span<const double> zeniths, const ClusterConfig& cfg) {
  const std::size_t b = cfg.beam_count;
  if (b == 0 || b > std::numeric_limits<BeamIndex>::max()) {
    throw Error(ErrorCode::invalid_argument, "beam count must be in [1, 65535]");
  }
  if (!(cfg.tol > 0.0)) throw Error(ErrorCode::invalid_argument, "tolerance must be positive");
  if (!(cfg.trim_fraction >= 0.0 && cfg.trim_fraction < 0.5)) {
    throw Error(ErrorCode::invalid_argument, "trim fraction must be in [0, 0.5)");
  }
  if (zeniths.size() < b) {
    throw Error(ErrorCode::insufficient_points, std::to_string(zeniths.size()) + " zeniths for " +
                                                    std::to_string(b) + " beams");
  }
  for (double z : zeniths) {
    if (!std::isfinite(z)) throw Error(ErrorCode::non_finite_input, "zenith angles must be finite");
  }

  std::vector<double> all_sorted(zeniths.begin(), zeniths.end());
  std::sort(all_sorted.begin(), all_sorted.end());
  const auto trim = static_cast<std::size_t>(std::floor(cfg.trim_fraction * static_cast<double>(all_sorted.size())));
  std::span<const double> sorted(all_sorted);
  if (all_sorted.size() - 2 * trim >= b) sorted = sorted.subspan(trim, all_sorted.size() - 2 * trim);

  std::size_t distinct = 1;
  for (std::size_t i = 1; i < sorted.size() && distinct < b; ++i) distinct += sorted[i] != sorted[i - 1];
  if (distinct < b) {
    throw Error(ErrorCode::insufficient_points, "fewer distinct zenith values than beams");
  }

  BeamModel model;
  std::vector<double> centers = detail::initial_centers(sorted, cfg);
  std::vector<std::size_t> splits;
  detail::compute_splits(sorted, centers, splits);
  model.objective_history.push_back(detail::objective(sorted, centers, splits));

  std::vector<double> next(b);
  std::vector<double> survivors;
  for (std::size_t it = 0; it < cfg.max_iters; ++it) {
    survivors.clear();
    std::size_t empty = 0;
    for (std::size_t k = 0; k < b; ++k) {
      const std::size_t lo = splits[k], hi = splits[k + 1];
      if (lo == hi) {
        ++empty;
        continue;
      }
      const double base = sorted[lo];
      double sum = 0.0;
      for (std::size_t i = lo; i < hi; ++i) sum += sorted[i] - base;
      survivors.push_back(base + sum / static_cast<double>(hi - lo));
    }
    next = survivors;
    for (std::size_t e = 0; e < empty; ++e) {
      const double seed = detail::widest_gap_midpoint(next, sorted.front(), sorted.back());
      next.insert(std::upper_bound(next.begin(), next.end(), seed), seed);
    }

    double movement = 0.0;
    for (std::size_t k = 0; k < b; ++k) movement = std::max(movement, std::abs(next[k] - centers[k]));
    centers.swap(next);
    ++model.iterations;
    detail::compute_splits(sorted, centers, splits);
    model.objective_history.push_back(detail::objective(sorted, centers, splits));
    if (movement < cfg.tol) break;
  }

  model.centers = std::move(centers);
  model.assignments.resize(zeniths.size());
  model.per_beam_counts.assign(b, 0);
  for (std::size_t i = 0; i < zeniths.size(); ++i) {
    const auto k = detail::nearest_center(model.centers, zeniths[i]);
    model.assignments[i] = static_cast<BeamIndex>(k);
    ++model.per_beam_counts[k];
  }
  model.vfov_min = model.centers.front();
  model.vfov_max = model.centers.back();
  model.mean_points_per_beam = static_cast<double>(zeniths.size()) / static_cast<double>(b);
  return model;
}

inline BeamModel cluster_cloud(const PointCloud& cloud, const ClusterConfig& cfg) {
  const auto z = zeniths_of(cloud);
  return cluster_beams(z, cfg);
}

/// Conventional labeling: beams assumed evenly spaced over [vfov_min, vfov_max],
/// each zenith snapped to the nearest assumed angle.
inline std::vector<BeamIndex> assign_uniform_baseline(std::span<const double> zeniths, double vfov_min,
                                                      double vfov_max, std::size_t beam_count) {
  if (!(vfov_max > vfov_min) || !std::isfinite(vfov_min) || !std::isfinite(vfov_max)) {
    throw Error(ErrorCode::invalid_vfov, "vfov upper bound must exceed lower bound");
  }
  if (beam_count == 0 || beam_count > std::numeric_limits<BeamIndex>::max()) {
    throw Error(ErrorCode::invalid_argument, "beam count must be in [1, 65535]");
  }
  std::vector<BeamIndex> out(zeniths.size(), 0);
  if (beam_count == 1) return out;
  const double step = (vfov_max - vfov_min) / static_cast<double>(beam_count - 1);
  const auto angle = [&](std::size_t k) { return vfov_min + step * static_cast<double>(k); };
  for (std::size_t i = 0; i < zeniths.size(); ++i) {
    const double f = std::floor((zeniths[i] - vfov_min) / step);
    const auto k = static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(beam_count - 2)));
    const bool lower = std::abs(zeniths[i] - angle(k)) <= std::abs(angle(k + 1) - zeniths[i]);
    out[i] = static_cast<BeamIndex>(lower ? k : k + 1);
  }
  return out;
}

inline SensorStats sensor_stats(const BeamModel& model) {
  if (model.centers.empty()) throw Error(ErrorCode::invalid_argument, "beam model has no beams");
  SensorStats s;
  s.beam_count = model.centers.size();
  s.vfov_min = *std::min_element(model.centers.begin(), model.centers.end());
  s.vfov_max = *std::max_element(model.centers.begin(), model.centers.end());
  const auto assigned = std::accumulate(model.per_beam_counts.begin(), model.per_beam_counts.end(), std::size_t{0});
  s.mean_points_per_beam = static_cast<double>(assigned) / static_cast<double>(s.beam_count);
  return s;
}

/// Builds a model from a labeled cloud and known beam angles (one per label value).
inline BeamModel model_from_labels(const PointCloud& cloud, std::vector<double> centers) {
  if (!cloud.beam_labels || cloud.beam_labels->size() != cloud.size()) {
    throw Error(ErrorCode::missing_beam_labels, "cloud carries no aligned beam labels");
  }
  if (centers.empty()) throw Error(ErrorCode::invalid_argument, "no beam centers");
  for (std::size_t k = 1; k < centers.size(); ++k) {
    if (!(centers[k] > centers[k - 1])) throw Error(ErrorCode::invalid_argument, "beam centers not ascending");
  }
  BeamModel m;
  m.centers = std::move(centers);
  m.assignments = *cloud.beam_labels;
  m.per_beam_counts.assign(m.centers.size(), 0);
  for (auto l : m.assignments) {
    if (l >= m.centers.size()) throw Error(ErrorCode::invalid_beam_label, "label exceeds beam count");
    ++m.per_beam_counts[l];
  }
  m.vfov_min = m.centers.front();
  m.vfov_max = m.centers.back();
  m.mean_points_per_beam = static_cast<double>(cloud.size()) / static_cast<double>(m.centers.size());
  return m;
}

/// Same as above with each beam's angle estimated as the mean zenith of its points.
inline BeamModel model_from_labels(const PointCloud& cloud) {
  if (!cloud.beam_labels || cloud.beam_labels->size() != cloud.size()) {
    throw Error(ErrorCode::missing_beam_labels, "cloud carries no aligned beam labels");
  }
  std::size_t b = cloud.beam_count;
  for (auto l : *cloud.beam_labels) b = std::max<std::size_t>(b, std::size_t{l} + 1);
  std::vector<double> sum(b, 0.0);
  std::vector<std::size_t> count(b, 0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto l = (*cloud.beam_labels)[i];
    sum[l] += to_spherical(cloud.points[i]).zenith;
    ++count[l];
  }
  std::vector<double> centers(b);
  for (std::size_t k = 0; k < b; ++k) {
    if (count[k] == 0) throw Error(ErrorCode::invalid_argument, "beam " + std::to_string(k) + " has no points");
    centers[k] = sum[k] / static_cast<double>(count[k]);
  }
  return model_from_labels(cloud, std::move(centers));
}

inline constexpr std::string_view kBeamModelDocFormat = "beamforge.beam_model";
inline constexpr int kBeamModelDocVersion = 1;

/// Text document for inspection: centers in degrees plus counts. Assignments
/// travel in the labeled scan, not here.
inline nlohmann::json beam_model_to_json(const BeamModel& m) {
  nlohmann::json j;
  j["format"] = kBeamModelDocFormat;
  j["version"] = kBeamModelDocVersion;
  j["beam_count"] = m.centers.size();
  std::vector<double> deg;
  for (double c : m.centers) deg.push_back(rad2deg(c));
  j["centers_deg"] = deg;
  j["per_beam_counts"] = m.per_beam_counts;
  j["vfov_deg"] = {rad2deg(m.vfov_min), rad2deg(m.vfov_max)};
  j["mean_points_per_beam"] = m.mean_points_per_beam;
  j["iterations"] = m.iterations;
  return j;
}

inline BeamModel beam_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kBeamModelDocFormat) {
      throw Error(ErrorCode::config_error, "not a beam model document");
    }
    if (j.at("version").get<int>() != kBeamModelDocVersion) {
      throw Error(ErrorCode::unsupported_version, "beam model document version");
    }
    BeamModel m;
    for (double d : j.at("centers_deg").get<std::vector<double>>()) m.centers.push_back(deg2rad(d));
    m.per_beam_counts = j.at("per_beam_counts").get<std::vector<std::size_t>>();
    if (m.centers.empty() || m.per_beam_counts.size() != m.centers.size()) {
      throw Error(ErrorCode::config_error, "beam model document arity");
    }
    m.vfov_min = m.centers.front();
    m.vfov_max = m.centers.back();
    m.mean_points_per_beam = j.at("mean_points_per_beam").get<double>();
    m.iterations = j.value("iterations", std::size_t{0});
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, e.what());
  }
}

}  // namespace beamforge
