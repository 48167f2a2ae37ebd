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
#include <random>
#include <span>
#include <string>
#include <vector>

#include "beamforge/detail/bytes.hpp"
#include "beamforge/error.hpp"

namespace beamforge {

/// Dense H x W x C bird's-eye-view feature grid, channel-last. Cell (row i,
/// col j) has its center at cell coordinates (x=j, y=i) and at BEV meters
/// origin + (j, i) * cell_size.
struct BevFeatureMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> values;
  double cell_size = 1.0;
  double origin_x = 0.0;
  double origin_y = 0.0;

  BevFeatureMap() = default;
  BevFeatureMap(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), values(h * w * c, fill) {}

  std::size_t index(std::size_t row, std::size_t col, std::size_t ch) const noexcept {
    return (row * width + col) * channels + ch;
  }
  double& at(std::size_t row, std::size_t col, std::size_t ch) { return values[index(row, col, ch)]; }
  double at(std::size_t row, std::size_t col, std::size_t ch) const { return values[index(row, col, ch)]; }

  bool same_shape(const BevFeatureMap& o) const noexcept {
    return height == o.height && width == o.width && channels == o.channels;
  }

  void validate() const {
    if (height == 0 || width == 0 || channels == 0) throw Error(ErrorCode::shape_mismatch, "feature map has a zero dimension");
    if (values.size() != height * width * channels) throw Error(ErrorCode::shape_mismatch, "feature map value count");
    for (double v : values) {
      if (!std::isfinite(v)) throw Error(ErrorCode::non_finite_input, "feature map holds a non-finite value");
    }
  }
};

/// BEV footprint of a 3D box: center and size in meters, yaw in radians.
struct BevBox {
  double cx = 0.0;
  double cy = 0.0;
  double dx = 1.0;
  double dy = 1.0;
  double yaw = 0.0;
};

/// Axis-aligned rectangle in continuous cell coordinates, x along width.
struct Roi {
  double x0 = 0.0;
  double y0 = 0.0;
  double x1 = 0.0;
  double y1 = 0.0;
  bool positive = false;

  double area() const noexcept { return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0); }
  friend bool operator==(const Roi&, const Roi&) = default;
};

struct RoiSet {
  std::vector<Roi> rois;
  std::size_t pooled_size = 7;
  /// Set when the requested positive/negative split could not be met.
  bool balance_shortfall = false;

  std::size_t positives() const noexcept {
    return static_cast<std::size_t>(std::count_if(rois.begin(), rois.end(), [](const Roi& r) { return r.positive; }));
  }
  std::size_t negatives() const noexcept { return rois.size() - positives(); }
  friend bool operator==(const RoiSet&, const RoiSet&) = default;
};

struct BevGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  double cell_size = 1.0;
  double origin_x = 0.0;
  double origin_y = 0.0;
};

inline BevGrid grid_of(const BevFeatureMap& m) { return {m.height, m.width, m.cell_size, m.origin_x, m.origin_y}; }

struct RoiConfig {
  std::size_t total = 128;
  double positive_fraction = 0.5;
  /// Positive center jitter as a fraction of the box size, per axis.
  double center_jitter = 0.1;
  double scale_min = 0.9;
  double scale_max = 1.1;
  /// Negatives must have IoU below this against every ground-truth bound.
  double negative_iou_max = 0.1;
  /// Negative side length in cells when there are no boxes to sample sizes from.
  double default_negative_size = 4.0;
  std::size_t attempts_per_roi = 200;
  std::size_t pooled_size = 7;
};

inline bool roi_intersects_grid(const Roi& r, std::size_t height, std::size_t width) noexcept {
  const double gx0 = -0.5, gy0 = -0.5, gx1 = static_cast<double>(width) - 0.5, gy1 = static_cast<double>(height) - 0.5;
  return r.x1 >= r.x0 && r.y1 >= r.y0 && r.x0 <= gx1 && r.x1 >= gx0 && r.y0 <= gy1 && r.y1 >= gy0;
}

inline double roi_iou(const Roi& a, const Roi& b) noexcept {
  const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Axis-aligned bound of a rotated box, converted to cell coordinates.
inline Roi box_to_cell_bounds(const BevBox& box, const BevGrid& grid) {
  const double c = std::abs(std::cos(box.yaw)), s = std::abs(std::sin(box.yaw));
  const double ex = 0.5 * (box.dx * c + box.dy * s);
  const double ey = 0.5 * (box.dx * s + box.dy * c);
  const double u = (box.cx - grid.origin_x) / grid.cell_size;
  const double v = (box.cy - grid.origin_y) / grid.cell_size;
  return Roi{u - ex / grid.cell_size, v - ey / grid.cell_size, u + ex / grid.cell_size, v + ey / grid.cell_size, true};
}

/// Positives: jittered ground-truth bounds resampled with replacement.
/// Negatives: rectangles sized like the positives, placed uniformly, kept only
/// when their IoU with every ground-truth bound is below the threshold.
/// Deterministic for a given seed.
inline RoiSet generate_rois(std::span<const BevBox> boxes, const BevGrid& grid, std::uint64_t seed,
                            const RoiConfig& cfg = {}) {
  if (grid.height == 0 || grid.width == 0 || !(grid.cell_size > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "BEV grid must have positive size");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  const double gw = static_cast<double>(grid.width), gh = static_cast<double>(grid.height);

  std::vector<Roi> truth;
  for (const auto& b : boxes) {
    if (!(b.dx > 0.0 && b.dy > 0.0)) throw Error(ErrorCode::invalid_argument, "box size must be positive");
    auto r = box_to_cell_bounds(b, grid);
    if (roi_intersects_grid(r, grid.height, grid.width)) truth.push_back(r);
  }

  RoiSet set;
  set.pooled_size = cfg.pooled_size;
  const std::size_t want_pos =
      truth.empty() ? 0 : static_cast<std::size_t>(std::llround(cfg.positive_fraction * static_cast<double>(cfg.total)));
  const std::size_t want_neg = cfg.total - want_pos;

  std::vector<std::array<double, 2>> sizes;
  for (std::size_t k = 0; k < want_pos; ++k) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < cfg.attempts_per_roi && !placed; ++attempt) {
      const auto& t = truth[std::min(truth.size() - 1, static_cast<std::size_t>(unit(rng) * truth.size()))];
      const double w = t.x1 - t.x0, h = t.y1 - t.y0;
      const double cx = 0.5 * (t.x0 + t.x1) + uniform(-cfg.center_jitter, cfg.center_jitter) * w;
      const double cy = 0.5 * (t.y0 + t.y1) + uniform(-cfg.center_jitter, cfg.center_jitter) * h;
      const double sw = w * uniform(cfg.scale_min, cfg.scale_max);
      const double sh = h * uniform(cfg.scale_min, cfg.scale_max);
      Roi r{cx - 0.5 * sw, cy - 0.5 * sh, cx + 0.5 * sw, cy + 0.5 * sh, true};
      if (!roi_intersects_grid(r, grid.height, grid.width)) continue;
      set.rois.push_back(r);
      sizes.push_back({sw, sh});
      placed = true;
    }
    if (!placed) set.balance_shortfall = true;
  }

  for (std::size_t k = 0; k < want_neg; ++k) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < cfg.attempts_per_roi && !placed; ++attempt) {
      double w = cfg.default_negative_size, h = cfg.default_negative_size;
      if (!sizes.empty()) {
        const auto& s = sizes[std::min(sizes.size() - 1, static_cast<std::size_t>(unit(rng) * sizes.size()))];
        w = s[0];
        h = s[1];
      }
      w = std::min(w, gw);
      h = std::min(h, gh);
      const double x0 = uniform(-0.5, gw - 0.5 - w), y0 = uniform(-0.5, gh - 0.5 - h);
      Roi r{x0, y0, x0 + w, y0 + h, false};
      const bool clear = std::all_of(truth.begin(), truth.end(),
                                     [&](const Roi& t) { return roi_iou(r, t) < cfg.negative_iou_max; });
      if (!clear) continue;
      set.rois.push_back(r);
      placed = true;
    }
    if (!placed) {
      set.balance_shortfall = true;
      break;
    }
  }
  return set;
}

/// Bilinear taps of one sample point: four (cell, weight) pairs.
struct SampleTaps {
  std::array<std::size_t, 4> cell{};
  std::array<double, 4> weight{};
};

namespace detail {

inline SampleTaps bilinear_taps(double x, double y, std::size_t height, std::size_t width) noexcept {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  const auto x0 = std::min(static_cast<std::size_t>(std::floor(x)), width - 1);
  const auto y0 = std::min(static_cast<std::size_t>(std::floor(y)), height - 1);
  const std::size_t x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
  const double ax = x - static_cast<double>(x0), ay = y - static_cast<double>(y0);
  SampleTaps t;
  t.cell = {y0 * width + x0, y0 * width + x1, y1 * width + x0, y1 * width + x1};
  t.weight = {(1.0 - ax) * (1.0 - ay), ax * (1.0 - ay), (1.0 - ax) * ay, ax * ay};
  return t;
}

}  // namespace detail

/// Sample grid of an ROI: pooled_size^2 points at the centers of an even
/// subdivision of the rectangle, row-major in y then x.
inline std::vector<SampleTaps> roi_sample_taps(const Roi& roi, std::size_t height, std::size_t width,
                                               std::size_t pooled_size) {
  if (pooled_size == 0) throw Error(ErrorCode::invalid_argument, "pooled size must be >= 1");
  if (!roi_intersects_grid(roi, height, width)) {
    throw Error(ErrorCode::empty_intersection, "ROI does not intersect the feature grid");
  }
  std::vector<SampleTaps> taps;
  taps.reserve(pooled_size * pooled_size);
  const double s = static_cast<double>(pooled_size);
  const double bw = (roi.x1 - roi.x0) / s, bh = (roi.y1 - roi.y0) / s;
  for (std::size_t sy = 0; sy < pooled_size; ++sy) {
    for (std::size_t sx = 0; sx < pooled_size; ++sx) {
      const double x = roi.x0 + (static_cast<double>(sx) + 0.5) * bw;
      const double y = roi.y0 + (static_cast<double>(sy) + 0.5) * bh;
      taps.push_back(detail::bilinear_taps(x, y, height, width));
    }
  }
  return taps;
}

/// pooled_size x pooled_size x C block, channel-last.
inline std::vector<double> pool_roi(const BevFeatureMap& map, const Roi& roi, std::size_t pooled_size = 7) {
  const auto taps = roi_sample_taps(roi, map.height, map.width, pooled_size);
  const std::size_t c = map.channels;
  std::vector<double> out(taps.size() * c, 0.0);
  for (std::size_t s = 0; s < taps.size(); ++s) {
    for (int k = 0; k < 4; ++k) {
      const double w = taps[s].weight[k];
      if (w == 0.0) continue;
      const double* src = &map.values[taps[s].cell[k] * c];
      for (std::size_t ch = 0; ch < c; ++ch) out[s * c + ch] += w * src[ch];
    }
  }
  return out;
}

struct MimicLossResult {
  double loss = 0.0;
  /// d loss / d student.values, same layout as the feature map.
  std::vector<double> grad;
};

/// Mean over ROIs of the Euclidean norm of (teacher block - student block).
/// The teacher is a constant; a block with zero difference contributes a zero
/// subgradient.
inline MimicLossResult mimic_loss(const BevFeatureMap& student, const BevFeatureMap& teacher, const RoiSet& rois) {
  if (!student.same_shape(teacher)) throw Error(ErrorCode::shape_mismatch, "student and teacher shapes differ");
  student.validate();
  teacher.validate();
  if (rois.rois.empty()) throw Error(ErrorCode::invalid_argument, "mimic loss needs at least one ROI");

  const std::size_t c = student.channels;
  const double inv_m = 1.0 / static_cast<double>(rois.rois.size());
  MimicLossResult res;
  res.grad.assign(student.values.size(), 0.0);
  std::vector<double> diff;
  for (const auto& roi : rois.rois) {
    const auto taps = roi_sample_taps(roi, student.height, student.width, rois.pooled_size);
    diff.assign(taps.size() * c, 0.0);
    for (std::size_t s = 0; s < taps.size(); ++s) {
      for (int k = 0; k < 4; ++k) {
        const double w = taps[s].weight[k];
        if (w == 0.0) continue;
        const std::size_t base = taps[s].cell[k] * c;
        for (std::size_t ch = 0; ch < c; ++ch) {
          diff[s * c + ch] += w * (student.values[base + ch] - teacher.values[base + ch]);
        }
      }
    }
    double sq = 0.0;
    for (double d : diff) sq += d * d;
    const double norm = std::sqrt(sq);
    res.loss += norm * inv_m;
    if (norm == 0.0) continue;
    const double scale = inv_m / norm;
    for (std::size_t s = 0; s < taps.size(); ++s) {
      for (int k = 0; k < 4; ++k) {
        const double w = taps[s].weight[k];
        if (w == 0.0) continue;
        const std::size_t base = taps[s].cell[k] * c;
        for (std::size_t ch = 0; ch < c; ++ch) res.grad[base + ch] += w * scale * diff[s * c + ch];
      }
    }
  }
  return res;
}

inline double total_loss(double l_gt, double l_m, double lambda) {
  if (!std::isfinite(l_gt) || !std::isfinite(l_m) || !std::isfinite(lambda)) {
    throw Error(ErrorCode::non_finite_input, "loss terms must be finite");
  }
  if (lambda < 0.0) throw Error(ErrorCode::invalid_argument, "mimic loss weight must be >= 0");
  return l_gt + lambda * l_m;
}

// Feature tile, little-endian:
//   "BFFM" | version u16 | H u32 | W u32 | C u32 | cell_size f32 | origin_x f32 | origin_y f32
//   | values f32[H*W*C], channel-last
// ROI tile:
//   "BFRS" | version u16 | count u32 | pooled_size u32 | flags u32 (bit 0: balance shortfall)
//   | count x { x0 f32 | y0 f32 | x1 f32 | y1 f32 | tag u32 (1 positive, 0 negative) }
namespace tensor_tile {
inline constexpr char kFeatureMagic[5] = "BFFM";
inline constexpr char kRoiMagic[5] = "BFRS";
inline constexpr std::uint16_t kVersion = 1;
}  // namespace tensor_tile

inline std::vector<std::byte> encode_feature_map(const BevFeatureMap& m) {
  detail::ByteWriter w;
  w.put_magic(tensor_tile::kFeatureMagic);
  w.put(tensor_tile::kVersion);
  w.put(static_cast<std::uint32_t>(m.height));
  w.put(static_cast<std::uint32_t>(m.width));
  w.put(static_cast<std::uint32_t>(m.channels));
  w.put(static_cast<float>(m.cell_size));
  w.put(static_cast<float>(m.origin_x));
  w.put(static_cast<float>(m.origin_y));
  for (double v : m.values) w.put(static_cast<float>(v));
  return w.take();
}

inline BevFeatureMap decode_feature_map(std::span<const std::byte> data) {
  detail::ByteReader r(data);
  if (!r.magic_is(tensor_tile::kFeatureMagic)) throw Error(ErrorCode::bad_magic, "not a feature map tile");
  if (r.get<std::uint16_t>() != tensor_tile::kVersion) throw Error(ErrorCode::unsupported_version, "feature tile");
  const std::size_t h = r.get<std::uint32_t>(), w = r.get<std::uint32_t>(), c = r.get<std::uint32_t>();
  BevFeatureMap m;
  m.height = h;
  m.width = w;
  m.channels = c;
  m.cell_size = r.get<float>();
  m.origin_x = r.get<float>();
  m.origin_y = r.get<float>();
  if (h == 0 || w == 0 || c == 0) throw Error(ErrorCode::shape_mismatch, "feature tile has a zero dimension");
  const std::size_t cap = r.remaining() / 4;
  if (w > cap / h || c > cap / (h * w)) throw Error(ErrorCode::truncated_file, "feature tile payload short");
  const std::size_t n = h * w * c;
  if (r.remaining() != n * 4) {
    throw Error(r.remaining() < n * 4 ? ErrorCode::truncated_file : ErrorCode::malformed_header,
                "feature tile payload size");
  }
  m.values.resize(n);
  for (auto& v : m.values) v = r.get<float>();
  return m;
}

inline std::vector<std::byte> encode_roi_set(const RoiSet& s) {
  detail::ByteWriter w;
  w.put_magic(tensor_tile::kRoiMagic);
  w.put(tensor_tile::kVersion);
  w.put(static_cast<std::uint32_t>(s.rois.size()));
  w.put(static_cast<std::uint32_t>(s.pooled_size));
  w.put(static_cast<std::uint32_t>(s.balance_shortfall ? 1u : 0u));
  for (const auto& r : s.rois) {
    w.put(static_cast<float>(r.x0));
    w.put(static_cast<float>(r.y0));
    w.put(static_cast<float>(r.x1));
    w.put(static_cast<float>(r.y1));
    w.put(static_cast<std::uint32_t>(r.positive ? 1u : 0u));
  }
  return w.take();
}

inline RoiSet decode_roi_set(std::span<const std::byte> data) {
  detail::ByteReader r(data);
  if (!r.magic_is(tensor_tile::kRoiMagic)) throw Error(ErrorCode::bad_magic, "not an ROI tile");
  if (r.get<std::uint16_t>() != tensor_tile::kVersion) throw Error(ErrorCode::unsupported_version, "ROI tile");
  const std::size_t count = r.get<std::uint32_t>();
  RoiSet s;
  s.pooled_size = r.get<std::uint32_t>();
  const auto flags = r.get<std::uint32_t>();
  if (flags > 1) throw Error(ErrorCode::malformed_header, "unknown ROI tile flags");
  s.balance_shortfall = flags == 1;
  if (s.pooled_size == 0 || s.pooled_size > 4096) throw Error(ErrorCode::malformed_header, "ROI pooled size");
  if (count > r.remaining() / 20) throw Error(ErrorCode::truncated_file, "ROI tile payload short");
  if (r.remaining() != count * 20) throw Error(ErrorCode::malformed_header, "trailing bytes after ROI tile");
  s.rois.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Roi roi;
    roi.x0 = r.get<float>();
    roi.y0 = r.get<float>();
    roi.x1 = r.get<float>();
    roi.y1 = r.get<float>();
    const auto tag = r.get<std::uint32_t>();
    if (tag > 1) throw Error(ErrorCode::malformed_header, "ROI tag must be 0 or 1");
    if (!std::isfinite(roi.x0) || !std::isfinite(roi.y0) || !std::isfinite(roi.x1) || !std::isfinite(roi.y1)) {
      throw Error(ErrorCode::non_finite_input, "ROI coordinates must be finite");
    }
    roi.positive = tag == 1;
    s.rois.push_back(roi);
  }
  return s;
}

inline BevFeatureMap read_feature_map(const std::filesystem::path& p) { return decode_feature_map(detail::read_file_bytes(p)); }
inline void write_feature_map(const BevFeatureMap& m, const std::filesystem::path& p) {
  detail::write_file_bytes(p, encode_feature_map(m));
}
inline RoiSet read_roi_set(const std::filesystem::path& p) { return decode_roi_set(detail::read_file_bytes(p)); }
inline void write_roi_set(const RoiSet& s, const std::filesystem::path& p) { detail::write_file_bytes(p, encode_roi_set(s)); }

}  // namespace beamforge
