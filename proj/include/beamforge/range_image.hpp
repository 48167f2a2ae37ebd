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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "beamforge/beam_model.hpp"
#include "beamforge/detail/bytes.hpp"
#include "beamforge/error.hpp"
#include "beamforge/geometry.hpp"

namespace beamforge {

inline constexpr std::size_t kDefaultAzimuthBins = 2048;

/// Beams x azimuth-bins grid of ranges. Column 0 starts at azimuth -pi; row r
/// is the beam at zenith row_angles[r].
struct RangeImage {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> range_m;
  std::vector<std::uint8_t> valid;
  std::vector<double> row_angles;

  RangeImage() = default;
  RangeImage(std::vector<double> angles, std::size_t width)
      : rows(angles.size()),
        cols(width),
        range_m(angles.size() * width, 0.0),
        valid(angles.size() * width, 0),
        row_angles(std::move(angles)) {}

  std::size_t index(std::size_t r, std::size_t c) const noexcept { return r * cols + c; }
  double range(std::size_t r, std::size_t c) const noexcept { return range_m[index(r, c)]; }
  bool is_valid(std::size_t r, std::size_t c) const noexcept { return valid[index(r, c)] != 0; }
  std::size_t valid_count() const noexcept {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
  }
  double bin_center(std::size_t c) const noexcept {
    return -kPi + (static_cast<double>(c) + 0.5) * (2.0 * kPi / static_cast<double>(cols));
  }

  friend bool operator==(const RangeImage&, const RangeImage&) = default;
};

inline std::size_t azimuth_bin(double azimuth, std::size_t cols) noexcept {
  const auto w = static_cast<long long>(cols);
  auto c = static_cast<long long>(std::floor((azimuth + kPi) / (2.0 * kPi) * static_cast<double>(cols)));
  c %= w;
  if (c < 0) c += w;
  return static_cast<std::size_t>(c);
}

namespace detail {

inline void check_row_angles(std::span<const double> angles) {
  if (angles.empty()) throw Error(ErrorCode::invalid_argument, "range image needs at least one row");
  for (std::size_t k = 1; k < angles.size(); ++k) {
    if (!(angles[k] > angles[k - 1])) throw Error(ErrorCode::invalid_argument, "row angles must be ascending");
  }
}

inline RangeImage project_labels(const PointCloud& cloud, std::span<const BeamIndex> labels,
                                 std::span<const double> row_angles, std::size_t width) {
  if (width < 8) throw Error(ErrorCode::invalid_argument, "range image width must be >= 8");
  if (labels.size() != cloud.size()) {
    throw Error(ErrorCode::model_cloud_mismatch, "beam labels do not cover the cloud");
  }
  check_row_angles(row_angles);
  RangeImage img(std::vector<double>(row_angles.begin(), row_angles.end()), width);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto row = labels[i];
    if (row >= img.rows) throw Error(ErrorCode::model_cloud_mismatch, "beam label exceeds row count");
    const auto s = to_spherical(cloud.points[i]);
    if (!(s.range > 0.0) || !std::isfinite(s.range)) continue;
    const auto idx = img.index(row, azimuth_bin(s.azimuth, width));
    if (!img.valid[idx] || s.range < img.range_m[idx]) {
      img.range_m[idx] = s.range;
      img.valid[idx] = 1;
    }
  }
  return img;
}

}  // namespace detail

/// Projects each point to (its beam, its azimuth bin); the nearest return wins a cell.
inline RangeImage project(const PointCloud& cloud, const BeamModel& model, std::size_t width = kDefaultAzimuthBins) {
  return detail::project_labels(cloud, model.assignments, model.centers, width);
}

/// Same, using the cloud's own beam labels with known row angles.
inline RangeImage project_labeled(const PointCloud& cloud, std::span<const double> row_angles,
                                  std::size_t width = kDefaultAzimuthBins) {
  if (!cloud.beam_labels) throw Error(ErrorCode::missing_beam_labels, "cloud carries no beam labels");
  return detail::project_labels(cloud, *cloud.beam_labels, row_angles, width);
}

/// Emits one point per valid cell at (row angle, bin-center azimuth, range).
inline PointCloud unproject(const RangeImage& img) {
  PointCloud out;
  out.beam_labels.emplace();
  out.beam_count = img.rows;
  for (std::size_t r = 0; r < img.rows; ++r) {
    for (std::size_t c = 0; c < img.cols; ++c) {
      if (!img.is_valid(r, c)) continue;
      out.points.push_back(from_spherical({img.row_angles[r], img.bin_center(c), img.range(r, c)}));
      out.beam_labels->push_back(static_cast<BeamIndex>(r));
    }
  }
  return out;
}

/// Per-cell diagnostics from upsampling: the absolute range difference of the
/// two contributing source cells (0 when only one row contributes).
struct UpsampleTrace {
  std::vector<double> contrast;
};

/// Inserts rows by linear interpolation in zenith over the original VFOV.
/// A target cell is valid only when every source cell with non-zero weight is valid.
inline RangeImage upsample_bilinear(const RangeImage& img, std::size_t target_rows, UpsampleTrace* trace = nullptr) {
  detail::check_row_angles(img.row_angles);
  if (target_rows < img.rows) throw Error(ErrorCode::invalid_argument, "target rows must be >= source rows");
  if (img.rows == 1 && target_rows > 1) {
    throw Error(ErrorCode::invalid_argument, "a single-row image has no vertical extent to interpolate over");
  }
  const double lo = img.row_angles.front(), hi = img.row_angles.back();
  std::vector<double> angles(target_rows);
  for (std::size_t t = 0; t < target_rows; ++t) {
    angles[t] = target_rows == 1 ? lo : lo + (hi - lo) * static_cast<double>(t) / static_cast<double>(target_rows - 1);
  }
  angles.back() = hi;
  RangeImage out(angles, img.cols);
  if (trace) trace->contrast.assign(out.range_m.size(), 0.0);

  for (std::size_t t = 0; t < target_rows; ++t) {
    const double a = angles[t];
    auto it = std::upper_bound(img.row_angles.begin(), img.row_angles.end(), a);
    std::size_t i = it == img.row_angles.begin() ? 0 : static_cast<std::size_t>(it - img.row_angles.begin()) - 1;
    i = std::min(i, img.rows >= 2 ? img.rows - 2 : 0);
    const std::size_t j = std::min(i + 1, img.rows - 1);
    const double w =
        j == i ? 0.0 : std::clamp((a - img.row_angles[i]) / (img.row_angles[j] - img.row_angles[i]), 0.0, 1.0);
    for (std::size_t c = 0; c < img.cols; ++c) {
      const bool need_i = w < 1.0, need_j = w > 0.0;
      if ((need_i && !img.is_valid(i, c)) || (need_j && !img.is_valid(j, c))) continue;
      const auto dst = out.index(t, c);
      double value;
      if (!need_j) {
        value = img.range(i, c);
      } else if (!need_i) {
        value = img.range(j, c);
      } else {
        value = img.range(i, c) + w * (img.range(j, c) - img.range(i, c));
        if (trace) trace->contrast[dst] = std::abs(img.range(j, c) - img.range(i, c));
      }
      out.range_m[dst] = value;
      out.valid[dst] = 1;
    }
  }
  return out;
}

struct UpsampleErrorReport {
  std::size_t compared_cells = 0;
  double mean_abs_error = 0.0;
  std::size_t edge_cells = 0;
  double edge_mean_abs_error = 0.0;
  double edge_max_abs_error = 0.0;
  /// Edge cells whose error exceeds 1 m.
  std::size_t edge_cells_over_1m = 0;
};

/// Scores an upsampled image against a ground-truth range per cell. Edge cells
/// are those interpolated across a source discontinuity above edge_threshold.
inline UpsampleErrorReport score_upsample(
    const RangeImage& upsampled, const UpsampleTrace& trace,
    const std::function<std::optional<double>(double zenith, double azimuth, std::size_t row, std::size_t col)>&
        truth,
    double edge_threshold = 5.0) {
  UpsampleErrorReport rep;
  double sum = 0.0, edge_sum = 0.0;
  for (std::size_t r = 0; r < upsampled.rows; ++r) {
    for (std::size_t c = 0; c < upsampled.cols; ++c) {
      if (!upsampled.is_valid(r, c)) continue;
      const auto ref = truth(upsampled.row_angles[r], upsampled.bin_center(c), r, c);
      if (!ref) continue;
      const double err = std::abs(upsampled.range(r, c) - *ref);
      ++rep.compared_cells;
      sum += err;
      if (trace.contrast[upsampled.index(r, c)] > edge_threshold) {
        ++rep.edge_cells;
        edge_sum += err;
        rep.edge_max_abs_error = std::max(rep.edge_max_abs_error, err);
        if (err > 1.0) ++rep.edge_cells_over_1m;
      }
    }
  }
  if (rep.compared_cells) rep.mean_abs_error = sum / static_cast<double>(rep.compared_cells);
  if (rep.edge_cells) rep.edge_mean_abs_error = edge_sum / static_cast<double>(rep.edge_cells);
  return rep;
}

// Tile layout, little-endian:
//   "BFRI" | version u16 | rows u32 | cols u32 | row_angles f64[rows]
//   | range f32[rows*cols] row-major | valid mask, 1 bit per cell, LSB first
namespace range_tile {
inline constexpr char kMagic[5] = "BFRI";
inline constexpr std::uint16_t kVersion = 1;
}  // namespace range_tile

inline std::vector<std::byte> encode_range_image(const RangeImage& img) {
  detail::ByteWriter w;
  w.put_magic(range_tile::kMagic);
  w.put(range_tile::kVersion);
  w.put(static_cast<std::uint32_t>(img.rows));
  w.put(static_cast<std::uint32_t>(img.cols));
  for (double a : img.row_angles) w.put(a);
  for (std::size_t i = 0; i < img.range_m.size(); ++i) w.put(static_cast<float>(img.valid[i] ? img.range_m[i] : 0.0));
  std::vector<std::uint8_t> mask((img.valid.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < img.valid.size(); ++i) {
    if (img.valid[i]) mask[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
  }
  for (auto m : mask) w.put(m);
  return w.take();
}

inline RangeImage decode_range_image(std::span<const std::byte> data) {
  detail::ByteReader r(data);
  if (!r.magic_is(range_tile::kMagic)) throw Error(ErrorCode::bad_magic, "not a range image tile");
  if (r.get<std::uint16_t>() != range_tile::kVersion) throw Error(ErrorCode::unsupported_version, "range tile");
  const std::size_t rows = r.get<std::uint32_t>(), cols = r.get<std::uint32_t>();
  if (rows == 0 || cols == 0) throw Error(ErrorCode::malformed_header, "empty range tile");
  if (cols > r.remaining() / rows) throw Error(ErrorCode::truncated_file, "range tile payload short");
  const std::size_t cells = rows * cols;
  const std::size_t need = rows * 8 + cells * 4 + (cells + 7) / 8;
  if (r.remaining() < need) throw Error(ErrorCode::truncated_file, "range tile payload short");
  if (r.remaining() > need) throw Error(ErrorCode::malformed_header, "trailing bytes after range tile");
  std::vector<double> angles(rows);
  for (auto& a : angles) a = r.get<double>();
  detail::check_row_angles(angles);
  RangeImage img(std::move(angles), cols);
  for (auto& v : img.range_m) v = r.get<float>();
  std::uint8_t byte = 0;
  for (std::size_t i = 0; i < cells; ++i) {
    if (i % 8 == 0) byte = r.get<std::uint8_t>();
    img.valid[i] = (byte >> (i % 8)) & 1u;
    if (img.valid[i] && !(img.range_m[i] > 0.0 && std::isfinite(img.range_m[i]))) {
      throw Error(ErrorCode::malformed_header, "valid cell with non-positive range");
    }
    if (!img.valid[i]) img.range_m[i] = 0.0;
  }
  return img;
}

inline void write_range_image(const RangeImage& img, const std::filesystem::path& path) {
  detail::write_file_bytes(path, encode_range_image(img));
}

inline RangeImage read_range_image(const std::filesystem::path& path) {
  return decode_range_image(detail::read_file_bytes(path));
}

/// 8-bit binary PGM, top row = highest beam, brightness proportional to range.
inline void write_range_image_pgm(const RangeImage& img, const std::filesystem::path& path, double max_range = 80.0) {
  const std::string header = "P5\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n255\n";
  std::vector<std::byte> bytes(reinterpret_cast<const std::byte*>(header.data()),
                               reinterpret_cast<const std::byte*>(header.data()) + header.size());
  for (std::size_t r = img.rows; r-- > 0;) {
    for (std::size_t c = 0; c < img.cols; ++c) {
      double v = img.is_valid(r, c) ? std::clamp(img.range(r, c) / max_range, 0.0, 1.0) * 255.0 : 0.0;
      bytes.push_back(static_cast<std::byte>(static_cast<std::uint8_t>(std::lround(v))));
    }
  }
  detail::write_file_bytes(path, bytes);
}

}  // namespace beamforge
