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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "beamforge/detail/bytes.hpp"
#include "beamforge/error.hpp"
#include "beamforge/geometry.hpp"

namespace beamforge {

enum class ScanFileFormat { kitti_bin, pcd_ascii, pcd_binary, beam_labeled_bin };

constexpr std::string_view to_string(ScanFileFormat f) noexcept {
  switch (f) {
    case ScanFileFormat::kitti_bin: return "kitti";
    case ScanFileFormat::pcd_ascii: return "pcd-ascii";
    case ScanFileFormat::pcd_binary: return "pcd-binary";
    case ScanFileFormat::beam_labeled_bin: return "bfrg";
  }
  return "unknown";
}

inline std::optional<ScanFileFormat> parse_format_name(std::string_view name) {
  if (name == "kitti" || name == "bin") return ScanFileFormat::kitti_bin;
  if (name == "pcd-ascii" || name == "pcd") return ScanFileFormat::pcd_ascii;
  if (name == "pcd-binary") return ScanFileFormat::pcd_binary;
  if (name == "bfrg") return ScanFileFormat::beam_labeled_bin;
  return std::nullopt;
}

struct ScanReadResult {
  PointCloud cloud;
  /// Records dropped because a coordinate was NaN or infinite.
  std::size_t rejected_non_finite = 0;
};

struct ScanWriteResult {
  /// Set when the target format cannot carry beam labels and they were discarded.
  bool labels_dropped = false;
};

// BeamLabeledBin layout, all little-endian:
//   "BFRG" | version u16 | point_count u64 | beam_count u16 | flags u16
//   point_count x { x f32 | y f32 | z f32 | intensity f32 | beam_id u16 }
namespace bfrg {
inline constexpr char kMagic[5] = "BFRG";
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 4 + 2 + 8 + 2 + 2;
inline constexpr std::size_t kRecordSize = 4 * 4 + 2;
inline constexpr std::uint16_t kFlagIntensity = 0x1;
}  // namespace bfrg

inline constexpr std::size_t kKittiRecordSize = 16;

namespace detail {

inline void push_point(ScanReadResult& out, double x, double y, double z, std::optional<double> intensity,
                       std::optional<BeamIndex> label = std::nullopt) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z)) {
    ++out.rejected_non_finite;
    return;
  }
  out.cloud.points.push_back(Point3{x, y, z, intensity});
  if (label) out.cloud.beam_labels->push_back(*label);
}

inline ScanReadResult parse_kitti(std::span<const std::byte> data) {
  if (data.size() % kKittiRecordSize != 0) {
    throw Error(ErrorCode::truncated_file, "KITTI scan length " + std::to_string(data.size()) +
                                               " is not a multiple of 16 bytes");
  }
  ScanReadResult out;
  ByteReader r(data);
  const std::size_t n = data.size() / kKittiRecordSize;
  out.cloud.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const float x = r.get<float>(), y = r.get<float>(), z = r.get<float>(), in = r.get<float>();
    push_point(out, x, y, z, static_cast<double>(in));
  }
  return out;
}

inline std::vector<std::byte> encode_kitti(const PointCloud& cloud) {
  ByteWriter w;
  w.buffer().reserve(cloud.size() * kKittiRecordSize);
  for (const auto& p : cloud.points) {
    w.put(static_cast<float>(p.x));
    w.put(static_cast<float>(p.y));
    w.put(static_cast<float>(p.z));
    w.put(static_cast<float>(p.intensity.value_or(0.0)));
  }
  return w.take();
}

inline ScanReadResult parse_bfrg(std::span<const std::byte> data) {
  ByteReader r(data);
  if (!r.magic_is(bfrg::kMagic)) throw Error(ErrorCode::bad_magic, "not a BeamLabeledBin file");
  const auto version = r.get<std::uint16_t>();
  if (version != bfrg::kVersion) {
    throw Error(ErrorCode::unsupported_version, "BeamLabeledBin version " + std::to_string(version));
  }
  const auto count = r.get<std::uint64_t>();
  const auto beam_count = r.get<std::uint16_t>();
  const auto flags = r.get<std::uint16_t>();
  if ((flags & ~bfrg::kFlagIntensity) != 0) throw Error(ErrorCode::malformed_header, "unknown flag bits");
  if (count > r.remaining() / bfrg::kRecordSize) {
    throw Error(ErrorCode::truncated_file, "payload shorter than header point_count");
  }
  if (r.remaining() != count * bfrg::kRecordSize) {
    throw Error(ErrorCode::malformed_header, "trailing bytes after declared payload");
  }
  const bool has_intensity = (flags & bfrg::kFlagIntensity) != 0;
  ScanReadResult out;
  out.cloud.beam_count = beam_count;
  out.cloud.beam_labels.emplace();
  out.cloud.points.reserve(count);
  out.cloud.beam_labels->reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const float x = r.get<float>(), y = r.get<float>(), z = r.get<float>(), in = r.get<float>();
    const auto beam = r.get<std::uint16_t>();
    if (beam >= beam_count) {
      throw Error(ErrorCode::invalid_beam_label,
                  "beam_id " + std::to_string(beam) + " >= beam_count " + std::to_string(beam_count));
    }
    push_point(out, x, y, z, has_intensity ? std::optional<double>(in) : std::nullopt, beam);
  }
  return out;
}

inline std::vector<std::byte> encode_bfrg(const PointCloud& cloud) {
  if (!cloud.beam_labels) throw Error(ErrorCode::missing_beam_labels, "BeamLabeledBin requires beam labels");
  const auto& labels = *cloud.beam_labels;
  if (labels.size() != cloud.size()) {
    throw Error(ErrorCode::invalid_beam_label, "beam label count does not match point count");
  }
  std::size_t beam_count = cloud.beam_count;
  for (auto l : labels) beam_count = std::max<std::size_t>(beam_count, std::size_t{l} + 1);
  if (beam_count > 0xFFFF) throw Error(ErrorCode::invalid_beam_label, "beam_count exceeds 65535");
  const bool has_intensity =
      std::any_of(cloud.points.begin(), cloud.points.end(), [](const Point3& p) { return p.intensity.has_value(); });

  ByteWriter w;
  w.buffer().reserve(bfrg::kHeaderSize + cloud.size() * bfrg::kRecordSize);
  w.put_magic(bfrg::kMagic);
  w.put(bfrg::kVersion);
  w.put(static_cast<std::uint64_t>(cloud.size()));
  w.put(static_cast<std::uint16_t>(beam_count));
  w.put(static_cast<std::uint16_t>(has_intensity ? bfrg::kFlagIntensity : 0));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    w.put(static_cast<float>(p.x));
    w.put(static_cast<float>(p.y));
    w.put(static_cast<float>(p.z));
    w.put(static_cast<float>(p.intensity.value_or(0.0)));
    w.put(static_cast<std::uint16_t>(labels[i]));
  }
  return w.take();
}

struct PcdHeader {
  bool has_intensity = false;
  bool binary = false;
  std::vector<int> sizes;
  std::size_t points = 0;
  std::size_t payload_offset = 0;
};

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& value) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, value);
  return ec == std::errc() && ptr == end;
}

inline PcdHeader parse_pcd_header(std::string_view text) {
  PcdHeader h;
  std::vector<std::string_view> fields, types, counts;
  std::optional<std::size_t> width, height, points;
  bool saw_data = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) throw Error(ErrorCode::truncated_file, "PCD header not terminated");
    const auto line = text.substr(pos, eol - pos);
    pos = eol + 1;
    const auto tok = split_ws(line);
    if (tok.empty() || tok[0].starts_with("#")) continue;
    const auto key = tok[0];
    const std::vector<std::string_view> rest(tok.begin() + 1, tok.end());
    auto one_size = [&](std::optional<std::size_t>& dst) {
      std::size_t v = 0;
      if (rest.size() != 1 || !parse_number(rest[0], v)) {
        throw Error(ErrorCode::malformed_header, "bad PCD " + std::string(key));
      }
      dst = v;
    };
    if (key == "VERSION" || key == "VIEWPOINT") {
      continue;
    } else if (key == "FIELDS") {
      fields = rest;
    } else if (key == "SIZE") {
      for (auto s : rest) {
        int v = 0;
        if (!parse_number(s, v)) throw Error(ErrorCode::malformed_header, "bad PCD SIZE");
        h.sizes.push_back(v);
      }
    } else if (key == "TYPE") {
      types = rest;
    } else if (key == "COUNT") {
      counts = rest;
    } else if (key == "WIDTH") {
      one_size(width);
    } else if (key == "HEIGHT") {
      one_size(height);
    } else if (key == "POINTS") {
      one_size(points);
    } else if (key == "DATA") {
      if (rest.size() != 1) throw Error(ErrorCode::malformed_header, "bad PCD DATA");
      if (rest[0] == "ascii") {
        h.binary = false;
      } else if (rest[0] == "binary") {
        h.binary = true;
      } else {
        throw Error(ErrorCode::unsupported_layout, "PCD DATA " + std::string(rest[0]));
      }
      saw_data = true;
      break;
    } else {
      throw Error(ErrorCode::malformed_header, "unknown PCD key " + std::string(key));
    }
  }
  if (!saw_data) throw Error(ErrorCode::truncated_file, "PCD header has no DATA line");
  h.payload_offset = pos;

  const bool xyz = fields.size() >= 3 && fields[0] == "x" && fields[1] == "y" && fields[2] == "z";
  if (!xyz || fields.size() > 4 || (fields.size() == 4 && fields[3] != "intensity")) {
    throw Error(ErrorCode::unsupported_layout, "PCD fields must be x y z [intensity]");
  }
  h.has_intensity = fields.size() == 4;
  if (h.sizes.size() != fields.size() || types.size() != fields.size()) {
    throw Error(ErrorCode::malformed_header, "PCD SIZE/TYPE arity does not match FIELDS");
  }
  if (!counts.empty()) {
    if (counts.size() != fields.size()) throw Error(ErrorCode::malformed_header, "PCD COUNT arity");
    for (auto c : counts) {
      if (c != "1") throw Error(ErrorCode::unsupported_layout, "PCD COUNT must be 1");
    }
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (types[i] != "F") throw Error(ErrorCode::unsupported_layout, "PCD TYPE must be F");
    if (h.sizes[i] != 4 && (h.binary || h.sizes[i] != 8)) {
      throw Error(ErrorCode::unsupported_layout, "PCD SIZE must be 4");
    }
  }
  if (!width || !height) throw Error(ErrorCode::malformed_header, "PCD WIDTH/HEIGHT missing");
  if (*height != 0 && *width > SIZE_MAX / *height) throw Error(ErrorCode::malformed_header, "PCD size overflow");
  const std::size_t wh = *width * *height;
  if (points && *points != wh) throw Error(ErrorCode::malformed_header, "PCD POINTS != WIDTH*HEIGHT");
  h.points = wh;
  return h;
}

inline ScanReadResult parse_pcd(std::span<const std::byte> data, std::optional<bool> expect_binary) {
  const std::string_view text(reinterpret_cast<const char*>(data.data()), data.size());
  const auto h = parse_pcd_header(text);
  if (expect_binary && *expect_binary != h.binary) {
    throw Error(ErrorCode::unsupported_layout, h.binary ? "expected ascii PCD data" : "expected binary PCD data");
  }
  const std::size_t nfields = h.has_intensity ? 4 : 3;
  ScanReadResult out;
  if (h.binary) {
    const std::size_t stride = nfields * 4;
    const auto payload = data.subspan(h.payload_offset);
    if (h.points > payload.size() / stride) throw Error(ErrorCode::truncated_file, "PCD binary payload short");
    ByteReader r(payload);
    out.cloud.points.reserve(h.points);
    for (std::size_t i = 0; i < h.points; ++i) {
      const float x = r.get<float>(), y = r.get<float>(), z = r.get<float>();
      std::optional<double> in;
      if (h.has_intensity) in = r.get<float>();
      push_point(out, x, y, z, in);
    }
    return out;
  }
  std::size_t pos = h.payload_offset;
  std::size_t seen = 0;
  while (seen < h.points) {
    if (pos >= text.size()) throw Error(ErrorCode::truncated_file, "PCD ascii payload short");
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    const auto tok = split_ws(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (tok.empty()) continue;
    if (tok.size() != nfields) throw Error(ErrorCode::malformed_header, "PCD ascii record arity");
    double v[4] = {0, 0, 0, 0};
    for (std::size_t k = 0; k < nfields; ++k) {
      if (!parse_number(tok[k], v[k])) throw Error(ErrorCode::malformed_header, "PCD ascii number");
    }
    push_point(out, v[0], v[1], v[2], h.has_intensity ? std::optional<double>(v[3]) : std::nullopt);
    ++seen;
  }
  return out;
}

inline std::vector<std::byte> encode_pcd(const PointCloud& cloud, bool binary) {
  const bool has_intensity =
      std::any_of(cloud.points.begin(), cloud.points.end(), [](const Point3& p) { return p.intensity.has_value(); });
  std::ostringstream hdr;
  hdr << "# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\n";
  if (has_intensity) {
    hdr << "FIELDS x y z intensity\nSIZE " << (binary ? "4 4 4 4" : "8 8 8 8") << "\nTYPE F F F F\nCOUNT 1 1 1 1\n";
  } else {
    hdr << "FIELDS x y z\nSIZE " << (binary ? "4 4 4" : "8 8 8") << "\nTYPE F F F\nCOUNT 1 1 1\n";
  }
  hdr << "WIDTH " << cloud.size() << "\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS " << cloud.size() << "\nDATA "
      << (binary ? "binary" : "ascii") << "\n";
  ByteWriter w;
  const auto header = hdr.str();
  w.put_bytes(std::as_bytes(std::span(header.data(), header.size())));
  if (binary) {
    for (const auto& p : cloud.points) {
      w.put(static_cast<float>(p.x));
      w.put(static_cast<float>(p.y));
      w.put(static_cast<float>(p.z));
      if (has_intensity) w.put(static_cast<float>(p.intensity.value_or(0.0)));
    }
    return w.take();
  }
  std::ostringstream body;
  body.precision(17);
  for (const auto& p : cloud.points) {
    body << p.x << ' ' << p.y << ' ' << p.z;
    if (has_intensity) body << ' ' << p.intensity.value_or(0.0);
    body << '\n';
  }
  const auto text = body.str();
  w.put_bytes(std::as_bytes(std::span(text.data(), text.size())));
  return w.take();
}

}  // namespace detail

/// Decodes an in-memory scan. Malformed input always raises a typed Error.
inline ScanReadResult parse_scan(std::span<const std::byte> data, ScanFileFormat format) {
  switch (format) {
    case ScanFileFormat::kitti_bin: return detail::parse_kitti(data);
    case ScanFileFormat::beam_labeled_bin: return detail::parse_bfrg(data);
    case ScanFileFormat::pcd_ascii: return detail::parse_pcd(data, false);
    case ScanFileFormat::pcd_binary: return detail::parse_pcd(data, true);
  }
  throw Error(ErrorCode::invalid_argument, "unknown scan format");
}

inline std::vector<std::byte> encode_scan(const PointCloud& cloud, ScanFileFormat format,
                                          ScanWriteResult* result = nullptr) {
  ScanWriteResult res;
  std::vector<std::byte> bytes;
  switch (format) {
    case ScanFileFormat::kitti_bin: bytes = detail::encode_kitti(cloud); break;
    case ScanFileFormat::beam_labeled_bin: bytes = detail::encode_bfrg(cloud); break;
    case ScanFileFormat::pcd_ascii: bytes = detail::encode_pcd(cloud, false); break;
    case ScanFileFormat::pcd_binary: bytes = detail::encode_pcd(cloud, true); break;
  }
  res.labels_dropped = cloud.has_labels() && format != ScanFileFormat::beam_labeled_bin;
  if (result) *result = res;
  return bytes;
}

/// Extension first, then magic bytes. `.bin` holding a BFRG header is labeled.
inline ScanFileFormat detect_format(const std::filesystem::path& path, std::span<const std::byte> head) {
  const auto starts_with = [&](std::string_view s) {
    return head.size() >= s.size() && std::equal(s.begin(), s.end(), reinterpret_cast<const char*>(head.data()));
  };
  const bool bfrg_magic = starts_with("BFRG");
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".bfrg" || bfrg_magic) return ScanFileFormat::beam_labeled_bin;
  if (ext == ".pcd" || starts_with("# .PCD") || starts_with("VERSION") || starts_with("FIELDS")) {
    const std::string_view text(reinterpret_cast<const char*>(head.data()), head.size());
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto eol = text.find('\n', pos);
      if (eol == std::string_view::npos) eol = text.size();
      const auto line = text.substr(pos, eol - pos);
      if (line.starts_with("DATA")) {
        return line.find("binary") != std::string_view::npos ? ScanFileFormat::pcd_binary : ScanFileFormat::pcd_ascii;
      }
      pos = eol + 1;
    }
    throw Error(ErrorCode::malformed_header, "PCD header has no DATA line");
  }
  if (ext == ".bin") return ScanFileFormat::kitti_bin;
  throw Error(ErrorCode::unsupported_layout, "cannot determine scan format of " + path.string());
}

inline ScanFileFormat detect_format(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  return detect_format(path, bytes);
}

inline ScanReadResult read_scan(const std::filesystem::path& path, ScanFileFormat format) {
  const auto bytes = detail::read_file_bytes(path);
  auto result = parse_scan(bytes, format);
  result.cloud.frame_id = path.stem().string();
  return result;
}

inline ScanReadResult read_scan(const std::filesystem::path& path) {
  const auto bytes = detail::read_file_bytes(path);
  auto result = parse_scan(bytes, detect_format(path, bytes));
  result.cloud.frame_id = path.stem().string();
  return result;
}

inline ScanWriteResult write_scan(const PointCloud& cloud, const std::filesystem::path& path, ScanFileFormat format) {
  ScanWriteResult result;
  const auto bytes = encode_scan(cloud, format, &result);
  detail::write_file_bytes(path, bytes);
  return result;
}

}  // namespace beamforge
