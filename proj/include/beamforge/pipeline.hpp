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

#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstddef>
#include <cstring>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "beamforge/beam_model.hpp"
#include "beamforge/detail/bytes.hpp"
#include "beamforge/detail/hash.hpp"
#include "beamforge/detail/parallel.hpp"
#include "beamforge/error.hpp"
#include "beamforge/io.hpp"
#include "beamforge/profile.hpp"
#include "beamforge/resampler.hpp"

extern char** environ;

namespace beamforge {

namespace fs = std::filesystem;

struct StageSpec {
  std::size_t beam_target = 0;
  /// Whether points per beam are also reduced to the target density.
  bool align_points = false;
  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

/// Beam-halving schedule. Stage j (0-based) trains student D_{j+1} with D_j as teacher.
struct ProgressiveSchedule {
  SensorProfile source;
  SensorProfile target;
  std::size_t equivalent_beams = 0;
  std::size_t n = 0;
  std::vector<StageSpec> stages;
};

/// n = floor(log2(B_s / B_t')); intermediate stages halve the source beam
/// count, and the last stage lands on B_t' exactly with point alignment.
inline ProgressiveSchedule plan_schedule(const SensorProfile& source, const SensorProfile& target) {
  source.validate();
  target.validate();
  ProgressiveSchedule s;
  s.source = source;
  s.target = target;
  s.equivalent_beams = equivalent_beams(source, target);
  if (s.equivalent_beams > source.beam_count) {
    throw Error(ErrorCode::upsample_requested, "equivalent target beams " + std::to_string(s.equivalent_beams) +
                                                   " exceed source beams " + std::to_string(source.beam_count));
  }
  if (s.equivalent_beams == 0) throw Error(ErrorCode::invalid_argument, "equivalent target beams round to zero");
  while ((s.equivalent_beams << (s.n + 1)) <= source.beam_count) ++s.n;
  for (std::size_t j = 0; j < s.n; ++j) {
    const std::size_t halved = static_cast<std::size_t>(
        round_count(static_cast<double>(source.beam_count) / static_cast<double>(std::size_t{1} << (j + 1))));
    const bool last = j + 1 == s.n;
    s.stages.push_back({last ? s.equivalent_beams : halved, last});
  }
  return s;
}

inline ResamplePlan stage_plan(const ProgressiveSchedule& s, std::size_t stage) {
  const auto& st = s.stages.at(stage);
  return make_plan(s.source, s.target, st.beam_target, st.align_points ? point_keep_ratio(s.source, s.target) : 1.0);
}

/// "n=2 stages=32,16*" with '*' marking the point-aligned stage.
inline std::string describe_schedule(const ProgressiveSchedule& s) {
  std::string out = "n=" + std::to_string(s.n) + " stages=";
  for (std::size_t j = 0; j < s.stages.size(); ++j) {
    if (j) out += ',';
    out += std::to_string(s.stages[j].beam_target);
    if (s.stages[j].align_points) out += '*';
  }
  return out;
}

enum class StageStatus { pending, generated, trained };

constexpr std::string_view to_string(StageStatus s) noexcept {
  switch (s) {
    case StageStatus::pending: return "pending";
    case StageStatus::generated: return "generated";
    case StageStatus::trained: return "trained";
  }
  return "pending";
}

inline StageStatus parse_stage_status(std::string_view s) {
  if (s == "pending") return StageStatus::pending;
  if (s == "generated") return StageStatus::generated;
  if (s == "trained") return StageStatus::trained;
  throw Error(ErrorCode::config_error, "unknown stage status '" + std::string(s) + "'");
}

struct StageManifest {
  std::size_t stage = 0;
  std::size_t beam_target = 0;
  bool align_points = false;
  double keep_ratio = 1.0;
  std::string input_dir;
  std::string output_dir;
  std::string input_hash;
  std::string output_hash;
  std::string teacher_ref;
  std::string student_ref;
  StageStatus status = StageStatus::pending;
};

inline constexpr std::string_view kManifestFormat = "beamforge.stage_manifest";
inline constexpr int kManifestVersion = 1;
inline constexpr std::string_view kManifestName = "manifest.json";

inline nlohmann::json manifest_to_json(const StageManifest& m) {
  return {{"format", kManifestFormat},  {"version", kManifestVersion},   {"stage", m.stage},
          {"beam_target", m.beam_target}, {"align_points", m.align_points}, {"keep_ratio", m.keep_ratio},
          {"input_dir", m.input_dir},   {"output_dir", m.output_dir},   {"input_hash", m.input_hash},
          {"output_hash", m.output_hash}, {"teacher_ref", m.teacher_ref}, {"student_ref", m.student_ref},
          {"status", to_string(m.status)}};
}

inline StageManifest manifest_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kManifestFormat) throw Error(ErrorCode::config_error, "not a manifest");
    if (j.at("version").get<int>() != kManifestVersion) throw Error(ErrorCode::unsupported_version, "manifest");
    StageManifest m;
    m.stage = j.at("stage").get<std::size_t>();
    m.beam_target = j.at("beam_target").get<std::size_t>();
    m.align_points = j.at("align_points").get<bool>();
    m.keep_ratio = j.at("keep_ratio").get<double>();
    m.input_dir = j.at("input_dir").get<std::string>();
    m.output_dir = j.at("output_dir").get<std::string>();
    m.input_hash = j.at("input_hash").get<std::string>();
    m.output_hash = j.at("output_hash").get<std::string>();
    m.teacher_ref = j.at("teacher_ref").get<std::string>();
    m.student_ref = j.at("student_ref").get<std::string>();
    m.status = parse_stage_status(j.at("status").get<std::string>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, std::string("manifest: ") + e.what());
  }
}

inline fs::path stage_dir(const fs::path& work_dir, std::size_t stage) {
  return work_dir / ("stage_" + std::to_string(stage));
}
inline fs::path stage_data_dir(const fs::path& work_dir, std::size_t stage) { return stage_dir(work_dir, stage) / "data"; }
inline fs::path stage_manifest_path(const fs::path& work_dir, std::size_t stage) {
  return stage_dir(work_dir, stage) / kManifestName;
}
inline std::string stage_student_ref(const fs::path& work_dir, std::size_t stage) {
  return (work_dir / "models" / ("student_" + std::to_string(stage))).string();
}

inline void write_manifest(const StageManifest& m, const fs::path& path) {
  fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path).concat(".tmp");
  detail::write_file_text(tmp, manifest_to_json(m).dump(2) + "\n");
  fs::rename(tmp, path);
}

inline std::optional<StageManifest> load_manifest(const fs::path& path) {
  if (!fs::is_regular_file(path)) return std::nullopt;
  try {
    return manifest_from_json(nlohmann::json::parse(detail::read_file_text(path)));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::config_error, path.string() + ": " + e.what());
  }
}

inline bool is_scan_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".bin" || ext == ".bfrg" || ext == ".pcd";
}

/// Scan files directly inside dir, sorted by name.
inline std::vector<fs::path> list_scans(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::io_failure, "dataset directory " + dir.string() + " not found");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && is_scan_file(e.path())) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Content hash over file names and bytes of every scan in dir.
inline std::string dataset_hash(const fs::path& dir) {
  detail::Sha256 h;
  for (const auto& p : list_scans(dir)) {
    const auto bytes = detail::read_file_bytes(p);
    h.update(p.filename().string()).update(std::string_view("\0", 1));
    h.update(std::to_string(bytes.size())).update(std::string_view("\0", 1));
    h.update(bytes);
  }
  return h.hex();
}

struct MaterializeOptions {
  std::size_t threads = 1;
  /// Refuse to cluster: every scan must already carry labels for the source beams.
  bool require_labels = false;
  ClusterConfig cluster;
};

/// Beam model for a scan: its own labels when they match the source beam
/// count, otherwise K-means on its zeniths.
inline BeamModel beam_model_for(const PointCloud& cloud, std::size_t source_beams, const MaterializeOptions& opts) {
  if (cloud.has_labels() && cloud.beam_count == source_beams) {
    try {
      return model_from_labels(cloud);
    } catch (const Error&) {
      if (opts.require_labels) throw;
    }
  } else if (opts.require_labels) {
    throw Error(ErrorCode::model_missing, "scan '" + cloud.frame_id + "' has no beam labels for " +
                                              std::to_string(source_beams) + " beams");
  }
  auto cfg = opts.cluster;
  cfg.beam_count = source_beams;
  return cluster_cloud(cloud, cfg);
}

/// Reads, filters, labels and resamples one scan.
inline PointCloud resample_scan_file(const fs::path& path, const ResamplePlan& plan, const MaterializeOptions& opts) {
  auto cloud = read_scan(path).cloud;
  drop_degenerate(cloud);
  const auto model = beam_model_for(cloud, plan.source.beam_count, opts);
  return apply_resample(cloud, model, plan);
}

/// Generates stage `stage` of the schedule from input_dir into work_dir. A
/// stage whose manifest already matches the input, parameters and on-disk
/// outputs is left untouched.
inline StageManifest materialize_stage(const ProgressiveSchedule& schedule, std::size_t stage, const fs::path& input_dir,
                                       const fs::path& work_dir, const MaterializeOptions& opts = {}) {
  if (stage >= schedule.stages.size()) throw Error(ErrorCode::invalid_argument, "stage index out of range");
  const auto plan = stage_plan(schedule, stage);
  const auto data_dir = stage_data_dir(work_dir, stage);
  const auto manifest_path = stage_manifest_path(work_dir, stage);
  const auto input_hash = dataset_hash(input_dir);

  const auto existing = load_manifest(manifest_path);
  if (existing && existing->status != StageStatus::pending && existing->input_hash == input_hash &&
      existing->beam_target == plan.equivalent_beams && existing->keep_ratio == plan.per_beam_keep_ratio &&
      fs::is_directory(data_dir) && existing->output_hash == dataset_hash(data_dir)) {
    return *existing;
  }

  fs::create_directories(data_dir);
  for (const auto& old : list_scans(data_dir)) fs::remove(old);
  const auto scans = list_scans(input_dir);
  detail::parallel_for(scans.size(), opts.threads, [&](std::size_t i) {
    const auto out = resample_scan_file(scans[i], plan, opts);
    write_scan(out, data_dir / (scans[i].stem().string() + ".bfrg"), ScanFileFormat::beam_labeled_bin);
  });

  StageManifest m;
  m.stage = stage;
  m.beam_target = plan.equivalent_beams;
  m.align_points = schedule.stages[stage].align_points;
  m.keep_ratio = plan.per_beam_keep_ratio;
  m.input_dir = fs::absolute(input_dir).lexically_normal().string();
  m.output_dir = fs::absolute(data_dir).lexically_normal().string();
  m.input_hash = input_hash;
  m.output_hash = dataset_hash(data_dir);
  m.status = StageStatus::generated;
  if (existing) {
    m.teacher_ref = existing->teacher_ref;
    m.student_ref = existing->student_ref;
  }
  write_manifest(m, manifest_path);
  return m;
}

struct HookInvocation {
  std::size_t stage = 0;
  std::string teacher_ref;
  std::string data_dir;
  std::string out_ref;
};

/// Returns the trainer's exit status; 0 is success.
using TrainerHook = std::function<int(const HookInvocation&)>;

/// Runs `<executable> --teacher <ref> --data <dir> --out <ref>` and waits for it.
class ExecutableHook {
 public:
  explicit ExecutableHook(std::string executable) : executable_(std::move(executable)) {}

  int operator()(const HookInvocation& call) const {
    std::vector<std::string> args{executable_, "--teacher", call.teacher_ref, "--data", call.data_dir,
                                  "--out",     call.out_ref};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    const int rc = posix_spawnp(&pid, executable_.c_str(), nullptr, nullptr, argv.data(), environ);
    if (rc != 0) throw Error(ErrorCode::hook_failure, "cannot start hook '" + executable_ + "': " + std::strerror(rc));
    int status = 0;
    while (waitpid(pid, &status, 0) < 0) {
      if (errno != EINTR) throw Error(ErrorCode::hook_failure, "waitpid failed for hook");
    }
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return 1;
  }

 private:
  std::string executable_;
};

struct RunOptions {
  MaterializeOptions materialize;
  /// When false, a trained stage whose hashes no longer match raises
  /// stale-manifest instead of being regenerated.
  bool regenerate_stale = true;
};

struct StageState {
  std::size_t stage = 0;
  std::optional<StageManifest> manifest;
  bool stale = false;
};

/// Manifest of every scheduled stage plus whether its recorded hashes still
/// match the input dataset and its generated data.
inline std::vector<StageState> schedule_status(const ProgressiveSchedule& schedule, const fs::path& input_dir,
                                               const fs::path& work_dir) {
  std::vector<StageState> out;
  const auto input_hash = fs::is_directory(input_dir) ? dataset_hash(input_dir) : std::string();
  for (std::size_t j = 0; j < schedule.stages.size(); ++j) {
    StageState st;
    st.stage = j;
    st.manifest = load_manifest(stage_manifest_path(work_dir, j));
    if (st.manifest && st.manifest->status != StageStatus::pending) {
      const auto data_dir = stage_data_dir(work_dir, j);
      st.stale = st.manifest->input_hash != input_hash || !fs::is_directory(data_dir) ||
                 st.manifest->output_hash != dataset_hash(data_dir);
    }
    out.push_back(std::move(st));
  }
  return out;
}

/// Drives the schedule: for each stage, materialize the pseudo low-beam data and
/// invoke the trainer with the previous stage's student as teacher. Fresh,
/// trained stages are skipped, so a rerun resumes after the last success.
/// Returns the final student reference (initial_model when n == 0).
inline std::string run_schedule(const ProgressiveSchedule& schedule, const fs::path& input_dir, const fs::path& work_dir,
                                const std::string& initial_model, const TrainerHook& hook, const RunOptions& opts = {}) {
  std::string teacher = initial_model;
  bool upstream_changed = false;
  for (std::size_t j = 0; j < schedule.stages.size(); ++j) {
    const auto manifest_path = stage_manifest_path(work_dir, j);
    const auto student = stage_student_ref(work_dir, j);
    const auto previous = load_manifest(manifest_path);
    if (previous && previous->status == StageStatus::trained && !upstream_changed) {
      const auto data_dir = stage_data_dir(work_dir, j);
      const bool fresh = previous->input_hash == dataset_hash(input_dir) && fs::is_directory(data_dir) &&
                         previous->output_hash == dataset_hash(data_dir) && previous->teacher_ref == teacher &&
                         previous->beam_target == schedule.stages[j].beam_target;
      if (fresh) {
        teacher = previous->student_ref;
        continue;
      }
      if (!opts.regenerate_stale) {
        throw Error(ErrorCode::stale_manifest, "stage " + std::to_string(j) + " no longer matches its inputs");
      }
    }

    auto m = materialize_stage(schedule, j, input_dir, work_dir, opts.materialize);
    m.teacher_ref = teacher;
    m.student_ref = student;
    m.status = StageStatus::generated;
    write_manifest(m, manifest_path);

    fs::create_directories(fs::path(student).parent_path());
    const int rc = hook(HookInvocation{j, teacher, m.output_dir, student});
    if (rc != 0) {
      throw Error(ErrorCode::hook_failure, "trainer hook exited with status " + std::to_string(rc) + " at stage " +
                                               std::to_string(j));
    }
    m.status = StageStatus::trained;
    write_manifest(m, manifest_path);
    teacher = student;
    upstream_changed = true;
  }
  return teacher;
}

}  // namespace beamforge
