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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "beamforge/beamforge.hpp"

namespace fs = std::filesystem;
using namespace beamforge;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kDataError = 2, kIoError = 3 };

struct GlobalOptions {
  std::string profile;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string format = "bfrg";
  bool verbose = false;
  bool deterministic = false;
};

class Output {
 public:
  explicit Output(const GlobalOptions& g) : g_(g), start_(std::chrono::steady_clock::now()) {}

  template <typename T>
  void kv(std::string_view key, const T& value) {
    std::cout << key << '=' << value << '\n';
  }
  void kv(std::string_view key, double value) {
    std::ostringstream s;
    s << std::setprecision(10) << value;
    std::cout << key << '=' << s.str() << '\n';
  }
  void line(std::string_view text) { std::cout << text << '\n'; }
  void summary(std::string_view text) { std::cout << "# " << text << '\n'; }
  void note(std::string_view text) {
    if (g_.verbose) std::cerr << text << '\n';
  }
  void timing() {
    if (g_.deterministic) return;
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << ms;
    std::cout << "elapsed_ms=" << s.str() << '\n';
  }

 private:
  const GlobalOptions& g_;
  std::chrono::steady_clock::time_point start_;
};

ScanFileFormat output_format(const GlobalOptions& g) {
  const auto f = parse_format_name(g.format);
  if (!f) throw Error(ErrorCode::invalid_argument, "unknown --format '" + g.format + "' (kitti|pcd-ascii|pcd-binary|bfrg)");
  return *f;
}

std::string extension_for(ScanFileFormat f) {
  switch (f) {
    case ScanFileFormat::kitti_bin: return ".bin";
    case ScanFileFormat::pcd_ascii:
    case ScanFileFormat::pcd_binary: return ".pcd";
    case ScanFileFormat::beam_labeled_bin: return ".bfrg";
  }
  return ".bin";
}

PointCloud load_filtered(const fs::path& path, Output& out) {
  auto result = read_scan(path);
  const auto degenerate = drop_degenerate(result.cloud);
  out.note(path.string() + ": " + std::to_string(result.rejected_non_finite) + " non-finite, " +
           std::to_string(degenerate) + " on-axis points dropped");
  return std::move(result.cloud);
}

void write_output_scan(const PointCloud& cloud, const fs::path& path, ScanFileFormat format, Output& out) {
  const auto res = write_scan(cloud, path, format);
  if (res.labels_dropped) out.note("warning: " + path.string() + " cannot store beam labels; labels dropped");
}

constexpr const char* kScanFormatsHelp =
    "Scan formats (detected from extension and magic bytes):\n"
    "  .bin   KITTI velodyne: float32 LE x y z intensity records, 16 bytes each\n"
    "  .pcd   PCD v0.7, FIELDS x y z [intensity], DATA ascii|binary\n"
    "  .bfrg  BeamLabeledBin: 'BFRG' u16 version, u64 points, u16 beams, u16 flags,\n"
    "         then per point float32 x y z intensity + u16 beam id (little-endian)\n";

constexpr const char* kProfileHelp =
    "Profiles: built-in waymo | kitti | nuscenes, a JSON file path, or <name>.json under\n"
    "$BEAMFORGE_PROFILE_DIR. JSON: {\"name\":..,\"beam_count\":N,\"vfov_deg\":[lo,hi],\"points_per_beam\":P}\n";

constexpr const char* kTensorHelp =
    "Tensor tiles (little-endian):\n"
    "  feature map: 'BFFM' u16 version, u32 H, u32 W, u32 C, f32 cell_size, f32 origin_x,\n"
    "               f32 origin_y, f32 values[H*W*C] channel-last\n"
    "  ROI set:     'BFRS' u16 version, u32 count, u32 pooled_size, u32 flags,\n"
    "               per ROI f32 x0 y0 x1 y1 (cell coordinates) + u32 tag (1 positive)\n"
    "  boxes JSON:  [{\"cx\":..,\"cy\":..,\"dx\":..,\"dy\":..,\"yaw\":..}, ...] in meters\n";

constexpr const char* kRangeHelp =
    "Range tile (little-endian): 'BFRI' u16 version, u32 rows, u32 cols, f64 row zenith[rows],\n"
    "f32 range[rows*cols] row-major, validity mask 1 bit per cell LSB-first. Column 0 starts at azimuth -pi.\n";

std::string profile_or_global(const std::string& specific, const GlobalOptions& g, const char* what) {
  if (!specific.empty()) return specific;
  if (!g.profile.empty()) return g.profile;
  throw Error(ErrorCode::invalid_argument, std::string("missing ") + what);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"beamforge: beam clustering, pseudo low-beam resampling, progressive transfer planning and BEV mimic loss"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--profile", g.profile, "Default sensor profile (name or path)");
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads for batch operations")->check(CLI::PositiveNumber);
  app.add_option("--format", g.format, "Output scan format: kitti | pcd-ascii | pcd-binary | bfrg");
  app.add_flag("--verbose", g.verbose, "Diagnostics on stderr");
  app.add_flag("--deterministic", g.deterministic, "Suppress timing lines");
  app.footer(std::string(kScanFormatsHelp) + kProfileHelp);

  // cluster
  auto* cluster = app.add_subcommand("cluster", "Recover beam labels with K-means on zenith angles");
  std::string cl_scan, cl_model_out, cl_scan_out;
  std::size_t cl_beams = 0, cl_iters = 100;
  double cl_trim = 0.0, cl_tol = 1e-6;
  cluster->add_option("scan", cl_scan, "Input scan")->required();
  cluster->add_option("--beams", cl_beams, "Beam count of the sensor")->required()->check(CLI::PositiveNumber);
  cluster->add_option("--model-out", cl_model_out, "Beam model JSON (default <stem>.beams.json beside the scan)");
  cluster->add_option("--scan-out", cl_scan_out, "Labeled scan (default <stem>.labeled.bfrg beside the scan)");
  cluster->add_option("--trim", cl_trim, "Per-tail quantile excluded from center estimation, e.g. 0.001");
  cluster->add_option("--max-iters", cl_iters, "Iteration cap");
  cluster->add_option("--tol", cl_tol, "Convergence tolerance on center movement, radians");
  cluster->footer(std::string(kScanFormatsHelp) +
                  "Beam model JSON: {format, version, beam_count, centers_deg[], per_beam_counts[], vfov_deg[2],\n"
                  "mean_points_per_beam, iterations}\n");

  // resample
  auto* resample = app.add_subcommand("resample", "Generate pseudo low-beam scans matching a target sensor");
  std::string rs_input, rs_out, rs_src, rs_tgt;
  resample->add_option("input", rs_input, "Scan file or directory of scans")->required();
  resample->add_option("--source-profile", rs_src, "Source sensor profile (defaults to --profile)");
  resample->add_option("--target-profile", rs_tgt, "Target sensor profile")->required();
  resample->add_option("--out", rs_out, "Output file, or directory for batch input")->required();
  resample->footer(std::string(kScanFormatsHelp) + kProfileHelp +
                   "Scans without beam labels are clustered with the source beam count first.\n");

  // plan / materialize / run / status share schedule options
  std::string pl_src, pl_tgt, pl_data, pl_work, pl_hook, pl_initial;
  std::size_t pl_stage = 0;
  bool pl_require_labels = false;
  auto add_schedule_opts = [&](CLI::App* sub) {
    sub->add_option("--source-profile", pl_src, "Source sensor profile (defaults to --profile)");
    sub->add_option("--target-profile", pl_tgt, "Target sensor profile")->required();
    sub->footer(std::string(kProfileHelp) +
                "Work layout: <work>/stage_<j>/data/*.bfrg and <work>/stage_<j>/manifest.json (JSON, versioned,\n"
                "content-hashed); student models are referenced as <work>/models/student_<j>.\n");
  };
  auto* plan = app.add_subcommand("plan", "Print the progressive beam-halving schedule");
  add_schedule_opts(plan);
  auto* materialize = app.add_subcommand("materialize", "Generate one stage's pseudo low-beam dataset");
  add_schedule_opts(materialize);
  materialize->add_option("--data", pl_data, "Source dataset directory")->required();
  materialize->add_option("--work", pl_work, "Work directory")->required();
  materialize->add_option("--stage", pl_stage, "Stage index, 0-based")->required();
  materialize->add_flag("--require-labels", pl_require_labels, "Fail instead of clustering unlabeled scans");
  auto* run = app.add_subcommand("run", "Run every stage, invoking the trainer hook per stage");
  add_schedule_opts(run);
  run->add_option("--data", pl_data, "Source dataset directory")->required();
  run->add_option("--work", pl_work, "Work directory")->required();
  run->add_option("--hook", pl_hook, "Trainer executable: hook --teacher <ref> --data <dir> --out <ref>")->required();
  run->add_option("--initial-model", pl_initial, "Reference of the detector pretrained on source data")->required();
  run->add_flag("--require-labels", pl_require_labels, "Fail instead of clustering unlabeled scans");
  auto* status = app.add_subcommand("status", "Show per-stage manifest status");
  add_schedule_opts(status);
  status->add_option("--data", pl_data, "Source dataset directory")->required();
  status->add_option("--work", pl_work, "Work directory")->required();

  // mimic-loss
  auto* mimic = app.add_subcommand("mimic-loss", "ROI-pooled BEV mimic loss and its gradient");
  std::string ml_student, ml_teacher, ml_rois, ml_boxes, ml_grad_out, ml_rois_out;
  double ml_lambda = 1.0, ml_lgt = 0.0;
  std::size_t ml_pooled = 7;
  mimic->add_option("--student", ml_student, "Student feature tile")->required();
  mimic->add_option("--teacher", ml_teacher, "Teacher feature tile")->required();
  auto* rois_opt = mimic->add_option("--rois", ml_rois, "ROI tile");
  auto* boxes_opt = mimic->add_option("--boxes", ml_boxes, "Ground-truth BEV boxes JSON; ROIs generated with --seed");
  rois_opt->excludes(boxes_opt);
  mimic->add_option("--rois-out", ml_rois_out, "Write the generated ROI tile here");
  mimic->add_option("--pooled-size", ml_pooled, "Samples per ROI side when generating ROIs");
  mimic->add_option("--grad-out", ml_grad_out, "Write d loss / d student as a feature tile");
  mimic->add_option("--lambda", ml_lambda, "Mimic loss weight");
  mimic->add_option("--l-gt", ml_lgt, "Detection loss supplied by the trainer");
  mimic->footer(kTensorHelp);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Synthesize a spinning-LiDAR scan with ground-truth beams");
  std::string sim_preset, sim_config, sim_out, sim_truth;
  simulate->add_option("--preset", sim_preset, "waymo | kitti | nuscenes");
  simulate->add_option("--config", sim_config, "Simulator config JSON");
  simulate->add_option("--out", sim_out, "Output scan")->required();
  simulate->add_option("--truth-out", sim_truth, "Ground-truth beam model JSON");
  simulate->footer(std::string(kScanFormatsHelp) +
                   "Simulator config JSON (angles in degrees): preset, beam_angles_deg | beam_count + vfov_deg +\n"
                   "spacing (uniform|perturbed) + pattern_sigma_deg, points_per_beam, zenith_noise_deg,\n"
                   "azimuth_jitter_deg, dropout_rate, seed, scene {ground_height, boxes [{min:[x,y,z], max:[x,y,z]}]}\n");

  // range-image
  auto* rimg = app.add_subcommand("range-image", "Range image projection and bilinear upsampling");
  rimg->require_subcommand(1);
  rimg->footer(kRangeHelp);
  std::string ri_scan, ri_in, ri_out, ri_pgm, ri_ref;
  std::size_t ri_beams = 0, ri_width = kDefaultAzimuthBins, ri_rows = 0;
  auto* ri_project = rimg->add_subcommand("project", "Scan -> range tile");
  ri_project->add_option("--scan", ri_scan, "Input scan (labeled, or clustered with --beams)")->required();
  ri_project->add_option("--beams", ri_beams, "Beam count for clustering unlabeled scans");
  ri_project->add_option("--width", ri_width, "Azimuth bins")->check(CLI::Range(8, 1 << 20));
  ri_project->add_option("--out", ri_out, "Range tile")->required();
  ri_project->add_option("--pgm", ri_pgm, "Also write a grayscale PGM");
  ri_project->footer(kRangeHelp);
  auto* ri_upsample = rimg->add_subcommand("upsample", "Bilinear row upsampling");
  ri_upsample->add_option("--in", ri_in, "Input range tile")->required();
  ri_upsample->add_option("--rows", ri_rows, "Target row count")->required();
  ri_upsample->add_option("--out", ri_out, "Output range tile")->required();
  ri_upsample->add_option("--reference", ri_ref, "Higher-resolution tile of the same scene for error metrics");
  ri_upsample->add_option("--pgm", ri_pgm, "Also write a grayscale PGM");
  ri_upsample->footer(kRangeHelp);
  auto* ri_unproject = rimg->add_subcommand("unproject", "Range tile -> labeled scan");
  ri_unproject->add_option("--in", ri_in, "Input range tile")->required();
  ri_unproject->add_option("--out", ri_out, "Output scan")->required();
  ri_unproject->footer(std::string(kRangeHelp) + kScanFormatsHelp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  Output out(g);
  try {
    if (cluster->parsed()) {
      const fs::path scan(cl_scan);
      auto cloud = load_filtered(scan, out);
      ClusterConfig cfg;
      cfg.beam_count = cl_beams;
      cfg.max_iters = cl_iters;
      cfg.tol = cl_tol;
      cfg.trim_fraction = cl_trim;
      const auto model = cluster_cloud(cloud, cfg);
      const fs::path model_path =
          cl_model_out.empty() ? scan.parent_path() / (scan.stem().string() + ".beams.json") : fs::path(cl_model_out);
      const fs::path scan_path =
          cl_scan_out.empty() ? scan.parent_path() / (scan.stem().string() + ".labeled.bfrg") : fs::path(cl_scan_out);
      detail::write_file_text(model_path, beam_model_to_json(model).dump(2) + "\n");
      cloud.beam_labels = model.assignments;
      cloud.beam_count = model.beam_count();
      write_output_scan(cloud, scan_path, ScanFileFormat::beam_labeled_bin, out);
      const auto st = sensor_stats(model);
      out.kv("points", cloud.size());
      out.kv("beams", st.beam_count);
      out.kv("vfov_min_deg", rad2deg(st.vfov_min));
      out.kv("vfov_max_deg", rad2deg(st.vfov_max));
      out.kv("mean_points_per_beam", st.mean_points_per_beam);
      out.kv("iterations", model.iterations);
      out.kv("model", model_path.string());
      out.kv("scan", scan_path.string());
      std::ostringstream s;
      s << std::fixed << std::setprecision(2) << "VFOV [" << rad2deg(st.vfov_min) << ", " << rad2deg(st.vfov_max)
        << "] deg, " << st.mean_points_per_beam << " points per beam";
      out.summary(s.str());
    } else if (resample->parsed()) {
      const auto source = resolve_profile(profile_or_global(rs_src, g, "--source-profile"));
      const auto target = resolve_profile(rs_tgt);
      const auto plan = plan_resample(source, target);
      const auto format = output_format(g);
      MaterializeOptions mopts;
      mopts.threads = g.threads;
      out.kv("equivalent_beams", plan.equivalent_beams);
      out.kv("keep_ratio", plan.per_beam_keep_ratio);
      const fs::path input(rs_input);
      std::vector<std::pair<fs::path, fs::path>> jobs;
      if (fs::is_directory(input)) {
        fs::create_directories(rs_out);
        for (const auto& p : list_scans(input)) jobs.emplace_back(p, fs::path(rs_out) / (p.stem().string() + extension_for(format)));
      } else {
        jobs.emplace_back(input, fs::path(rs_out));
      }
      std::vector<std::size_t> in_points(jobs.size()), out_points(jobs.size()), out_beams(jobs.size());
      detail::parallel_for(jobs.size(), g.threads, [&](std::size_t i) {
        auto cloud = read_scan(jobs[i].first).cloud;
        drop_degenerate(cloud);
        in_points[i] = cloud.size();
        const auto model = beam_model_for(cloud, source.beam_count, mopts);
        const auto res = apply_resample(cloud, model, plan);
        out_points[i] = res.size();
        out_beams[i] = res.beam_count;
        write_scan(res, jobs[i].second, format);
      });
      std::size_t total_in = 0, total_out = 0;
      for (std::size_t i = 0; i < jobs.size(); ++i) {
        total_in += in_points[i];
        total_out += out_points[i];
      }
      out.kv("scans", jobs.size());
      out.kv("points_in", total_in);
      out.kv("points_out", total_out);
      out.kv("beams_out", plan.equivalent_beams);
      const double mean_ppb = jobs.empty() ? 0.0
                                           : static_cast<double>(total_out) /
                                                 static_cast<double>(jobs.size() * plan.equivalent_beams);
      out.kv("mean_points_per_beam", mean_ppb);
      out.line("equivalent beams: " + std::to_string(plan.equivalent_beams));
    } else if (plan->parsed() || materialize->parsed() || run->parsed() || status->parsed()) {
      const auto source = resolve_profile(profile_or_global(pl_src, g, "--source-profile"));
      const auto target = resolve_profile(pl_tgt);
      const auto schedule = plan_schedule(source, target);
      MaterializeOptions mopts;
      mopts.threads = g.threads;
      mopts.require_labels = pl_require_labels;
      if (plan->parsed()) {
        out.kv("equivalent_beams", schedule.equivalent_beams);
        out.line(describe_schedule(schedule));
      } else if (materialize->parsed()) {
        const auto m = materialize_stage(schedule, pl_stage, pl_data, pl_work, mopts);
        out.kv("stage", m.stage);
        out.kv("beam_target", m.beam_target);
        out.kv("align_points", m.align_points ? 1 : 0);
        out.kv("keep_ratio", m.keep_ratio);
        out.kv("status", to_string(m.status));
        out.kv("output_dir", m.output_dir);
        out.kv("output_hash", m.output_hash);
      } else if (run->parsed()) {
        RunOptions ropts;
        ropts.materialize = mopts;
        const auto final_ref = run_schedule(schedule, pl_data, pl_work, pl_initial, ExecutableHook(pl_hook), ropts);
        out.line(describe_schedule(schedule));
        out.kv("final_model", final_ref);
      } else {
        out.line(describe_schedule(schedule));
        for (const auto& st : schedule_status(schedule, pl_data, pl_work)) {
          std::ostringstream s;
          s << "stage=" << st.stage << " beams=" << schedule.stages[st.stage].beam_target
            << " status=" << (st.manifest ? to_string(st.manifest->status) : to_string(StageStatus::pending))
            << " stale=" << (st.stale ? 1 : 0);
          if (st.manifest && !st.manifest->student_ref.empty()) s << " student=" << st.manifest->student_ref;
          out.line(s.str());
        }
      }
    } else if (mimic->parsed()) {
      const auto student = read_feature_map(ml_student);
      const auto teacher = read_feature_map(ml_teacher);
      RoiSet rois;
      if (!ml_rois.empty()) {
        rois = read_roi_set(ml_rois);
      } else {
        std::vector<BevBox> boxes;
        if (!ml_boxes.empty()) {
          try {
            for (const auto& b : nlohmann::json::parse(detail::read_file_text(ml_boxes))) {
              boxes.push_back({b.at("cx").get<double>(), b.at("cy").get<double>(), b.at("dx").get<double>(),
                               b.at("dy").get<double>(), b.value("yaw", 0.0)});
            }
          } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::config_error, std::string("boxes: ") + e.what());
          }
        }
        RoiConfig rc;
        rc.pooled_size = ml_pooled;
        // Quantize to the tile precision so --rois-out reproduces this loss.
        rois = decode_roi_set(encode_roi_set(generate_rois(boxes, grid_of(student), g.seed, rc)));
        if (!ml_rois_out.empty()) write_roi_set(rois, ml_rois_out);
      }
      const auto res = mimic_loss(student, teacher, rois);
      out.kv("rois", rois.rois.size());
      out.kv("positive_rois", rois.positives());
      out.kv("negative_rois", rois.negatives());
      out.kv("loss", res.loss);
      out.kv("total_loss", total_loss(ml_lgt, res.loss, ml_lambda));
      if (!ml_grad_out.empty()) {
        BevFeatureMap grad = student;
        grad.values = res.grad;
        write_feature_map(grad, ml_grad_out);
        out.kv("grad", ml_grad_out);
      }
    } else if (simulate->parsed()) {
      SimConfig cfg;
      if (!sim_config.empty()) {
        cfg = load_sim_config(sim_config);
      } else {
        const std::string name = sim_preset.empty() ? g.profile : sim_preset;
        const auto p = resolve_profile(name.empty() ? "kitti" : name);
        cfg = sim_config_for(p);
      }
      if (app.get_option("--seed")->count() > 0) cfg.seed = g.seed;
      cfg.threads = g.threads;
      const auto res = simulate_scan(cfg);
      write_output_scan(res.cloud, sim_out, output_format(g), out);
      if (!sim_truth.empty()) detail::write_file_text(sim_truth, beam_model_to_json(res.truth).dump(2) + "\n");
      out.kv("points", res.cloud.size());
      out.kv("beams", res.truth.beam_count());
      out.kv("no_hit", res.no_hit);
      out.kv("dropped", res.dropped);
      out.kv("mean_points_per_beam", sensor_stats(res.truth).mean_points_per_beam);
    } else if (ri_project->parsed()) {
      auto cloud = load_filtered(ri_scan, out);
      BeamModel model;
      if (cloud.has_labels()) {
        model = model_from_labels(cloud);
      } else {
        if (ri_beams == 0) throw Error(ErrorCode::missing_beam_labels, "unlabeled scan: pass --beams to cluster it");
        ClusterConfig cfg;
        cfg.beam_count = ri_beams;
        model = cluster_cloud(cloud, cfg);
      }
      const auto img = project(cloud, model, ri_width);
      write_range_image(img, ri_out);
      if (!ri_pgm.empty()) write_range_image_pgm(img, ri_pgm);
      out.kv("rows", img.rows);
      out.kv("cols", img.cols);
      out.kv("valid_cells", img.valid_count());
    } else if (ri_upsample->parsed()) {
      const auto img = read_range_image(ri_in);
      UpsampleTrace trace;
      const auto up = upsample_bilinear(img, ri_rows, &trace);
      write_range_image(up, ri_out);
      if (!ri_pgm.empty()) write_range_image_pgm(up, ri_pgm);
      out.kv("rows", up.rows);
      out.kv("cols", up.cols);
      out.kv("valid_cells", up.valid_count());
      if (!ri_ref.empty()) {
        const auto ref = read_range_image(ri_ref);
        if (ref.cols != up.cols) throw Error(ErrorCode::shape_mismatch, "reference tile has a different width");
        // Reference value: same column, the reference row nearest in zenith.
        const auto rep = score_upsample(up, trace, [&](double zenith, double, std::size_t, std::size_t c)
                                                       -> std::optional<double> {
          const auto row = detail::nearest_center(ref.row_angles, zenith);
          if (!ref.is_valid(row, c)) return std::nullopt;
          return ref.range(row, c);
        });
        out.kv("compared_cells", rep.compared_cells);
        out.kv("mean_abs_error", rep.mean_abs_error);
        out.kv("edge_cells", rep.edge_cells);
        out.kv("edge_mean_abs_error", rep.edge_mean_abs_error);
        out.kv("edge_max_abs_error", rep.edge_max_abs_error);
        out.kv("edge_cells_over_1m", rep.edge_cells_over_1m);
      }
    } else if (ri_unproject->parsed()) {
      const auto img = read_range_image(ri_in);
      const auto cloud = unproject(img);
      write_output_scan(cloud, ri_out, output_format(g), out);
      out.kv("points", cloud.size());
    }
    out.timing();
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::io_failure ? kIoError : kDataError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIoError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kOk;
}
