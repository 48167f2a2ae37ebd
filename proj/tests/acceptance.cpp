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

// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>

#include "beamforge/beamforge.hpp"
#include "loss_oracle.hpp"
#include "test_util.hpp"

namespace bf = beamforge;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kClusterAccuracyMin = 0.99;
constexpr double kCenterTolDeg = 0.01;
constexpr double kClusterBudgetS = 5.0;
constexpr double kDensityTolFraction = 0.02;
constexpr double kDensityBudgetS = 2.0;
constexpr double kFdEpsilon = 1e-5;
constexpr double kFdRelTol = 1e-5;
constexpr int kFdTrials = 100;
constexpr double kGradientBudgetS = 10.0;
constexpr double kHomogeneityRelTol = 1e-12;
constexpr double kEdgeErrorMinM = 1.0;
constexpr double kEdgeContrastM = 5.0;
constexpr double kRangeBudgetS = 5.0;
constexpr int kIoClouds = 1000;
constexpr int kFuzzStreams = 10000;
constexpr double kIoBudgetS = 30.0;
constexpr std::size_t kPipelineScans = 10;
constexpr double kPipelineBudgetS = 30.0;
constexpr std::size_t kThroughputPoints = 120000;
constexpr double kThroughputBudgetS = 1.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s.precision(precision);
  s << v;
  return s.str();
}

Outcome equivalent_beam_exactness() {
  const auto b = bf::equivalent_beams(bf::profiles::waymo(), bf::profiles::nuscenes());
  return {b == 16, "equivalent_beams(waymo, nuscenes)=" + std::to_string(b)};
}

Outcome progressive_schedule() {
  const auto s = bf::plan_schedule(bf::profiles::waymo(), bf::profiles::nuscenes());
  const bool ok = s.n == 2 && s.stages.size() == 2 && s.stages[0] == bf::StageSpec{32, false} &&
                  s.stages[1] == bf::StageSpec{16, true};
  return {ok, bf::describe_schedule(s)};
}

double accuracy(const std::vector<bf::BeamIndex>& a, const std::vector<bf::BeamIndex>& truth) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

Outcome clustering_oracle() {
  Timer t;
  const auto kitti = bf::profiles::kitti();
  const double gap = kitti.vfov_span() / 63.0;
  bf::ClusterConfig cc;
  cc.beam_count = 64;

  double worst_acc = 1.0, worst_center = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto sim = bf::simulate_scan(bf::sim_config_for(kitti, seed));
    const auto model = bf::cluster_cloud(sim.cloud, cc);
    worst_acc = std::min(worst_acc, accuracy(model.assignments, *sim.cloud.beam_labels));
    for (std::size_t k = 0; k < 64; ++k) {
      worst_center = std::max(worst_center, std::abs(bf::rad2deg(model.centers[k] - sim.truth.centers[k])));
    }
  }

  auto cfg = bf::sim_config_for(kitti, 11);
  cfg.spacing = bf::BeamSpacing::perturbed;
  cfg.pattern_sigma = gap / 4;
  const auto sim = bf::simulate_scan(cfg);
  const auto z = bf::zeniths_of(sim.cloud);
  const double km = accuracy(bf::cluster_beams(z, cc).assignments, *sim.cloud.beam_labels);
  const double base = accuracy(bf::assign_uniform_baseline(z, kitti.vfov_min, kitti.vfov_max, 64), *sim.cloud.beam_labels);
  const double secs = t.seconds();

  const bool ok = worst_acc >= kClusterAccuracyMin && worst_center <= kCenterTolDeg && base < km && secs <= kClusterBudgetS;
  return {ok, "accuracy=" + fmt(worst_acc, 6) + " max_center_err_deg=" + fmt(worst_center) + " perturbed kmeans=" +
                  fmt(km, 4) + " baseline=" + fmt(base, 4) + " time_s=" + fmt(secs, 3)};
}

Outcome density_alignment() {
  const auto sim = bf::simulate_scan(bf::sim_config_for(bf::profiles::waymo(), 21));
  Timer t;
  bf::ClusterConfig cc;
  cc.beam_count = 64;
  const auto model = bf::cluster_cloud(sim.cloud, cc);
  const auto plan = bf::plan_resample(bf::profiles::waymo(), bf::profiles::nuscenes());
  const auto out = bf::apply_resample(sim.cloud, model, plan);
  const auto st = bf::sensor_stats(bf::model_from_labels(out, bf::kept_centers(model, plan)));
  const double secs = t.seconds();
  const double target = bf::profiles::nuscenes().points_per_beam;
  const double rel = std::abs(st.mean_points_per_beam - target) / target;
  const bool ok = st.beam_count == 16 && rel <= kDensityTolFraction && secs <= kDensityBudgetS;
  return {ok, "beams=" + std::to_string(st.beam_count) + " mean_points_per_beam=" + fmt(st.mean_points_per_beam, 6) +
                  " target=" + fmt(target, 6) + " rel_dev=" + fmt(rel) + " time_s=" + fmt(secs, 3)};
}

bf::BevFeatureMap random_map(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  bf::BevFeatureMap m(16, 16, 4);
  for (auto& v : m.values) v = n(rng);
  return m;
}

bf::RoiSet random_rois(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> pos(-1.0, 15.5), size(0.5, 7.0);
  bf::RoiSet s;
  while (s.rois.size() < 8) {
    const double x0 = pos(rng), y0 = pos(rng);
    bf::Roi r{x0, y0, x0 + size(rng), y0 + size(rng), s.rois.size() < 4};
    if (bf::roi_intersects_grid(r, 16, 16)) s.rois.push_back(r);
  }
  return s;
}

Outcome mimic_gradient() {
  Timer t;
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < kFdTrials; ++trial) {
    const auto s = random_map(rng), te = random_map(rng);
    const auto rois = random_rois(rng);
    const auto res = bf::mimic_loss(s, te, rois);
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const double fd = static_cast<double>(bf::testing::oracle_partial(s, te, rois, i, kFdEpsilon));
      worst = std::max(worst, bf::testing::relative_error(res.grad[i], fd));
    }
  }
  const double secs = t.seconds();
  return {worst < kFdRelTol && secs <= kGradientBudgetS,
          "trials=" + std::to_string(kFdTrials) + " max_rel_err=" + fmt(worst, 3) + " time_s=" + fmt(secs, 3)};
}

Outcome mimic_identities() {
  std::mt19937_64 rng(7);
  const auto s = random_map(rng), te = random_map(rng);
  const auto rois = random_rois(rng);
  const auto same = bf::mimic_loss(s, s, rois);
  bool zero = same.loss == 0.0;
  for (double g : same.grad) zero = zero && g == 0.0;
  const auto base = bf::mimic_loss(s, te, rois);
  double worst = 0.0;
  for (double k : {0.25, 0.5, 2.0, 10.0, 1000.0}) {
    auto sk = s, tk = te;
    for (auto& v : sk.values) v *= k;
    for (auto& v : tk.values) v *= k;
    const double lk = bf::mimic_loss(sk, tk, rois).loss;
    worst = std::max(worst, std::abs(lk - k * base.loss) / (k * base.loss));
  }
  return {zero && worst <= kHomogeneityRelTol,
          std::string("identical_maps_zero=") + (zero ? "yes" : "no") + " homogeneity_rel_err=" + fmt(worst, 3)};
}

Outcome range_image_round_trip() {
  Timer t;
  // Round trip on a noisy, jittered scan with a clustered beam model.
  auto cfg = bf::sim_config_for(bf::profiles::kitti(), 31);
  cfg.azimuth_jitter = 0.0005;
  const auto sim = bf::simulate_scan(cfg);
  bf::ClusterConfig cc;
  cc.beam_count = 64;
  const auto model = bf::cluster_cloud(sim.cloud, cc);
  const std::size_t w = bf::kDefaultAzimuthBins;
  const auto img = bf::project(sim.cloud, model, w);
  double half_gap = 0.0;
  for (std::size_t k = 1; k < 64; ++k) half_gap = std::max(half_gap, (model.centers[k] - model.centers[k - 1]) / 2);
  std::vector<double> best(img.rows * w, std::numeric_limits<double>::infinity());
  std::vector<bf::SphericalCoord> winner(img.rows * w);
  for (std::size_t i = 0; i < sim.cloud.size(); ++i) {
    const auto sc = bf::to_spherical(sim.cloud.points[i]);
    const auto idx = model.assignments[i] * w + bf::azimuth_bin(sc.azimuth, w);
    if (sc.range < best[idx]) {
      best[idx] = sc.range;
      winner[idx] = sc;
    }
  }
  const auto back = bf::unproject(img);
  bool bounded = back.size() == img.valid_count();
  for (std::size_t i = 0; i < back.size() && bounded; ++i) {
    const auto sc = bf::to_spherical(back.points[i]);
    const auto row = (*back.beam_labels)[i];
    const auto col = bf::azimuth_bin(sc.azimuth, w);
    const auto& in = winner[row * w + col];
    bounded = std::abs(std::remainder(sc.azimuth - in.azimuth, 2 * bf::kPi)) <= bf::kPi / w + 1e-12 &&
              std::abs(sc.zenith - in.zenith) <= half_gap + 1e-12 && img.range(row, col) == in.range &&
              std::abs(sc.range - in.range) <= 1e-9 * in.range;
  }

  // 64 -> 32 beams, then bilinear back to 64 rows, scored against the scene itself.
  bf::SimConfig box_cfg = bf::sim_config_for(bf::profiles::kitti(), 32);
  box_cfg.zenith_noise = 0.0;
  box_cfg.points_per_beam = w;
  const auto full = bf::simulate_scan(box_cfg);
  const auto full_model = bf::model_from_labels(full.cloud, full.truth.centers);
  const auto src = bf::make_profile("src", 64, -23.6, 3.2, static_cast<double>(w));
  const auto half_profile = bf::make_profile("half", 32, -23.6, 3.2, static_cast<double>(w));
  const auto plan = bf::plan_resample(src, half_profile);
  const auto half = bf::apply_resample(full.cloud, full_model, plan);
  const auto half_img = bf::project_labeled(half, bf::kept_centers(full_model, plan), w);
  bf::UpsampleTrace trace;
  const auto up = bf::upsample_bilinear(half_img, 64, &trace);
  const auto rep = bf::score_upsample(
      up, trace,
      [&](double zenith, double azimuth, std::size_t, std::size_t) { return bf::cast_ray(box_cfg.scene, zenith, azimuth); },
      kEdgeContrastM);
  const double secs = t.seconds();
  const bool edges = rep.mean_abs_error > 0.0 && rep.edge_cells > 0 && rep.edge_max_abs_error > kEdgeErrorMinM &&
                     rep.edge_cells_over_1m > 0;
  return {bounded && edges && secs <= kRangeBudgetS,
          std::string("round_trip_bounded=") + (bounded ? "yes" : "no") + " points=" + std::to_string(back.size()) +
              " upsample mean_abs_err_m=" + fmt(rep.mean_abs_error) + " edge_cells=" + std::to_string(rep.edge_cells) +
              " edge_mean_err_m=" + fmt(rep.edge_mean_abs_error) + " edge_max_err_m=" + fmt(rep.edge_max_abs_error) +
              " edge_cells_over_1m=" + std::to_string(rep.edge_cells_over_1m) + " time_s=" + fmt(secs, 3)};
}

Outcome io_bit_exactness() {
  Timer t;
  std::mt19937_64 rng(41);
  std::uniform_int_distribution<int> count(0, 400), beams(1, 128);
  bool exact = true;
  bf::testing::TempDir dir;
  for (int i = 0; i < kIoClouds && exact; ++i) {
    const auto cloud = bf::testing::random_cloud(rng, count(rng), beams(rng), i % 3 != 0);
    const auto bytes = bf::encode_scan(cloud, bf::ScanFileFormat::beam_labeled_bin);
    auto back = bf::parse_scan(bytes, bf::ScanFileFormat::beam_labeled_bin).cloud;
    if (i % 50 == 0) {
      bf::write_scan(cloud, dir / "c.bfrg", bf::ScanFileFormat::beam_labeled_bin);
      exact = exact && bf::detail::read_file_bytes(dir / "c.bfrg") == bytes;
      back = bf::read_scan(dir / "c.bfrg").cloud;
    }
    exact = exact && back.size() == cloud.size() && *back.beam_labels == *cloud.beam_labels &&
            bf::encode_scan(back, bf::ScanFileFormat::beam_labeled_bin) == bytes;
    for (std::size_t k = 0; k < cloud.size() && exact; ++k) {
      const auto &a = cloud.points[k], &b = back.points[k];
      exact = a.x == b.x && a.y == b.y && a.z == b.z && a.intensity == b.intensity;
    }
  }

  bool truncation = true;
  for (std::size_t extra = 1; extra < 16; ++extra) {
    std::vector<std::byte> data(32 + extra, std::byte{0});
    try {
      bf::parse_scan(data, bf::ScanFileFormat::kitti_bin);
      truncation = false;
    } catch (const bf::Error& e) {
      truncation = truncation && e.code() == bf::ErrorCode::truncated_file;
    }
  }

  // Random bytes, and mutated valid files, through every parser.
  std::size_t typed = 0, untyped = 0, accepted = 0;
  std::uniform_int_distribution<int> byte(0, 255), len(0, 256), mode(0, 2);
  const auto seed_cloud = bf::testing::random_cloud(rng, 5, 4, true);
  const std::vector<std::vector<std::byte>> templates{
      bf::encode_scan(seed_cloud, bf::ScanFileFormat::beam_labeled_bin),
      bf::encode_scan(seed_cloud, bf::ScanFileFormat::pcd_ascii),
      bf::encode_scan(seed_cloud, bf::ScanFileFormat::pcd_binary)};
  const bf::ScanFileFormat formats[] = {bf::ScanFileFormat::kitti_bin, bf::ScanFileFormat::beam_labeled_bin,
                                        bf::ScanFileFormat::pcd_ascii, bf::ScanFileFormat::pcd_binary};
  for (int i = 0; i < kFuzzStreams; ++i) {
    std::vector<std::byte> data;
    const int m = mode(rng);
    if (m == 0) {
      data.resize(static_cast<std::size_t>(len(rng)));
      for (auto& b : data) b = static_cast<std::byte>(byte(rng));
    } else {
      data = templates[static_cast<std::size_t>(i) % templates.size()];
      for (int f = 0, flips = 1 + len(rng) % 8; f < flips; ++f) {
        data[static_cast<std::size_t>(len(rng)) % data.size()] = static_cast<std::byte>(byte(rng));
      }
      if (m == 2) data.resize(static_cast<std::size_t>(len(rng)) % (data.size() + 1));
    }
    for (auto f : formats) {
      try {
        bf::parse_scan(data, f);
        ++accepted;
      } catch (const bf::Error&) {
        ++typed;
      } catch (...) {
        ++untyped;
      }
    }
  }
  const double secs = t.seconds();
  return {exact && truncation && untyped == 0 && secs <= kIoBudgetS,
          "clouds=" + std::to_string(kIoClouds) + std::string(" bit_exact=") + (exact ? "yes" : "no") +
              " kitti_truncation_rejected=" + (truncation ? "yes" : "no") + " fuzz_streams=" +
              std::to_string(kFuzzStreams) + " typed_errors=" + std::to_string(typed) + " accepted=" +
              std::to_string(accepted) + " untyped=" + std::to_string(untyped) + " time_s=" + fmt(secs, 3)};
}

std::vector<std::string> read_lines(const fs::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

Outcome pipeline_integration() {
  Timer t;
  bf::testing::TempDir dir;
  fs::create_directories(dir / "data");
  for (std::size_t i = 0; i < kPipelineScans; ++i) {
    const auto sim = bf::simulate_scan(bf::sim_config_for(bf::profiles::waymo(), 500 + i));
    bf::write_scan(sim.cloud, dir / "data" / ("frame_" + std::to_string(i) + ".bin"), bf::ScanFileFormat::kitti_bin);
  }
  const auto schedule = bf::plan_schedule(bf::profiles::waymo(), bf::profiles::nuscenes());
  const auto log = dir / "hook.log";
  ::setenv("BEAMFORGE_STUB_LOG", log.c_str(), 1);
  const bf::ExecutableHook hook(BEAMFORGE_STUB_HOOK);

  // Clean run.
  const auto final_ref = bf::run_schedule(schedule, dir / "data", dir / "work", "d0", hook);
  auto lines = read_lines(log);
  const auto s0 = bf::stage_student_ref(dir / "work", 0), s1 = bf::stage_student_ref(dir / "work", 1);
  const auto d0 = bf::stage_data_dir(dir / "work", 0).string(), d1 = bf::stage_data_dir(dir / "work", 1).string();
  bool chained = lines.size() == schedule.n && lines.size() == 2 &&
                 lines[0] == "teacher=d0 data=" + d0 + " out=" + s0 &&
                 lines[1] == "teacher=" + s0 + " data=" + d1 + " out=" + s1 && final_ref == s1;
  for (std::size_t j = 0; j < 2; ++j) {
    const auto m = bf::load_manifest(bf::stage_manifest_path(dir / "work", j));
    chained = chained && m && m->status == bf::StageStatus::trained && m->teacher_ref == (j ? s0 : "d0");
  }

  // Injected failure at the second stage, then resume.
  fs::remove_all(dir / "work");
  fs::remove(log);
  ::setenv("BEAMFORGE_STUB_FAIL_ON", "stage_1", 1);
  bool failed = false;
  try {
    bf::run_schedule(schedule, dir / "data", dir / "work", "d0", hook);
  } catch (const bf::Error& e) {
    failed = e.code() == bf::ErrorCode::hook_failure;
  }
  ::unsetenv("BEAMFORGE_STUB_FAIL_ON");
  const auto m0 = bf::load_manifest(bf::stage_manifest_path(dir / "work", 0));
  const auto m1 = bf::load_manifest(bf::stage_manifest_path(dir / "work", 1));
  const bool preserved = m0 && m0->status == bf::StageStatus::trained && m1 && m1->status == bf::StageStatus::generated;
  fs::remove(log);
  const auto resumed_ref = bf::run_schedule(schedule, dir / "data", dir / "work", "d0", hook);
  lines = read_lines(log);
  const bool resumed = lines.size() == 1 && lines[0] == "teacher=" + s0 + " data=" + d1 + " out=" + s1 &&
                       resumed_ref == s1 && fs::is_regular_file(s1);
  ::unsetenv("BEAMFORGE_STUB_LOG");
  const double secs = t.seconds();
  return {chained && failed && preserved && resumed && secs <= kPipelineBudgetS,
          "scans=" + std::to_string(kPipelineScans) + std::string(" chained=") + (chained ? "yes" : "no") +
              " failure_raised=" + (failed ? "yes" : "no") + " manifests_preserved=" + (preserved ? "yes" : "no") +
              " resumed_single_stage=" + (resumed ? "yes" : "no") + " time_s=" + fmt(secs, 3)};
}

Outcome throughput() {
  auto cfg = bf::sim_config_for(bf::profiles::kitti(), 51);
  cfg.points_per_beam = kThroughputPoints / 64;
  cfg.threads = 1;
  const auto sim = bf::simulate_scan(cfg);
  bf::PointCloud cloud;
  cloud.points = sim.cloud.points;
  const auto plan = bf::plan_resample(bf::profiles::kitti(), bf::profiles::nuscenes());
  Timer t;
  bf::ClusterConfig cc;
  cc.beam_count = 64;
  const auto model = bf::cluster_cloud(cloud, cc);
  const auto out = bf::apply_resample(cloud, model, plan);
  const double secs = t.seconds();
  return {cloud.size() == kThroughputPoints && secs < kThroughputBudgetS,
          "points=" + std::to_string(cloud.size()) + " output_points=" + std::to_string(out.size()) +
              " time_s=" + fmt(secs, 3) + " budget_s=" + fmt(kThroughputBudgetS)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"equivalent-beam exactness", equivalent_beam_exactness},
      {"progressive schedule", progressive_schedule},
      {"clustering oracle", clustering_oracle},
      {"density alignment", density_alignment},
      {"mimic-loss gradient", mimic_gradient},
      {"mimic-loss identities", mimic_identities},
      {"range-image round trip", range_image_round_trip},
      {"I/O bit-exactness", io_bit_exactness},
      {"pipeline integration", pipeline_integration},
      {"throughput budget", throughput},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (failures ? "FAILED " : "ALL PASSED ") << (criteria.size() - failures) << "/" << criteria.size()
            << std::endl;
  return failures ? 1 : 0;
}
