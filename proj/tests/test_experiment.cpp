#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrdr/errors.hpp"
#include "nrdr/experiment.hpp"
#include "nrdr/rng.hpp"
#include "nrdr/scan_io.hpp"

using namespace nrdr;
namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

fs::path unique_dir(const std::string& stem) {
  const fs::path dir =
      fs::temp_directory_path() / (stem + "." + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Solid beyond the plane x = 8, straight ahead of an origin sensor.
Scene wall_scene() {
  return Scene({Primitive::half_space(Vec3(-1.0, 0.0, 0.0), -8.0, 0)}, {}, 8, 1);
}

RadarConfig narrow_radar() {
  RadarConfig radar;
  radar.azimuth_min = -0.2;
  radar.azimuth_max = 0.2;
  radar.ray_divergence_az = 0.1;
  radar.elevation_min = -0.05;
  radar.elevation_max = 0.05;
  radar.ray_divergence_el = 0.05;
  radar.max_range = 30.0;
  radar.num_samples_per_ray = 64;
  return radar;
}

// Small but complete config: benchmark scene, 6 x 4 grid, tabular decoder.
ExperimentConfig micro_config(const fs::path& dir) {
  ExperimentConfig cfg;
  cfg.scene_path = (dir / "scene.json").string();
  Scene::benchmark(3).save(cfg.scene_path);
  cfg.radar.azimuth_min = -0.3;
  cfg.radar.azimuth_max = 0.3;
  cfg.radar.ray_divergence_az = 0.1;
  cfg.radar.elevation_min = -0.06;
  cfg.radar.elevation_max = 0.18;
  cfg.radar.ray_divergence_el = 0.06;
  cfg.radar.max_range = 40.0;
  cfg.radar.num_samples_per_ray = 16;
  cfg.radar.confidence_threshold = 0.05;
  cfg.decoder.variant = DecoderVariant::Tabular;
  cfg.decoder.probabilistic = false;
  cfg.train.iterations = 30;
  cfg.train.warmup_steps = 5;
  cfg.train.lr_max = 5e-3;
  cfg.trajectory.velocity = Vec3(0.5, 0.1, 0.0);
  cfg.trajectory.num_scans = 4;
  cfg.trajectory.scan_period = 0.5;
  cfg.metric_gates = {0.5, 30.0, kInf};
  cfg.master_seed = 11;
  return cfg;
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("poses advance along a straight line with a fixed heading") {
  TrajectoryConfig traj;
  traj.start = Vec3(1.0, 2.0, 0.0);
  traj.velocity = Vec3(2.0, 0.0, 0.0);
  traj.yaw = std::numbers::pi / 2.0;
  traj.scan_period = 0.5;
  CHECK_NOTHROW(traj.validate());

  const SensorPose p0 = traj.pose_at(0);
  CHECK(p0.time == 0.0);
  CHECK((p0.position - Vec3(1.0, 2.0, 0.0)).norm() == 0.0);

  const SensorPose p3 = traj.pose_at(3);
  CHECK(p3.time == doctest::Approx(1.5));
  CHECK((p3.position - Vec3(4.0, 2.0, 0.0)).norm() < 1e-12);
  CHECK((p3.orientation * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-12);
  CHECK_NOTHROW(p3.validate());

  TrajectoryConfig bad = traj;
  bad.num_scans = 1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = traj;
  bad.scan_period = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = traj;
  bad.velocity.y() = std::nan("");
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("synthetic truth is seeded and shaped by its knobs") {
  const Scene scene = wall_scene();
  const RadarConfig radar = narrow_radar();
  const OpacityParams opacity;
  const SensorPose pose;

  TruthConfig quiet;
  quiet.hit_threshold = 0.5;
  quiet.keep_every = 1;
  quiet.radial_bias = 0.7;
  quiet.noise_scale = 0.0;

  // With noise off, every point is the ray's return pushed outward.
  const PointCloud full = synth_truth(scene, pose, radar, opacity, quiet, 77);
  const RayBundle bundle = build_ray_grid(pose, radar);
  const std::vector<RayRender> renders =
      render_bundle(scene, bundle, radar, opacity, mix_seed(77, 1));
  REQUIRE(renders.size() == 8);
  REQUIRE(full.size() == 8);
  for (std::size_t i = 0; i < renders.size(); ++i) {
    CHECK(renders[i].opacity_sum > 0.5);
    const Vec3 p = renders[i].return_position;
    const Vec3 expect = p + 0.7 * Vec3(p / p.norm());
    CHECK((full.points[i] - expect).norm() == 0.0);
  }

  TruthConfig sparse = quiet;
  sparse.keep_every = 2;
  const PointCloud half = synth_truth(scene, pose, radar, opacity, sparse, 77);
  REQUIRE(half.size() == 4);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK((half.points[i] - full.points[2 * i]).norm() == 0.0);

  TruthConfig noisy = quiet;
  noisy.noise_scale = 0.2;
  const PointCloud a = synth_truth(scene, pose, radar, opacity, noisy, 77);
  const PointCloud b = synth_truth(scene, pose, radar, opacity, noisy, 77);
  const PointCloud c = synth_truth(scene, pose, radar, opacity, noisy, 78);
  REQUIRE(a.size() == 8);
  REQUIRE(b.size() == 8);
  double same = 0.0, other = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    same += (a.points[i] - b.points[i]).norm();
    other += (a.points[i] - (i < c.size() ? c.points[i] : Vec3::Zero())).norm();
  }
  CHECK(same == 0.0);
  CHECK(other > 0.0);

  // Facing away from the wall there are no hits to keep.
  SensorPose away;
  away.orientation =
      Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitZ()).toRotationMatrix();
  CHECK(synth_truth(scene, away, radar, opacity, quiet, 77).empty());

  TruthConfig bad = quiet;
  bad.hit_threshold = 0.0;
  CHECK_THROWS_AS(synth_truth(scene, pose, radar, opacity, bad, 1), ConfigError);
  bad = quiet;
  bad.keep_every = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = quiet;
  bad.outlier_boost = 0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = quiet;
  bad.noise_scale = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("experiment configs load strictly and resolve relative paths") {
  const fs::path dir = unique_dir("nrdr_cfgload");
  Scene::benchmark(1).save((dir / "tiny.json").string());

  nlohmann::json j;
  j["scene"] = "tiny.json";
  j["radar"]["max_range"] = 25.0;
  j["decoder"]["variant"] = "mlp";
  j["decoder"]["probabilistic"] = true;
  j["train"]["iterations"] = 12;
  j["train"]["warmup_steps"] = 3;
  j["trajectory"]["num_scans"] = 4;
  j["truth"]["noise_scale"] = 0.0;
  j["metric_gates"] = nlohmann::json::array({30.0, nullptr});
  j["output_dir"] = "outs";
  j["master_seed"] = 9;

  const fs::path cfg_path = dir / "exp.json";
  std::ofstream(cfg_path) << j.dump(2);

  const ExperimentConfig cfg = ExperimentConfig::load(cfg_path.string());
  CHECK(cfg.scene_path == (dir / "tiny.json").string());
  CHECK(cfg.output_dir == (dir / "outs").string());
  CHECK(cfg.radar.max_range == 25.0);
  CHECK(cfg.radar.azimuth_min == RadarConfig{}.azimuth_min);
  CHECK(cfg.decoder.variant == DecoderVariant::Mlp);
  CHECK(cfg.decoder.probabilistic);
  CHECK(cfg.train.iterations == 12);
  CHECK(cfg.train.warmup_steps == 3);
  CHECK(cfg.train.lr_max == TrainConfig{}.lr_max);
  CHECK(cfg.trajectory.num_scans == 4);
  CHECK(cfg.truth.noise_scale == 0.0);
  REQUIRE(cfg.metric_gates.size() == 2);
  CHECK(cfg.metric_gates[0] == 30.0);
  CHECK(std::isinf(cfg.metric_gates[1]));
  CHECK(cfg.master_seed == 9);

  // An absolute scene path is taken as-is.
  nlohmann::json abs = j;
  abs["scene"] = (dir / "tiny.json").string();
  std::ofstream(cfg_path) << abs.dump(2);
  CHECK(ExperimentConfig::load(cfg_path.string()).scene_path ==
        (dir / "tiny.json").string());

  auto rejects = [&](const nlohmann::json& doc) {
    std::ofstream(cfg_path) << doc.dump(2);
    CHECK_THROWS_AS(ExperimentConfig::load(cfg_path.string()), ConfigError);
  };
  nlohmann::json bad = j;
  bad["extra"] = 1;
  rejects(bad);
  bad = j;
  bad.erase("scene");
  rejects(bad);
  bad = j;
  bad["metric_gates"] = nlohmann::json::array({30.0, "x"});
  rejects(bad);
  bad = j;
  bad["metric_gates"] = nlohmann::json::array({30.0, 10.0});
  rejects(bad);
  bad = j;
  bad["metric_gates"] = nlohmann::json::array();
  rejects(bad);
  bad = j;
  bad["truth"]["typo"] = 1;
  rejects(bad);

  std::ofstream(cfg_path) << "{not json";
  CHECK_THROWS_AS(ExperimentConfig::load(cfg_path.string()), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::load((dir / "absent.json").string()),
                  DataError);
  fs::remove_all(dir);
}

TEST_CASE("a miniature run is reproducible and writes its artifacts") {
  const fs::path dir = unique_dir("nrdr_run");
  ExperimentConfig cfg = micro_config(dir);

  cfg.output_dir = (dir / "out1").string();
  const ExperimentResult r1 = run_experiment(cfg);
  cfg.output_dir = (dir / "out2").string();
  const ExperimentResult r2 = run_experiment(cfg);

  // Same config, same bytes; the output directory does not leak into them.
  CHECK(r1.report_json == r2.report_json);
  CHECK(read_text(dir / "out1" / "report.json") == r1.report_json);
  for (const char* name : {"report.json", "loss_curve.csv", "train_scans.csv",
                           "test_scans.csv", "pred_scan_1.csv",
                           "pred_scan_3.csv", "weights.nrdr",
                           "weights.nrdr.json"}) {
    CAPTURE(name);
    REQUIRE(fs::exists(dir / "out1" / name));
    CHECK(read_text(dir / "out1" / name) == read_text(dir / "out2" / name));
  }

  CHECK(r1.train_scan_indices == std::vector<int>{0, 2});
  CHECK(r1.test_scan_indices == std::vector<int>{1, 3});
  CHECK(r1.loss_curve.size() == 30);
  REQUIRE(r1.evaluations.size() == 2);
  CHECK(r1.evaluations[0].scan_index == 1);
  CHECK(r1.evaluations[1].scan_index == 3);
  CHECK(r1.evaluations[0].time == doctest::Approx(0.5));
  REQUIRE(r1.evaluations[0].chamfer.size() == 3);

  // Nothing sits within half a meter of the sensor, so the tightest gate
  // empties both sides: chamfer is undefined there, the full-range gate is not.
  CHECK(std::isnan(r1.evaluations[0].chamfer[0]));
  CHECK(r1.evaluations[0].gospa[0].total == 0.0);
  CHECK(!std::isnan(r1.evaluations[0].chamfer[2]));
  CHECK(r1.evaluations[0].chamfer[2] > 0.0);
  CHECK(r1.evaluations[0].predicted_size == 24);
  CHECK(r1.evaluations[0].truth_size > 0);
  CHECK(r1.evaluations[0].truth_size < 24);

  const nlohmann::json report = nlohmann::json::parse(r1.report_json);
  CHECK(report.at("loss").at("iterations") == 30);
  CHECK(report.at("train_scan_indices") == std::vector<int>{0, 2});
  const nlohmann::json& gates = report.at("scans").at(0).at("gates");
  CHECK(gates.at("0.5").at("chamfer").is_null());
  CHECK(gates.at("0.5").at("predicted_in_gate") == 0);
  CHECK(gates.at("inf").at("chamfer").is_number());
  CHECK(report.at("medians").at("inf").at("chamfer").is_number());

  // The loss curve file matches the in-memory curve.
  const std::string curve = read_text(dir / "out1" / "loss_curve.csv");
  CHECK(curve.starts_with("iteration,loss\n0,"));
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 31);

  // Artifacts parse back: scan files load, weights load with one table row
  // per ray, and the training half alone reproduces the run's weights.
  const ScanSet train_set =
      read_scan_file((dir / "out1" / "train_scans.csv").string(), ScanFormat::Csv);
  REQUIRE(train_set.scans.size() == 2);
  CHECK(train_set.scans[0].pose.time == 0.0);
  CHECK(train_set.scans[1].pose.time == doctest::Approx(1.0));

  const DecoderWeights loaded =
      DecoderWeights::load((dir / "out1" / "weights.nrdr").string());
  CHECK(loaded.table.rows() == 24);
  const FitResult refit = fit_from_config(cfg);
  CHECK(refit.loss_curve == r1.loss_curve);
  CHECK((refit.weights.table - loaded.table).cwiseAbs().maxCoeff() == 0.0);

  // A different master seed reaches different outputs.
  cfg.master_seed = 12;
  cfg.output_dir = (dir / "out3").string();
  const ExperimentResult r3 = run_experiment(cfg);
  CHECK(r3.report_json != r1.report_json);

  fs::remove_all(dir);
}

}  // TEST_SUITE("experiment")
