#include "nrdr/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "nrdr/errors.hpp"
#include "nrdr/matching.hpp"
#include "nrdr/metrics.hpp"
#include "nrdr/rng.hpp"
#include "nrdr/scan_io.hpp"
#include "config_json.hpp"

namespace fs = std::filesystem;

namespace nrdr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string gate_label(double g) {
  return std::isinf(g) ? std::string("inf") : format_double(g);
}

double median_defined(std::vector<double> values) {
  std::erase_if(values, [](double v) { return std::isnan(v); });
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

Json gospa_to_json(const GospaResult& g) {
  Json j;
  j["total"] = g.total;
  j["localization"] = g.localization;
  j["missed_cost"] = g.missed_cost;
  j["false_cost"] = g.false_cost;
  j["missed_count"] = g.missed_count;
  j["false_count"] = g.false_count;
  return j;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

TrajectoryConfig trajectory_from_json(const Json& j) {
  const std::string w = "trajectory";
  require_object(j, w);
  check_keys(j, w, {"start", "velocity", "yaw", "num_scans", "scan_period"});
  TrajectoryConfig cfg;
  cfg.start = get_vec3_or(j, w, "start", cfg.start);
  cfg.velocity = get_vec3_or(j, w, "velocity", cfg.velocity);
  cfg.yaw = get_number_or(j, w, "yaw", cfg.yaw);
  cfg.num_scans = static_cast<int>(get_int_or(j, w, "num_scans", cfg.num_scans));
  cfg.scan_period = get_number_or(j, w, "scan_period", cfg.scan_period);
  cfg.validate();
  return cfg;
}

Json trajectory_to_json(const TrajectoryConfig& cfg) {
  Json j;
  j["start"] = vec3_to_json(cfg.start);
  j["velocity"] = vec3_to_json(cfg.velocity);
  j["yaw"] = cfg.yaw;
  j["num_scans"] = cfg.num_scans;
  j["scan_period"] = cfg.scan_period;
  return j;
}

TruthConfig truth_from_json(const Json& j) {
  const std::string w = "truth";
  require_object(j, w);
  check_keys(j, w,
             {"hit_threshold", "keep_every", "radial_bias", "noise_scale",
              "outlier_fraction", "outlier_boost"});
  TruthConfig cfg;
  cfg.hit_threshold = get_number_or(j, w, "hit_threshold", cfg.hit_threshold);
  cfg.keep_every = static_cast<int>(get_int_or(j, w, "keep_every", cfg.keep_every));
  cfg.radial_bias = get_number_or(j, w, "radial_bias", cfg.radial_bias);
  cfg.noise_scale = get_number_or(j, w, "noise_scale", cfg.noise_scale);
  cfg.outlier_fraction =
      get_number_or(j, w, "outlier_fraction", cfg.outlier_fraction);
  cfg.outlier_boost = get_number_or(j, w, "outlier_boost", cfg.outlier_boost);
  cfg.validate();
  return cfg;
}

Json truth_to_json(const TruthConfig& cfg) {
  Json j;
  j["hit_threshold"] = cfg.hit_threshold;
  j["keep_every"] = cfg.keep_every;
  j["radial_bias"] = cfg.radial_bias;
  j["noise_scale"] = cfg.noise_scale;
  j["outlier_fraction"] = cfg.outlier_fraction;
  j["outlier_boost"] = cfg.outlier_boost;
  return j;
}

}  // namespace

void TrajectoryConfig::validate() const {
  if (!start.allFinite() || !velocity.allFinite() || !std::isfinite(yaw))
    throw ConfigError("trajectory: start, velocity and yaw must be finite");
  if (num_scans < 2)
    throw ConfigError("trajectory: num_scans must be >= 2 (train/test split)");
  if (!(scan_period > 0.0) || !std::isfinite(scan_period))
    throw ConfigError("trajectory: scan_period must be positive");
}

SensorPose TrajectoryConfig::pose_at(int scan_index) const {
  SensorPose pose;
  pose.time = scan_index * scan_period;
  pose.position = start + velocity * pose.time;
  pose.orientation =
      Eigen::AngleAxisd(yaw, Vec3::UnitZ()).toRotationMatrix();
  return pose;
}

void TruthConfig::validate() const {
  if (!(hit_threshold > 0.0) || !(hit_threshold < 1.0))
    throw ConfigError("truth: hit_threshold must be in (0, 1)");
  if (keep_every < 1) throw ConfigError("truth: keep_every must be >= 1");
  if (!std::isfinite(radial_bias))
    throw ConfigError("truth: radial_bias must be finite");
  if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale))
    throw ConfigError("truth: noise_scale must be >= 0");
  if (!(outlier_fraction >= 0.0) || !(outlier_fraction <= 1.0))
    throw ConfigError("truth: outlier_fraction must be in [0, 1]");
  if (!(outlier_boost >= 1.0) || !std::isfinite(outlier_boost))
    throw ConfigError("truth: outlier_boost must be >= 1");
}

ExperimentConfig::ExperimentConfig()
    : metric_gates{30.0, 80.0, std::numeric_limits<double>::infinity()} {}

void ExperimentConfig::validate() const {
  if (scene_path.empty()) throw ConfigError("experiment: scene path is empty");
  if (output_dir.empty()) throw ConfigError("experiment: output_dir is empty");
  radar.validate();
  opacity.validate();
  decoder.validate();
  train.validate();
  trajectory.validate();
  truth.validate();
  if (metric_gates.empty())
    throw ConfigError("experiment: metric_gates must not be empty");
  for (std::size_t i = 0; i < metric_gates.size(); ++i) {
    if (std::isnan(metric_gates[i]) || !(metric_gates[i] > 0.0))
      throw ConfigError("experiment: metric gates must be positive");
    if (i > 0 && !(metric_gates[i] > metric_gates[i - 1]))
      throw ConfigError("experiment: metric gates must be strictly increasing");
  }
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  const Json root = load_json_file(path, "experiment config");
  const std::string w = "experiment config";
  require_object(root, w);
  check_keys(root, w,
             {"scene", "radar", "decoder", "train", "trajectory", "truth",
              "metric_gates", "output_dir", "master_seed"});

  ExperimentConfig cfg;
  cfg.scene_path = get_string(root, w, "scene");
  fs::path scene(cfg.scene_path);
  if (scene.is_relative())
    cfg.scene_path = (fs::path(path).parent_path() / scene).string();

  if (root.contains("radar"))
    std::tie(cfg.radar, cfg.opacity) = radar_section_from_json(root.at("radar"));
  if (root.contains("decoder"))
    cfg.decoder = decoder_config_from_json(root.at("decoder"));
  if (root.contains("train")) cfg.train = train_config_from_json(root.at("train"));
  if (root.contains("trajectory"))
    cfg.trajectory = trajectory_from_json(root.at("trajectory"));
  if (root.contains("truth")) cfg.truth = truth_from_json(root.at("truth"));
  if (root.contains("metric_gates")) {
    const Json& gates = root.at("metric_gates");
    if (!gates.is_array())
      throw ConfigError(w + ": 'metric_gates' must be an array");
    cfg.metric_gates.clear();
    for (const Json& g : gates) {
      if (g.is_null())
        cfg.metric_gates.push_back(std::numeric_limits<double>::infinity());
      else if (g.is_number())
        cfg.metric_gates.push_back(g.get<double>());
      else
        throw ConfigError(w + ": metric gates must be numbers or null");
    }
  }
  cfg.output_dir = get_string_or(root, w, "output_dir", cfg.output_dir);
  fs::path out(cfg.output_dir);
  if (out.is_relative())
    cfg.output_dir = (fs::path(path).parent_path() / out).string();
  cfg.master_seed = get_u64_or(root, w, "master_seed", cfg.master_seed);
  cfg.validate();
  return cfg;
}

PointCloud synth_truth(const Scene& scene, const SensorPose& pose,
                       const RadarConfig& radar, const OpacityParams& opacity,
                       const TruthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  const RayBundle bundle = build_ray_grid(pose, radar);
  const std::vector<RayRender> renders =
      render_bundle(scene, bundle, radar, opacity, mix_seed(seed, 1));

  PointCloud cloud;
  Rng noise(mix_seed(seed, 2));
  int hit_index = 0;
  for (const RayRender& render : renders) {
    if (!(render.opacity_sum > cfg.hit_threshold)) continue;
    const bool keep = hit_index % cfg.keep_every == 0;
    ++hit_index;
    if (!keep) continue;
    Vec3 p = render.return_position;
    const double range = p.norm();
    const Vec3 dir = range > 0.0 ? Vec3(p / range) : Vec3::UnitX();
    p += cfg.radial_bias * dir;
    if (cfg.noise_scale > 0.0) {
      for (int a = 0; a < 3; ++a) p[a] += noise.laplace(0.0, cfg.noise_scale);
      if (noise.uniform() < cfg.outlier_fraction)
        p += std::abs(noise.laplace(0.0, cfg.noise_scale * cfg.outlier_boost)) *
             dir;
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

TrajectoryScans synthesize_trajectory(const Scene& scene,
                                      const ExperimentConfig& cfg) {
  TrajectoryScans out;
  out.poses.resize(cfg.trajectory.num_scans);
  out.truths.resize(cfg.trajectory.num_scans);
  for (int k = 0; k < cfg.trajectory.num_scans; ++k) {
    out.poses[k] = cfg.trajectory.pose_at(k);
    out.truths[k] =
        synth_truth(scene, out.poses[k], cfg.radar, cfg.opacity, cfg.truth,
                    mix_seed(cfg.master_seed, 100 + k));
    (k % 2 == 0 ? out.train_indices : out.test_indices).push_back(k);
  }
  return out;
}

FitResult fit_from_config(const ExperimentConfig& cfg) {
  cfg.validate();
  const Scene scene = Scene::load(cfg.scene_path);
  const TrajectoryScans scans = synthesize_trajectory(scene, cfg);
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = mix_seed(cfg.master_seed, 1);
  std::vector<SensorPose> train_poses;
  std::vector<PointCloud> train_truths;
  for (int k : scans.train_indices) {
    train_poses.push_back(scans.poses[k]);
    train_truths.push_back(scans.truths[k]);
  }
  return fit(scene, train_poses, train_truths, cfg.radar, cfg.opacity,
             cfg.decoder, train_cfg);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const Scene scene = Scene::load(cfg.scene_path);

  // Every stream seed is a fixed function of the master seed, so a rerun of
  // the same config reproduces the outputs byte for byte.
  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = mix_seed(cfg.master_seed, 1);

  ExperimentResult result;
  const TrajectoryScans scans = synthesize_trajectory(scene, cfg);
  result.train_scan_indices = scans.train_indices;
  result.test_scan_indices = scans.test_indices;
  std::vector<SensorPose> train_poses, test_poses;
  std::vector<PointCloud> train_truths, test_truths;
  for (int k : scans.train_indices) {
    train_poses.push_back(scans.poses[k]);
    train_truths.push_back(scans.truths[k]);
  }
  for (int k : scans.test_indices) {
    test_poses.push_back(scans.poses[k]);
    test_truths.push_back(scans.truths[k]);
  }

  FitResult fit_result = fit(scene, train_poses, train_truths, cfg.radar,
                             cfg.opacity, cfg.decoder, train_cfg);
  result.loss_curve = fit_result.loss_curve;

  fs::create_directories(cfg.output_dir);
  const fs::path out(cfg.output_dir);

  Json scans_json = Json::array();
  const std::size_t num_gates = cfg.metric_gates.size();
  std::vector<std::vector<double>> chamfer_by_gate(num_gates),
      emd_by_gate(num_gates), gospa_by_gate(num_gates);

  for (std::size_t t = 0; t < test_poses.size(); ++t) {
    const int k = result.test_scan_indices[t];
    const RayBundle bundle = build_ray_grid(test_poses[t], cfg.radar);
    const std::vector<RayRender> renders = render_bundle(
        scene, bundle, cfg.radar, cfg.opacity, mix_seed(cfg.master_seed, 2000 + k));
    const PredictionParams params =
        decode(renders, fit_result.weights, cfg.decoder);
    const PointCloud predicted =
        cfg.decoder.probabilistic
            ? emit_probabilistic(params, cfg.decoder, cfg.radar,
                                 mix_seed(cfg.master_seed, 3000 + k))
            : emit_deterministic(params, cfg.radar);

    ScanEvaluation eval;
    eval.scan_index = k;
    eval.time = test_poses[t].time;
    eval.truth_size = test_truths[t].size();
    eval.predicted_size = predicted.size();

    Json gates_json;
    for (std::size_t gi = 0; gi < num_gates; ++gi) {
      const double gate = cfg.metric_gates[gi];
      const PointCloud gp = gate_by_range(predicted, gate);
      const PointCloud gt = gate_by_range(test_truths[t], gate);
      const bool defined = !gp.points.empty() && !gt.points.empty();
      const double cd = defined ? chamfer(gp, gt) : kNaN;
      const double e = defined ? emd(gp, gt) : kNaN;
      const GospaResult g = gospa(gp, gt);
      eval.chamfer.push_back(cd);
      eval.emd.push_back(e);
      eval.gospa.push_back(g);
      chamfer_by_gate[gi].push_back(cd);
      emd_by_gate[gi].push_back(e);
      gospa_by_gate[gi].push_back(g.total);

      Json m;
      m["chamfer"] = number_or_null(cd);
      m["emd"] = number_or_null(e);
      m["gospa"] = gospa_to_json(g);
      m["predicted_in_gate"] = gp.size();
      m["truth_in_gate"] = gt.size();
      gates_json[gate_label(gate)] = m;
    }

    Json scan_json;
    scan_json["index"] = k;
    scan_json["time"] = eval.time;
    scan_json["truth_size"] = eval.truth_size;
    scan_json["predicted_size"] = eval.predicted_size;
    scan_json["gates"] = gates_json;
    scans_json.push_back(scan_json);

    write_point_cloud(predicted,
                      (out / ("pred_scan_" + std::to_string(k) + ".csv")).string(),
                      ScanFormat::Csv);
    result.evaluations.push_back(std::move(eval));
  }

  Json medians;
  for (std::size_t gi = 0; gi < num_gates; ++gi) {
    Json m;
    m["chamfer"] = number_or_null(median_defined(chamfer_by_gate[gi]));
    m["emd"] = number_or_null(median_defined(emd_by_gate[gi]));
    m["gospa_total"] = number_or_null(median_defined(gospa_by_gate[gi]));
    medians[gate_label(cfg.metric_gates[gi])] = m;
  }

  Json config_echo;
  config_echo["scene"] = cfg.scene_path;
  config_echo["radar"] = radar_section_to_json(cfg.radar, cfg.opacity);
  config_echo["decoder"] = decoder_config_to_json(cfg.decoder);
  config_echo["train"] = train_config_to_json(train_cfg);
  config_echo["trajectory"] = trajectory_to_json(cfg.trajectory);
  config_echo["truth"] = truth_to_json(cfg.truth);
  Json gates_list = Json::array();
  for (double g : cfg.metric_gates)
    gates_list.push_back(std::isinf(g) ? Json(nullptr) : Json(g));
  config_echo["metric_gates"] = gates_list;
  config_echo["master_seed"] = cfg.master_seed;

  Json report;
  report["config"] = config_echo;
  report["train_scan_indices"] = result.train_scan_indices;
  report["test_scan_indices"] = result.test_scan_indices;
  Json loss_json;
  loss_json["iterations"] = result.loss_curve.size();
  loss_json["first"] = result.loss_curve.front();
  loss_json["final"] = result.loss_curve.back();
  report["loss"] = loss_json;
  report["scans"] = scans_json;
  report["medians"] = medians;

  result.report_json = report.dump(2) + "\n";
  write_text_file(out / "report.json", result.report_json);

  std::string curve = "iteration,loss\n";
  for (std::size_t i = 0; i < result.loss_curve.size(); ++i)
    curve += std::to_string(i) + "," + format_double(result.loss_curve[i]) + "\n";
  write_text_file(out / "loss_curve.csv", curve);

  auto to_scans = [&](const std::vector<SensorPose>& ps,
                      const std::vector<PointCloud>& cs) {
    std::vector<RadarScan> scans(ps.size());
    for (std::size_t i = 0; i < ps.size(); ++i) {
      scans[i].pose = ps[i];
      scans[i].cloud = cs[i];
    }
    return scans;
  };
  write_scan_file(to_scans(train_poses, train_truths),
                  (out / "train_scans.csv").string(), ScanFormat::Csv);
  write_scan_file(to_scans(test_poses, test_truths),
                  (out / "test_scans.csv").string(), ScanFormat::Csv);
  fit_result.weights.save((out / "weights.nrdr").string());

  return result;
}

}  // namespace nrdr
