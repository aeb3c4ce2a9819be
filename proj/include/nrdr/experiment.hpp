#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nrdr/decoder.hpp"
#include "nrdr/geometry.hpp"
#include "nrdr/metrics.hpp"
#include "nrdr/rendering.hpp"
#include "nrdr/rfs.hpp"
#include "nrdr/scene.hpp"

namespace nrdr {

// Straight-line sensor trajectory; one pose per scan, fixed heading.
struct TrajectoryConfig {
  Vec3 start{0.0, 0.0, 0.0};
  Vec3 velocity{0.0, 0.0, 0.0};
  double yaw = 0.0;
  int num_scans = 16;
  double scan_period = 0.5;

  void validate() const;
  SensorPose pose_at(int scan_index) const;
};

// Controls for synthesizing per-scan reference detections from rendered rays.
// Every point jitters by per-axis Laplace noise; a small fraction are
// multipath-style outliers pushed further out along the ray (one-sided, since
// reflected paths only ever add range).
struct TruthConfig {
  double hit_threshold = 0.5;  // keep rays whose opacity mass exceeds this
  int keep_every = 1;          // optionally subsample the hits: every n-th
  double radial_bias = 0.5;    // push kept returns outward along the ray
  double noise_scale = 0.2;    // per-axis Laplace scale, 0 disables
  double outlier_fraction = 0.1;
  double outlier_boost = 5.0;  // outlier range error scale, times noise_scale

  void validate() const;
};

struct ExperimentConfig {
  std::string scene_path;
  RadarConfig radar;
  OpacityParams opacity;
  DecoderConfig decoder;
  TrainConfig train;
  TrajectoryConfig trajectory;
  TruthConfig truth;
  // Range gate upper bounds for the evaluation tables; infinity means no
  // gating. Must be strictly increasing.
  std::vector<double> metric_gates;
  std::string output_dir = "out";
  std::uint64_t master_seed = 0;

  ExperimentConfig();
  void validate() const;
  // Relative scene_path / output_dir resolve against the config file's
  // directory.
  static ExperimentConfig load(const std::string& path);
};

// Reference detections for one pose: rays with opacity mass above the
// threshold, subsampled, biased outward, jittered with Laplace noise.
PointCloud synth_truth(const Scene& scene, const SensorPose& pose,
                       const RadarConfig& radar, const OpacityParams& opacity,
                       const TruthConfig& cfg, std::uint64_t seed);

// All scans along the configured trajectory with their synthesized truths.
// Even scan indices train, odd ones evaluate.
struct TrajectoryScans {
  std::vector<SensorPose> poses;
  std::vector<PointCloud> truths;
  std::vector<int> train_indices;
  std::vector<int> test_indices;
};
TrajectoryScans synthesize_trajectory(const Scene& scene,
                                      const ExperimentConfig& cfg);

// Training half of run_experiment: fit a decoder on the trajectory's train
// scans. The train seed is derived from the master seed.
FitResult fit_from_config(const ExperimentConfig& cfg);

struct ScanEvaluation {
  int scan_index = 0;
  double time = 0.0;
  std::size_t truth_size = 0;
  std::size_t predicted_size = 0;
  // One entry per gate; quiet NaN marks metrics undefined for that gate
  // (some side of the comparison was empty).
  std::vector<double> chamfer;
  std::vector<double> emd;
  std::vector<GospaResult> gospa;
};

struct ExperimentResult {
  std::vector<int> train_scan_indices;
  std::vector<int> test_scan_indices;
  std::vector<double> loss_curve;
  std::vector<ScanEvaluation> evaluations;  // test scans, ascending index
  std::string report_json;                  // full report, serialized
};

// End-to-end run: synthesize scans along the trajectory, train on the even
// ones, evaluate on the odd ones, write report.json / loss_curve.csv /
// train_scans.csv / test_scans.csv / weights.nrdr under output_dir. Output
// bytes depend only on the config contents.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace nrdr
