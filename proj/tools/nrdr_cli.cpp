// Command line front end. Talks to the library exclusively through the C API,
// so it doubles as a smoke test of the shared-library surface.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nrdr.h"

namespace {

int fail(nrdr_status status) {
  std::cerr << "error: " << nrdr_last_error() << "\n";
  return static_cast<int>(status);
}

// Returns true on success; radar_json stays empty when no file was given.
bool read_optional_file(const std::string& path, std::string& contents) {
  if (path.empty()) return true;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open file: " << path << "\n";
    return false;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  contents = buf.str();
  return true;
}

struct SceneHandle {
  nrdr_scene* ptr = nullptr;
  ~SceneHandle() { nrdr_scene_free(ptr); }
};
struct CloudHandle {
  nrdr_cloud* ptr = nullptr;
  ~CloudHandle() { nrdr_cloud_free(ptr); }
};
struct DecoderHandle {
  nrdr_decoder* ptr = nullptr;
  ~DecoderHandle() { nrdr_decoder_free(ptr); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radar scene rendering, decoding and evaluation"};
  app.require_subcommand(1);

  // gen-scene
  auto* gen = app.add_subcommand("gen-scene", "Write the built-in demo scene");
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  gen->add_option("--seed", gen_seed, "Feature seed");
  gen->add_option("-o,--out", gen_out, "Output scene JSON path")->required();

  // render-depth
  auto* render = app.add_subcommand(
      "render-depth", "Render per-ray expected depth to CSV");
  std::string render_scene, render_radar, render_out;
  std::vector<double> render_pos{0.0, 0.0, 0.0};
  double render_yaw = 0.0, render_time = 0.0;
  std::uint64_t render_seed = 0;
  render->add_option("--scene", render_scene, "Scene JSON path")->required();
  render->add_option("--radar", render_radar, "Radar config JSON path");
  render->add_option("--position", render_pos, "Sensor position x y z")
      ->expected(3);
  render->add_option("--yaw", render_yaw, "Sensor yaw (rad)");
  render->add_option("--time", render_time, "Scene time (s)");
  render->add_option("--seed", render_seed, "Ray sampling seed");
  render->add_option("-o,--out", render_out, "Output CSV path")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "Train a decoder from an experiment config");
  std::string fit_config, fit_weights;
  fit->add_option("--config", fit_config, "Experiment config JSON path")
      ->required();
  fit->add_option("-o,--weights-out", fit_weights, "Output weights path")
      ->required();

  // sample
  auto* sample = app.add_subcommand(
      "sample", "Decode one pose with trained weights and emit a point cloud");
  std::string sample_weights, sample_scene, sample_radar, sample_out;
  std::vector<double> sample_pos{0.0, 0.0, 0.0};
  double sample_yaw = 0.0, sample_time = 0.0;
  std::uint64_t sample_render_seed = 0, sample_sample_seed = 0;
  sample->add_option("--weights", sample_weights, "Decoder weights path")
      ->required();
  sample->add_option("--scene", sample_scene, "Scene JSON path")->required();
  sample->add_option("--radar", sample_radar, "Radar config JSON path");
  sample->add_option("--position", sample_pos, "Sensor position x y z")
      ->expected(3);
  sample->add_option("--yaw", sample_yaw, "Sensor yaw (rad)");
  sample->add_option("--time", sample_time, "Scene time (s)");
  sample->add_option("--render-seed", sample_render_seed, "Ray sampling seed");
  sample->add_option("--sample-seed", sample_sample_seed,
                     "Detection sampling seed (probabilistic decoders)");
  sample->add_option("-o,--out", sample_out, "Output cloud path (.csv/.jsonl)")
      ->required();

  // eval
  auto* eval = app.add_subcommand("eval", "Compare two point cloud files");
  std::string eval_pred, eval_truth;
  double eval_cutoff = 1.0;
  eval->add_option("--pred", eval_pred, "Predicted cloud path")->required();
  eval->add_option("--truth", eval_truth, "Reference cloud path")->required();
  eval->add_option("--gospa-cutoff", eval_cutoff, "GOSPA cut-off distance");

  // run
  auto* run = app.add_subcommand("run", "Run a full experiment");
  std::string run_config, run_outdir;
  run->add_option("--config", run_config, "Experiment config JSON path")
      ->required();
  run->add_option("--output-dir", run_outdir, "Override the output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (gen->parsed()) {
    SceneHandle scene;
    nrdr_status s = nrdr_scene_example(gen_seed, &scene.ptr);
    if (s != NRDR_OK) return fail(s);
    s = nrdr_scene_save(scene.ptr, gen_out.c_str());
    if (s != NRDR_OK) return fail(s);
    std::cout << "wrote " << gen_out << "\n";
    return 0;
  }

  if (render->parsed()) {
    std::string radar_json;
    if (!read_optional_file(render_radar, radar_json)) return 3;
    SceneHandle scene;
    nrdr_status s = nrdr_scene_load(render_scene.c_str(), &scene.ptr);
    if (s != NRDR_OK) return fail(s);
    s = nrdr_render_depth_csv(scene.ptr,
                              radar_json.empty() ? nullptr : radar_json.c_str(),
                              render_pos.data(), render_yaw, render_time,
                              render_seed, render_out.c_str());
    if (s != NRDR_OK) return fail(s);
    std::cout << "wrote " << render_out << "\n";
    return 0;
  }

  if (fit->parsed()) {
    char* summary = nullptr;
    const nrdr_status s =
        nrdr_fit(fit_config.c_str(), fit_weights.c_str(), &summary);
    if (s != NRDR_OK) return fail(s);
    std::cout << summary;
    nrdr_string_free(summary);
    return 0;
  }

  if (sample->parsed()) {
    std::string radar_json;
    if (!read_optional_file(sample_radar, radar_json)) return 3;
    DecoderHandle decoder;
    nrdr_status s = nrdr_decoder_load(sample_weights.c_str(), &decoder.ptr);
    if (s != NRDR_OK) return fail(s);
    SceneHandle scene;
    s = nrdr_scene_load(sample_scene.c_str(), &scene.ptr);
    if (s != NRDR_OK) return fail(s);
    CloudHandle cloud;
    s = nrdr_decoder_emit(decoder.ptr, scene.ptr,
                          radar_json.empty() ? nullptr : radar_json.c_str(),
                          sample_pos.data(), sample_yaw, sample_time,
                          sample_render_seed, sample_sample_seed, &cloud.ptr);
    if (s != NRDR_OK) return fail(s);
    s = nrdr_cloud_write(cloud.ptr, sample_out.c_str());
    if (s != NRDR_OK) return fail(s);
    std::cout << "wrote " << sample_out << " (" << nrdr_cloud_size(cloud.ptr)
              << " points)\n";
    return 0;
  }

  if (eval->parsed()) {
    CloudHandle pred, truth;
    nrdr_status s = nrdr_cloud_read(eval_pred.c_str(), &pred.ptr);
    if (s != NRDR_OK) return fail(s);
    s = nrdr_cloud_read(eval_truth.c_str(), &truth.ptr);
    if (s != NRDR_OK) return fail(s);
    char* metrics = nullptr;
    s = nrdr_eval_metrics(pred.ptr, truth.ptr, eval_cutoff, &metrics);
    if (s != NRDR_OK) return fail(s);
    std::cout << metrics;
    nrdr_string_free(metrics);
    return 0;
  }

  if (run->parsed()) {
    char* report = nullptr;
    const nrdr_status s = nrdr_run_experiment(
        run_config.c_str(), run_outdir.empty() ? nullptr : run_outdir.c_str(),
        &report);
    if (s != NRDR_OK) return fail(s);
    std::cout << report;
    nrdr_string_free(report);
    return 0;
  }

  return 2;
}
