#include "nrdr.h"

#include <cstring>
#include <fstream>
#include <string>
#include <utility>

#include "nrdr/decoder.hpp"
#include "nrdr/errors.hpp"
#include "nrdr/experiment.hpp"
#include "nrdr/geometry.hpp"
#include "nrdr/metrics.hpp"
#include "nrdr/rendering.hpp"
#include "nrdr/scan_io.hpp"
#include "nrdr/scene.hpp"
#include "config_json.hpp"

struct nrdr_scene {
  nrdr::Scene scene;
};
struct nrdr_cloud {
  nrdr::PointCloud cloud;
};
struct nrdr_scan_set {
  nrdr::ScanSet set;
};
struct nrdr_decoder {
  nrdr::DecoderWeights weights;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
nrdr_status wrap(F&& body) {
  try {
    body();
    return NRDR_OK;
  } catch (const nrdr::ConfigError& e) {
    g_last_error = e.what();
    return NRDR_ERR_CONFIG;
  } catch (const nrdr::DataError& e) {
    g_last_error = e.what();
    return NRDR_ERR_DATA;
  } catch (const nrdr::NumericError& e) {
    g_last_error = e.what();
    return NRDR_ERR_NUMERIC;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NRDR_ERR_DATA;
  }
}

nrdr_status null_argument(const char* where) {
  g_last_error = std::string(where) + ": null argument";
  return NRDR_ERR_CONFIG;
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::pair<nrdr::RadarConfig, nrdr::OpacityParams> parse_radar(
    const char* radar_json) {
  if (radar_json == nullptr) return {nrdr::RadarConfig{}, nrdr::OpacityParams{}};
  nrdr::Json j = nrdr::Json::parse(radar_json, nullptr, false);
  if (j.is_discarded())
    throw nrdr::ConfigError("radar configuration is not valid JSON");
  return nrdr::radar_section_from_json(j);
}

nrdr::SensorPose make_pose(const double position[3], double yaw, double time) {
  nrdr::SensorPose pose;
  pose.position = nrdr::Vec3(position[0], position[1], position[2]);
  pose.orientation =
      Eigen::AngleAxisd(yaw, nrdr::Vec3::UnitZ()).toRotationMatrix();
  pose.time = time;
  return pose;
}

}  // namespace

extern "C" {

const char* nrdr_version(void) { return "0.1.0"; }

const char* nrdr_last_error(void) { return g_last_error.c_str(); }

void nrdr_string_free(char* s) { delete[] s; }

/* ---- scenes -------------------------------------------------------- */

nrdr_status nrdr_scene_load(const char* path, nrdr_scene** out) {
  if (!path || !out) return null_argument("nrdr_scene_load");
  return wrap([&] { *out = new nrdr_scene{nrdr::Scene::load(path)}; });
}

nrdr_status nrdr_scene_example(uint64_t feature_seed, nrdr_scene** out) {
  if (!out) return null_argument("nrdr_scene_example");
  return wrap([&] { *out = new nrdr_scene{nrdr::Scene::benchmark(feature_seed)}; });
}

nrdr_status nrdr_scene_save(const nrdr_scene* scene, const char* path) {
  if (!scene || !path) return null_argument("nrdr_scene_save");
  return wrap([&] { scene->scene.save(path); });
}

nrdr_status nrdr_scene_without_actor(const nrdr_scene* scene, size_t actor_index,
                                     nrdr_scene** out) {
  if (!scene || !out) return null_argument("nrdr_scene_without_actor");
  return wrap(
      [&] { *out = new nrdr_scene{scene->scene.without_actor(actor_index)}; });
}

nrdr_status nrdr_scene_signed_distance(const nrdr_scene* scene,
                                       const double position[3], double time,
                                       double* out) {
  if (!scene || !position || !out)
    return null_argument("nrdr_scene_signed_distance");
  return wrap([&] {
    *out = scene->scene.sdf(
        nrdr::Vec3(position[0], position[1], position[2]), time);
  });
}

void nrdr_scene_free(nrdr_scene* scene) { delete scene; }

/* ---- point clouds --------------------------------------------------- */

nrdr_status nrdr_cloud_read(const char* path, nrdr_cloud** out) {
  if (!path || !out) return null_argument("nrdr_cloud_read");
  return wrap([&] {
    *out = new nrdr_cloud{
        nrdr::read_point_cloud(path, nrdr::scan_format_from_path(path))};
  });
}

nrdr_status nrdr_cloud_write(const nrdr_cloud* cloud, const char* path) {
  if (!cloud || !path) return null_argument("nrdr_cloud_write");
  return wrap([&] {
    nrdr::write_point_cloud(cloud->cloud, path,
                            nrdr::scan_format_from_path(path));
  });
}

size_t nrdr_cloud_size(const nrdr_cloud* cloud) {
  return cloud ? cloud->cloud.size() : 0;
}

nrdr_status nrdr_cloud_point(const nrdr_cloud* cloud, size_t index,
                             double out_xyz[3]) {
  if (!cloud || !out_xyz) return null_argument("nrdr_cloud_point");
  return wrap([&] {
    if (index >= cloud->cloud.size())
      throw nrdr::DataError("nrdr_cloud_point: index out of range");
    const nrdr::Vec3& p = cloud->cloud.points[index];
    out_xyz[0] = p.x();
    out_xyz[1] = p.y();
    out_xyz[2] = p.z();
  });
}

void nrdr_cloud_free(nrdr_cloud* cloud) { delete cloud; }

/* ---- radar scan files ------------------------------------------------ */

nrdr_status nrdr_scan_set_read(const char* path, nrdr_scan_set** out) {
  if (!path || !out) return null_argument("nrdr_scan_set_read");
  return wrap([&] {
    *out = new nrdr_scan_set{
        nrdr::read_scan_file(path, nrdr::scan_format_from_path(path))};
  });
}

size_t nrdr_scan_set_size(const nrdr_scan_set* scans) {
  return scans ? scans->set.scans.size() : 0;
}

size_t nrdr_scan_set_dropped(const nrdr_scan_set* scans) {
  return scans ? scans->set.dropped_invalid : 0;
}

nrdr_status nrdr_scan_set_cloud(const nrdr_scan_set* scans, size_t index,
                                nrdr_cloud** out) {
  if (!scans || !out) return null_argument("nrdr_scan_set_cloud");
  return wrap([&] {
    if (index >= scans->set.scans.size())
      throw nrdr::DataError("nrdr_scan_set_cloud: index out of range");
    *out = new nrdr_cloud{scans->set.scans[index].cloud};
  });
}

void nrdr_scan_set_free(nrdr_scan_set* scans) { delete scans; }

/* ---- rendering ------------------------------------------------------- */

nrdr_status nrdr_render_depth_csv(const nrdr_scene* scene, const char* radar_json,
                                  const double position[3], double yaw,
                                  double time, uint64_t seed,
                                  const char* out_path) {
  if (!scene || !position || !out_path)
    return null_argument("nrdr_render_depth_csv");
  return wrap([&] {
    const auto [radar, opacity] = parse_radar(radar_json);
    const nrdr::SensorPose pose = make_pose(position, yaw, time);
    const nrdr::RayBundle bundle = nrdr::build_ray_grid(pose, radar);
    const std::vector<nrdr::RayRender> renders =
        nrdr::render_bundle(scene->scene, bundle, radar, opacity, seed);
    std::ofstream csv(out_path, std::ios::binary);
    if (!csv)
      throw nrdr::DataError(std::string("cannot open for writing: ") + out_path);
    csv << "azimuth_rad,elevation_rad,expected_depth,opacity_sum\n";
    for (std::size_t i = 0; i < renders.size(); ++i) {
      const nrdr::Ray& ray = bundle.rays[i];
      csv << nrdr::format_double(ray.azimuth) << ','
          << nrdr::format_double(ray.elevation) << ','
          << nrdr::format_double(renders[i].expected_depth) << ','
          << nrdr::format_double(renders[i].opacity_sum) << '\n';
    }
    if (!csv) throw nrdr::DataError(std::string("write failed: ") + out_path);
  });
}

/* ---- metrics ---------------------------------------------------------- */

nrdr_status nrdr_eval_metrics(const nrdr_cloud* predictions,
                              const nrdr_cloud* truth, double gospa_cutoff,
                              char** out_json) {
  if (!predictions || !truth || !out_json)
    return null_argument("nrdr_eval_metrics");
  return wrap([&] {
    nrdr::GospaParams params;
    params.c = gospa_cutoff;
    params.validate();
    const nrdr::PointCloud& x = predictions->cloud;
    const nrdr::PointCloud& y = truth->cloud;
    const bool defined = !x.empty() && !y.empty();
    nrdr::Json j;
    j["chamfer"] = defined ? nrdr::Json(nrdr::chamfer(x, y)) : nrdr::Json(nullptr);
    j["emd"] = defined ? nrdr::Json(nrdr::emd(x, y)) : nrdr::Json(nullptr);
    const nrdr::GospaResult g = nrdr::gospa(x, y, params);
    nrdr::Json gj;
    gj["total"] = g.total;
    gj["localization"] = g.localization;
    gj["missed_cost"] = g.missed_cost;
    gj["false_cost"] = g.false_cost;
    gj["missed_count"] = g.missed_count;
    gj["false_count"] = g.false_count;
    j["gospa"] = gj;
    j["predictions"] = x.size();
    j["truth"] = y.size();
    *out_json = copy_string(j.dump(2) + "\n");
  });
}

/* ---- decoders ---------------------------------------------------------- */

nrdr_status nrdr_decoder_load(const char* path, nrdr_decoder** out) {
  if (!path || !out) return null_argument("nrdr_decoder_load");
  return wrap([&] { *out = new nrdr_decoder{nrdr::DecoderWeights::load(path)}; });
}

nrdr_status nrdr_decoder_save(const nrdr_decoder* decoder, const char* path) {
  if (!decoder || !path) return null_argument("nrdr_decoder_save");
  return wrap([&] { decoder->weights.save(path); });
}

nrdr_status nrdr_decoder_emit(const nrdr_decoder* decoder,
                              const nrdr_scene* scene, const char* radar_json,
                              const double position[3], double yaw, double time,
                              uint64_t render_seed, uint64_t sample_seed,
                              nrdr_cloud** out) {
  if (!decoder || !scene || !position || !out)
    return null_argument("nrdr_decoder_emit");
  return wrap([&] {
    const auto [radar, opacity] = parse_radar(radar_json);
    const nrdr::SensorPose pose = make_pose(position, yaw, time);
    const nrdr::RayBundle bundle = nrdr::build_ray_grid(pose, radar);
    const std::vector<nrdr::RayRender> renders =
        nrdr::render_bundle(scene->scene, bundle, radar, opacity, render_seed);
    const nrdr::DecoderConfig& cfg = decoder->weights.config;
    const nrdr::PredictionParams params =
        nrdr::decode(renders, decoder->weights, cfg);
    nrdr::PointCloud cloud =
        cfg.probabilistic
            ? nrdr::emit_probabilistic(params, cfg, radar, sample_seed)
            : nrdr::emit_deterministic(params, radar);
    *out = new nrdr_cloud{std::move(cloud)};
  });
}

void nrdr_decoder_free(nrdr_decoder* decoder) { delete decoder; }

/* ---- experiments -------------------------------------------------------- */

nrdr_status nrdr_fit(const char* config_path, const char* weights_path,
                     char** out_summary) {
  if (!config_path || !weights_path) return null_argument("nrdr_fit");
  return wrap([&] {
    const nrdr::ExperimentConfig cfg = nrdr::ExperimentConfig::load(config_path);
    const nrdr::FitResult result = nrdr::fit_from_config(cfg);
    result.weights.save(weights_path);
    if (out_summary) {
      nrdr::Json j;
      j["iterations"] = result.loss_curve.size();
      j["first_loss"] = result.loss_curve.front();
      j["final_loss"] = result.loss_curve.back();
      *out_summary = copy_string(j.dump(2) + "\n");
    }
  });
}

nrdr_status nrdr_run_experiment(const char* config_path,
                                const char* output_dir_override,
                                char** out_report) {
  if (!config_path) return null_argument("nrdr_run_experiment");
  return wrap([&] {
    nrdr::ExperimentConfig cfg = nrdr::ExperimentConfig::load(config_path);
    if (output_dir_override) {
      cfg.output_dir = output_dir_override;
      cfg.validate();
    }
    const nrdr::ExperimentResult result = nrdr::run_experiment(cfg);
    if (out_report) *out_report = copy_string(result.report_json);
  });
}

}  // extern "C"
