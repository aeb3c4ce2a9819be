#include "config_json.hpp"

#include <fstream>
#include <sstream>

#include "nrdr/errors.hpp"

namespace nrdr {

std::pair<RadarConfig, OpacityParams> radar_section_from_json(const Json& j) {
  const std::string w = "radar";
  require_object(j, w);
  check_keys(j, w,
             {"azimuth_min", "azimuth_max", "elevation_min", "elevation_max",
              "ray_divergence_az", "ray_divergence_el", "max_range",
              "num_samples_per_ray", "density_family", "max_offset",
              "confidence_threshold", "beta", "unnormalized_depth"});
  RadarConfig radar;
  radar.azimuth_min = get_number_or(j, w, "azimuth_min", radar.azimuth_min);
  radar.azimuth_max = get_number_or(j, w, "azimuth_max", radar.azimuth_max);
  radar.elevation_min =
      get_number_or(j, w, "elevation_min", radar.elevation_min);
  radar.elevation_max =
      get_number_or(j, w, "elevation_max", radar.elevation_max);
  radar.ray_divergence_az =
      get_number_or(j, w, "ray_divergence_az", radar.ray_divergence_az);
  radar.ray_divergence_el =
      get_number_or(j, w, "ray_divergence_el", radar.ray_divergence_el);
  radar.max_range = get_number_or(j, w, "max_range", radar.max_range);
  radar.num_samples_per_ray = static_cast<int>(
      get_int_or(j, w, "num_samples_per_ray", radar.num_samples_per_ray));
  if (j.contains("density_family"))
    radar.density_family =
        density_family_from_string(get_string(j, w, "density_family"));
  radar.max_offset = get_number_or(j, w, "max_offset", radar.max_offset);
  radar.confidence_threshold =
      get_number_or(j, w, "confidence_threshold", radar.confidence_threshold);

  OpacityParams opacity;
  opacity.beta = get_number_or(j, w, "beta", opacity.beta);
  opacity.unnormalized_depth =
      get_bool_or(j, w, "unnormalized_depth", opacity.unnormalized_depth);

  radar.validate();
  opacity.validate();
  return {radar, opacity};
}

Json radar_section_to_json(const RadarConfig& radar,
                           const OpacityParams& opacity) {
  Json j;
  j["azimuth_min"] = radar.azimuth_min;
  j["azimuth_max"] = radar.azimuth_max;
  j["elevation_min"] = radar.elevation_min;
  j["elevation_max"] = radar.elevation_max;
  j["ray_divergence_az"] = radar.ray_divergence_az;
  j["ray_divergence_el"] = radar.ray_divergence_el;
  j["max_range"] = radar.max_range;
  j["num_samples_per_ray"] = radar.num_samples_per_ray;
  j["density_family"] = to_string(radar.density_family);
  j["max_offset"] = radar.max_offset;
  j["confidence_threshold"] = radar.confidence_threshold;
  j["beta"] = opacity.beta;
  j["unnormalized_depth"] = opacity.unnormalized_depth;
  return j;
}

DecoderConfig decoder_config_from_json(const Json& j) {
  const std::string w = "decoder";
  require_object(j, w);
  check_keys(j, w,
             {"variant", "feature_dim", "hidden_dim", "num_heads",
              "num_layers", "max_offset", "probabilistic",
              "baseline_zero_offset", "num_queries", "query_position_scale"});
  DecoderConfig cfg;
  if (j.contains("variant"))
    cfg.variant = decoder_variant_from_string(get_string(j, w, "variant"));
  cfg.feature_dim =
      static_cast<int>(get_int_or(j, w, "feature_dim", cfg.feature_dim));
  cfg.hidden_dim =
      static_cast<int>(get_int_or(j, w, "hidden_dim", cfg.hidden_dim));
  cfg.num_heads =
      static_cast<int>(get_int_or(j, w, "num_heads", cfg.num_heads));
  cfg.num_layers =
      static_cast<int>(get_int_or(j, w, "num_layers", cfg.num_layers));
  cfg.max_offset = get_number_or(j, w, "max_offset", cfg.max_offset);
  cfg.probabilistic = get_bool_or(j, w, "probabilistic", cfg.probabilistic);
  cfg.baseline_zero_offset =
      get_bool_or(j, w, "baseline_zero_offset", cfg.baseline_zero_offset);
  cfg.num_queries =
      static_cast<int>(get_int_or(j, w, "num_queries", cfg.num_queries));
  cfg.query_position_scale =
      get_number_or(j, w, "query_position_scale", cfg.query_position_scale);
  cfg.validate();
  return cfg;
}

Json decoder_config_to_json(const DecoderConfig& cfg) {
  Json j;
  j["variant"] = to_string(cfg.variant);
  j["feature_dim"] = cfg.feature_dim;
  j["hidden_dim"] = cfg.hidden_dim;
  j["num_heads"] = cfg.num_heads;
  j["num_layers"] = cfg.num_layers;
  j["max_offset"] = cfg.max_offset;
  j["probabilistic"] = cfg.probabilistic;
  j["baseline_zero_offset"] = cfg.baseline_zero_offset;
  j["num_queries"] = cfg.num_queries;
  j["query_position_scale"] = cfg.query_position_scale;
  return j;
}

TrainConfig train_config_from_json(const Json& j) {
  const std::string w = "train";
  require_object(j, w);
  check_keys(j, w,
             {"iterations", "warmup_steps", "lr_max", "lr_min", "adam_beta1",
              "adam_beta2", "adam_eps", "loss_weight", "seed"});
  TrainConfig cfg;
  cfg.iterations =
      static_cast<int>(get_int_or(j, w, "iterations", cfg.iterations));
  cfg.warmup_steps =
      static_cast<int>(get_int_or(j, w, "warmup_steps", cfg.warmup_steps));
  cfg.lr_max = get_number_or(j, w, "lr_max", cfg.lr_max);
  cfg.lr_min = get_number_or(j, w, "lr_min", cfg.lr_min);
  cfg.adam_beta1 = get_number_or(j, w, "adam_beta1", cfg.adam_beta1);
  cfg.adam_beta2 = get_number_or(j, w, "adam_beta2", cfg.adam_beta2);
  cfg.adam_eps = get_number_or(j, w, "adam_eps", cfg.adam_eps);
  cfg.loss_weight = get_number_or(j, w, "loss_weight", cfg.loss_weight);
  cfg.seed = get_u64_or(j, w, "seed", cfg.seed);
  cfg.validate();
  return cfg;
}

Json train_config_to_json(const TrainConfig& cfg) {
  Json j;
  j["iterations"] = cfg.iterations;
  j["warmup_steps"] = cfg.warmup_steps;
  j["lr_max"] = cfg.lr_max;
  j["lr_min"] = cfg.lr_min;
  j["adam_beta1"] = cfg.adam_beta1;
  j["adam_beta2"] = cfg.adam_beta2;
  j["adam_eps"] = cfg.adam_eps;
  j["loss_weight"] = cfg.loss_weight;
  j["seed"] = cfg.seed;
  return j;
}

Json load_json_file(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + what + ": " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  Json j = Json::parse(buf.str(), nullptr, false);
  if (j.is_discarded())
    throw ConfigError("invalid JSON in " + what + ": " + path);
  return j;
}

}  // namespace nrdr
