#pragma once

// JSON (de)serialization for the config structs. Parsers are strict: unknown
// keys are errors, every field has a default.

#include <utility>

#include "nrdr/decoder.hpp"
#include "nrdr/geometry.hpp"
#include "nrdr/rendering.hpp"
#include "json_util.hpp"

namespace nrdr {

// The radar section also carries the rendering knobs (beta,
// unnormalized_depth), so both structs parse from one object.
std::pair<RadarConfig, OpacityParams> radar_section_from_json(const Json& j);
Json radar_section_to_json(const RadarConfig& radar, const OpacityParams& opacity);

DecoderConfig decoder_config_from_json(const Json& j);
Json decoder_config_to_json(const DecoderConfig& cfg);

TrainConfig train_config_from_json(const Json& j);
Json train_config_to_json(const TrainConfig& cfg);

Json load_json_file(const std::string& path, const std::string& what);

}  // namespace nrdr
