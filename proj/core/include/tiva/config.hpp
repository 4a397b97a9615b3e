#pragma once

#include "tiva/sim.hpp"

#include <string>

namespace tiva {

// Parses a JSON configuration overlaying the shipped defaults; unknown keys
// are rejected so typos fail loudly.
LabConfig load_config_json(const std::string& json_text);

LabConfig load_config_file(const std::string& path);

// Serialization of the effective configuration (round-trips through
// load_config_json).
std::string config_to_json(const LabConfig& config);

}  // namespace tiva
