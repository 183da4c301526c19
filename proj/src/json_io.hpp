#pragma once

// Internal JSON bridging shared by camera.cpp and problem_io.cpp.

#include <json.hpp>

#include "mcpa/camera.hpp"

namespace mcpa {

nlohmann::ordered_json rig_to_json(const RigConfig& rig);
RigConfig rig_from_json(const nlohmann::json& j);

}  // namespace mcpa
