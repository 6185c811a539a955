#pragma once

#include <nlohmann/json.hpp>
#include <string>

#include "pnpcert/certificate.hpp"
#include "pnpcert/components.hpp"
#include "pnpcert/synthesis.hpp"

namespace pnpcert {

nlohmann::json to_json(const Mat& m);
Mat mat_from_json(const nlohmann::json& j);

nlohmann::json to_json(const StateSpaceModel& sys);
StateSpaceModel model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MultiplierFilter& m);
MultiplierFilter multiplier_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ComponentReport& r);
nlohmann::json to_json(const Certificate& c);
nlohmann::json to_json(const SynthesisResult& r);

/// Component list file: [{"id":..., "type":"line"|"gfm", ...params}].
std::vector<std::pair<std::string, StateSpaceModel>> components_from_json(
    const nlohmann::json& j, double omega0);

GfmParams gfm_params_from_json(const nlohmann::json& j, double omega0);

}  // namespace pnpcert
