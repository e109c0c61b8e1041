#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cdt/experiment.hpp"

namespace cdt {

/// One documented configuration key.
struct ConfigKey {
    std::string_view name;
    std::string_view type;
    std::string_view description;
};

/// Every accepted key, in documentation order.
const std::vector<ConfigKey>& config_schema();

/// Parses a JSON document of dotted keys ("trainer.steps": 200). Nested objects
/// are flattened with '.', so {"trainer": {"steps": 200}} is equivalent.
/// Unknown keys and type mismatches raise ConfigError naming the key.
/// The result is not validated; call ExperimentPlan::validate().
ExperimentPlan parse_plan(std::string_view json_text, ExperimentPlan base = {});
ExperimentPlan load_plan(const std::string& path, ExperimentPlan base = {});

/// Canonical JSON rendering of a plan (flat keys, sorted).
std::string plan_to_json(const ExperimentPlan& plan);

} // namespace cdt
