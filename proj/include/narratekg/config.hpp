#pragma once

#include "narratekg/attribution_index.hpp"
#include "narratekg/corpus.hpp"
#include "narratekg/witness.hpp"

#include <json.hpp>

#include <chrono>
#include <map>
#include <set>
#include <string>

namespace narratekg {

struct AssessorConfig {
    enum class Kind { Baseline, Remote };
    Kind kind = Kind::Baseline;
    std::string url = "http://127.0.0.1:8080";
    std::chrono::milliseconds timeout{5000};
};

/// Everything a run can be tuned with, loaded from one JSON file. Missing
/// keys keep their defaults.
struct EngineConfig {
    WitnessPolicy witness;
    BaselineConfig baseline = BaselineConfig::defaults();
    std::map<std::string, std::string> question_templates;
    std::map<std::string, std::set<ViewpointId>> outlet_viewpoints;
    CorpusFilters corpus_filters;
    IndexBuildOptions index;
    AssessorConfig assessor;

    static EngineConfig defaults();
    /// Throws SchemaError on unknown keys, wrong types or out-of-range values.
    static EngineConfig from_json(const nlohmann::json& j);
    static EngineConfig load(const std::string& path);
    nlohmann::ordered_json to_json() const;

    /// Template for an attribution; a generic question when none is configured.
    std::string question_template(const std::string& attribution) const;
};

}  // namespace narratekg
