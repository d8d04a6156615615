#include "narratekg/config.hpp"

#include "narratekg/error.hpp"

#include <fstream>

namespace narratekg {

namespace {

using nlohmann::json;

template <typename T>
T get(const json& j, const char* key, T fallback) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw SchemaError(std::string("config key '") + key + "' has the wrong type");
    }
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* where) {
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
            throw SchemaError(std::string("unknown config key '") + key + "' in " + where);
        }
    }
}

}  // namespace

EngineConfig EngineConfig::defaults() {
    EngineConfig c;
    c.question_templates = {
        {"is_aggressor", "Who was an aggressor in <EVENT_MASK>"},
        {"is_threat", "Who was a threat in <EVENT_MASK>"},
        {"is_enemy", "Who was an enemy in <EVENT_MASK>"},
        {"is_war_criminal", "Who was a war criminal in <EVENT_MASK>"},
    };
    return c;
}

std::string EngineConfig::question_template(const std::string& attribution) const {
    if (auto it = question_templates.find(attribution); it != question_templates.end()) return it->second;
    return "Who is described by " + attribution + " in " + std::string(kEventMask);
}

EngineConfig EngineConfig::from_json(const json& j) {
    if (!j.is_object()) throw SchemaError("config must be a JSON object");
    check_keys(j, {"witness", "baseline", "question_templates", "outlets", "corpus_filters", "index", "assessor"},
               "config");
    EngineConfig c = defaults();

    if (auto it = j.find("witness"); it != j.end()) {
        const auto& w = *it;
        check_keys(w, {"confidence_threshold", "min_witnesses", "max_reported", "error_policy", "parallelism"},
                   "witness");
        c.witness.confidence_threshold = get(w, "confidence_threshold", c.witness.confidence_threshold);
        c.witness.min_witnesses = get(w, "min_witnesses", c.witness.min_witnesses);
        c.witness.max_reported = get(w, "max_reported", c.witness.max_reported);
        c.witness.parallelism = get(w, "parallelism", c.witness.parallelism);
        const auto policy = get<std::string>(w, "error_policy", "skip-document");
        if (policy == "skip-document") {
            c.witness.error_policy = ErrorPolicy::SkipDocument;
        } else if (policy == "fail-query") {
            c.witness.error_policy = ErrorPolicy::FailQuery;
        } else {
            throw SchemaError("witness.error_policy must be 'skip-document' or 'fail-query'");
        }
    }
    if (c.witness.confidence_threshold < 0.0 || c.witness.confidence_threshold > 1.0) {
        throw SchemaError("witness.confidence_threshold must be in [0, 1]");
    }
    if (c.witness.min_witnesses < 1) throw SchemaError("witness.min_witnesses must be at least 1");
    if (c.witness.parallelism < 1) throw SchemaError("witness.parallelism must be at least 1");

    if (auto it = j.find("baseline"); it != j.end()) {
        const auto& b = *it;
        check_keys(b, {"lexicon", "negation_cues", "negation_window", "canonicalization_threshold"}, "baseline");
        c.baseline.lexicon = get(b, "lexicon", c.baseline.lexicon);
        c.baseline.negation_cues = get(b, "negation_cues", c.baseline.negation_cues);
        c.baseline.negation_window = get(b, "negation_window", c.baseline.negation_window);
        c.baseline.canonicalization_threshold =
            get(b, "canonicalization_threshold", c.baseline.canonicalization_threshold);
    }
    c.question_templates = get(j, "question_templates", c.question_templates);
    for (const auto& [attribution, tmpl] : c.question_templates) instantiate_template(tmpl, "x");
    c.outlet_viewpoints = get(j, "outlets", c.outlet_viewpoints);

    if (auto it = j.find("corpus_filters"); it != j.end()) {
        const auto& f = *it;
        check_keys(f, {"dedup_headline_similarity", "date_window"}, "corpus_filters");
        if (f.contains("dedup_headline_similarity") && !f["dedup_headline_similarity"].is_null()) {
            c.corpus_filters.dedup_headline_similarity = get(f, "dedup_headline_similarity", 1.0);
        }
        if (f.contains("date_window") && !f["date_window"].is_null()) {
            const auto& w = f["date_window"];
            c.corpus_filters.date_window = TimeSpec::interval(Date::parse(get<std::string>(w, "start", "")),
                                                              Date::parse(get<std::string>(w, "end", "")));
        }
    }
    if (auto it = j.find("index"); it != j.end()) {
        const auto& x = *it;
        check_keys(x, {"fpr", "capacity", "seed"}, "index");
        c.index.target_fpr = get(x, "fpr", c.index.target_fpr);
        c.index.capacity_hint = get(x, "capacity", c.index.capacity_hint);
        c.index.seed = get(x, "seed", c.index.seed);
        if (!(c.index.target_fpr > 0.0 && c.index.target_fpr < 1.0)) throw SchemaError("index.fpr must be in (0, 1)");
    }
    if (auto it = j.find("assessor"); it != j.end()) {
        const auto& a = *it;
        check_keys(a, {"kind", "url", "timeout_ms"}, "assessor");
        const auto kind = get<std::string>(a, "kind", "baseline");
        if (kind == "baseline") {
            c.assessor.kind = AssessorConfig::Kind::Baseline;
        } else if (kind == "remote") {
            c.assessor.kind = AssessorConfig::Kind::Remote;
        } else {
            throw SchemaError("assessor.kind must be 'baseline' or 'remote'");
        }
        c.assessor.url = get(a, "url", c.assessor.url);
        c.assessor.timeout = std::chrono::milliseconds(get<long long>(a, "timeout_ms", c.assessor.timeout.count()));
    }
    return c;
}

EngineConfig EngineConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open config file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("config file '" + path + "' is not valid JSON: " + e.what());
    }
    return from_json(j);
}

nlohmann::ordered_json EngineConfig::to_json() const {
    nlohmann::ordered_json j;
    j["witness"] = {{"confidence_threshold", witness.confidence_threshold},
                    {"min_witnesses", witness.min_witnesses},
                    {"max_reported", witness.max_reported},
                    {"error_policy", witness.error_policy == ErrorPolicy::SkipDocument ? "skip-document" : "fail-query"},
                    {"parallelism", witness.parallelism}};
    j["baseline"] = {{"lexicon", baseline.lexicon},
                     {"negation_cues", baseline.negation_cues},
                     {"negation_window", baseline.negation_window},
                     {"canonicalization_threshold", baseline.canonicalization_threshold}};
    j["question_templates"] = question_templates;
    j["outlets"] = outlet_viewpoints;
    nlohmann::ordered_json filters = nlohmann::ordered_json::object();
    filters["dedup_headline_similarity"] =
        corpus_filters.dedup_headline_similarity ? nlohmann::ordered_json(*corpus_filters.dedup_headline_similarity)
                                                 : nlohmann::ordered_json(nullptr);
    if (corpus_filters.date_window) {
        filters["date_window"] = {{"start", corpus_filters.date_window->start().to_string()},
                                  {"end", corpus_filters.date_window->end().to_string()}};
    } else {
        filters["date_window"] = nullptr;
    }
    j["corpus_filters"] = std::move(filters);
    j["index"] = {{"fpr", index.target_fpr}, {"capacity", index.capacity_hint}, {"seed", index.seed}};
    j["assessor"] = {{"kind", assessor.kind == AssessorConfig::Kind::Baseline ? "baseline" : "remote"},
                     {"url", assessor.url},
                     {"timeout_ms", assessor.timeout.count()}};
    return j;
}

}  // namespace narratekg
