#include "narratekg/workspace.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

namespace narratekg {

namespace fs = std::filesystem;

namespace {

void write_atomically(const fs::path& target, const std::string& content) {
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out) throw Error("failed writing '" + tmp.string() + "'");
    }
    fs::rename(tmp, target);
}

void require_file(const std::string& path) {
    if (!fs::is_regular_file(path)) throw NotFoundError("no such file: " + path);
}

CorpusIngestOptions corpus_options(const KnowledgeGraph& kg, const EngineConfig& config) {
    CorpusIngestOptions opts;
    opts.outlet_viewpoints = config.outlet_viewpoints;
    opts.known_viewpoints = kg.viewpoint_ids();
    opts.filters = config.corpus_filters;
    return opts;
}

}  // namespace

IngestSummary ingest_workspace(const fs::path& root, const std::string& kg_path, const std::string& corpus_path,
                               const std::string& config_path) {
    require_file(kg_path);
    require_file(corpus_path);
    if (!config_path.empty()) require_file(config_path);

    const EngineConfig config = config_path.empty() ? EngineConfig::defaults() : EngineConfig::load(config_path);
    const KnowledgeGraph kg = load_kg(kg_path);
    const CorpusStore corpus = load_corpus(corpus_path, corpus_options(kg, config));

    WorkspacePaths paths{root};
    fs::create_directories(paths.logs());
    std::ostringstream kg_out, corpus_out;
    kg.write(kg_out);
    corpus.write(corpus_out);
    write_atomically(paths.kg(), kg_out.str());
    write_atomically(paths.corpus(), corpus_out.str());
    write_atomically(paths.config(), config.to_json().dump(2) + "\n");
    // A stale index would describe another corpus.
    fs::remove(paths.index());
    fs::remove(paths.positives_log());

    IngestSummary s;
    s.events = kg.events().size();
    s.entities = kg.entities().size();
    s.documents = corpus.size();
    s.collections = corpus.collections().size();
    s.dropped = corpus.dropped();
    s.warnings = kg.warnings();
    return s;
}

Workspace open_workspace(const fs::path& root) {
    WorkspacePaths paths{root};
    if (!fs::is_directory(root)) throw NotFoundError("no workspace at '" + root.string() + "'");
    for (const auto& p : {paths.kg(), paths.corpus(), paths.config()}) {
        if (!fs::is_regular_file(p)) throw NotFoundError("workspace is not ingested: missing " + p.string());
    }
    Workspace ws{paths, load_kg(paths.kg().string()), {}, EngineConfig::load(paths.config().string()), std::nullopt};
    // The snapshot already carries resolved viewpoints; filters were applied at ingest.
    CorpusIngestOptions opts;
    opts.known_viewpoints = ws.kg.viewpoint_ids();
    ws.corpus = load_corpus(paths.corpus().string(), opts);
    if (fs::is_regular_file(paths.index())) ws.index = AttributionIndexSet::load(paths.index().string());
    return ws;
}

void log_run(const WorkspacePaths& paths, const std::string& command, const EngineConfig& config) {
    fs::create_directories(paths.logs());
    std::ofstream out(paths.run_log(), std::ios::app);
    if (!out) return;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    nlohmann::ordered_json j;
    j["unix_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    j["command"] = command;
    j["config"] = config.to_json();
    out << j.dump() << '\n';
}

std::unique_ptr<Assessor> make_assessor(const EngineConfig& config) {
    if (config.assessor.kind == AssessorConfig::Kind::Remote) {
        return std::make_unique<RemoteAssessor>(config.assessor.url, config.assessor.timeout);
    }
    return std::make_unique<BaselineAssessor>(config.baseline);
}

}  // namespace narratekg
