#pragma once

// On-disk workspace: validated snapshots plus index and logs, all under one
// directory.
//
//   <root>/kg.jsonl              knowledge graph snapshot
//   <root>/corpus.jsonl          corpus snapshot, viewpoints resolved
//   <root>/config.json           effective engine config
//   <root>/index.bin             attribution index (build-index)
//   <root>/logs/positives.jsonl  positives found by the last scan
//   <root>/logs/runs.jsonl       one line per command with its effective config

#include "narratekg/attribution_index.hpp"
#include "narratekg/config.hpp"
#include "narratekg/corpus.hpp"
#include "narratekg/knowledge_graph.hpp"
#include "narratekg/witness.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace narratekg {

struct WorkspacePaths {
    std::filesystem::path root;

    std::filesystem::path kg() const { return root / "kg.jsonl"; }
    std::filesystem::path corpus() const { return root / "corpus.jsonl"; }
    std::filesystem::path config() const { return root / "config.json"; }
    std::filesystem::path index() const { return root / "index.bin"; }
    std::filesystem::path logs() const { return root / "logs"; }
    std::filesystem::path positives_log() const { return logs() / "positives.jsonl"; }
    std::filesystem::path run_log() const { return logs() / "runs.jsonl"; }
};

struct Workspace {
    WorkspacePaths paths;
    KnowledgeGraph kg;
    CorpusStore corpus;
    EngineConfig config;
    std::optional<AttributionIndexSet> index;
};

struct IngestSummary {
    std::size_t events = 0;
    std::size_t entities = 0;
    std::size_t documents = 0;
    std::size_t collections = 0;
    std::size_t dropped = 0;
    std::vector<std::string> warnings;
};

/// Validates the inputs and writes the snapshots. Nothing is written when
/// validation fails.
IngestSummary ingest_workspace(const std::filesystem::path& root, const std::string& kg_path,
                               const std::string& corpus_path, const std::string& config_path);

/// Loads the snapshots, and the index when present. Throws NotFoundError
/// when the workspace has not been ingested.
Workspace open_workspace(const std::filesystem::path& root);

/// Appends one line to the run log.
void log_run(const WorkspacePaths& paths, const std::string& command, const EngineConfig& config);

std::unique_ptr<Assessor> make_assessor(const EngineConfig& config);

}  // namespace narratekg
