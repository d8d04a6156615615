#pragma once

// Shared helpers for the test binaries: fixture loading, random workspaces,
// random prototypes and the calibration corpus used by the bench tests.

#include "narratekg/attribution_index.hpp"
#include "narratekg/config.hpp"
#include "narratekg/corpus.hpp"
#include "narratekg/knowledge_graph.hpp"
#include "narratekg/prototype.hpp"
#include "narratekg/query.hpp"
#include "narratekg/witness.hpp"

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

using namespace narratekg;

std::filesystem::path fixture_dir();
std::filesystem::path fixture_path(const std::string& name);
std::string read_file(const std::filesystem::path& p);

/// Everything needed to run queries in-process.
struct World {
    KnowledgeGraph kg;
    CorpusStore corpus;
    EngineConfig config;
    std::unique_ptr<Assessor> assessor;
    std::optional<AttributionIndexSet> index;

    ExecutionContext context(bool with_index = true) const;
    /// Scans the corpus with the assessor and builds the index from the positives.
    void build_index();
    QueryResult run(const std::string& prototype, bool with_index = true) const;
    QueryResult run_reference(const std::string& prototype) const;
};

KnowledgeGraph kg_from_text(const std::string& jsonl);
CorpusStore corpus_from_docs(const std::vector<Document>& docs);

/// The shipped fixture: KG, corpus and config from data/fixture.
World fixture_world();
/// Fixture KG and config with a caller-supplied corpus.
World fixture_world_with(const std::vector<Document>& docs);
/// Documents of the shipped fixture corpus with viewpoints resolved.
std::vector<Document> fixture_documents();

struct NamedPrototypeText {
    std::string name;
    std::string text;
};
/// The four bench prototypes from data/fixture/prototypes.txt.
std::vector<NamedPrototypeText> fixture_prototypes();

using Rng = std::mt19937_64;

/// Small random workspace: <= 10 events, <= 8 entities, <= 30 documents,
/// a private lexicon (s0 "signal zero", s1 "signal one", sev "signal event").
struct RandomWorldOptions {
    std::size_t max_events = 10;
    std::size_t max_entities = 8;
    std::size_t max_documents = 30;
};
World random_world(Rng& rng, const RandomWorldOptions& options = {});
/// Generates a document for `collection` that witnesses `attribution` for
/// `entity_name` (empty for event attributions) under the random lexicon.
Document random_positive(Rng& rng, const std::string& doc_id, const std::string& collection,
                         const std::set<ViewpointId>& viewpoints, const std::string& attribution,
                         const std::string& entity_name);

/// Random prototype that plans cleanly against `w`.
std::string random_prototype(Rng& rng, const World& w);

/// Random syntactically valid AST over arbitrary names, for round trips.
dsl::Prototype random_ast(Rng& rng);

/// Fixture KG with a large, viewpoint-skewed corpus whose positives are
/// sparse: >= `per_collection` documents per collection.
World calibration_world(std::size_t per_collection = 200);

std::vector<std::string> labels(const QueryResult& r);

}  // namespace testsupport
