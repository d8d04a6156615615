#pragma once

// Staged evaluation of narrative prototypes.
//
//   1. pattern      candidate events from the event label, type or supertype
//   2. objective    KG-only evaluation; subjective atoms are unknown
//   3. index        Bloom-filter pruning of subjective atoms
//   4. documents    witness assessment over viewpoint partitions
//
// An event matches when some assignment of the declared variables to its
// participants makes the refinement expression true.

#include "narratekg/attribution_index.hpp"
#include "narratekg/config.hpp"
#include "narratekg/corpus.hpp"
#include "narratekg/knowledge_graph.hpp"
#include "narratekg/prototype.hpp"
#include "narratekg/witness.hpp"

#include <json.hpp>

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace narratekg {

/// Planning failed; problems() lists every unresolved name or misuse.
class PlanningError : public Error {
public:
    explicit PlanningError(std::vector<std::string> problems);
    const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
    std::vector<std::string> problems_;
};

struct PlannedAtom {
    enum class Class { Structural, Objective, Subjective };

    std::size_t id = 0;
    dsl::Atom atom;
    std::string text;
    Class cls = Class::Structural;
    /// Attribution name for Objective/Subjective atoms.
    std::string attribution;
    AttributionKind kind = AttributionKind::EntityInEvent;
    /// Subjective: the listed viewpoints, or every viewpoint when unqualified.
    std::vector<ViewpointId> viewpoints;
    /// Unqualified subjective atom: true when it holds in at least one viewpoint.
    bool any_viewpoint = false;
    /// Sits inside EXISTS.
    bool existential = false;
    bool index_prunable = false;
    /// Documents of the candidate events in the atom's viewpoints.
    std::size_t estimated_documents = 0;
};

struct PlanNode {
    dsl::Expr::Op op = dsl::Expr::Op::Atom;
    std::size_t atom = 0;
    std::vector<PlanNode> children;
};

struct QueryPlan {
    dsl::Prototype prototype;
    std::vector<EventLabel> candidates;
    std::vector<PlannedAtom> atoms;
    /// Atom ids, cheapest first. Objective checks always precede subjective ones.
    std::vector<std::size_t> objective_checks;
    std::vector<std::size_t> subjective_checks;
    /// Refinement tree with the children of AND/OR reordered by cost.
    PlanNode root;

    std::string describe() const;
};

/// Resolves names and classifies atoms. Throws PlanningError.
QueryPlan plan(const dsl::Prototype& prototype, const KnowledgeGraph& kg, const AttributionIndexSet* index = nullptr,
               const CorpusStore* corpus = nullptr);

struct ExecutionContext {
    const KnowledgeGraph& kg;
    const CorpusStore& corpus;
    /// No pruning when null.
    const AttributionIndexSet* index;
    const Assessor& assessor;
    const EngineConfig& config;
};

struct Evidence {
    std::size_t atom = 0;
    std::string attribution;
    /// Participant, or empty for event attributions.
    EntityId participant;
    ViewpointId viewpoint;
    bool holds = false;
    std::size_t witness_count = 0;
    std::vector<Witness> witnesses;
};

struct EventMatch {
    EventLabel event;
    std::map<std::string, EntityId> bindings;
    std::vector<std::string> justification;
    std::vector<Evidence> evidence;
};

struct StageCounters {
    std::size_t after_pattern = 0;
    std::size_t after_objective = 0;
    std::size_t after_index = 0;
    std::size_t matched = 0;
    std::size_t index_lookups = 0;
    std::size_t index_prunes = 0;
    std::size_t documents_assessed = 0;
    std::size_t assessments_reused = 0;
    std::size_t documents_skipped = 0;
    /// Assessor calls made on behalf of each planned atom.
    std::vector<std::size_t> documents_per_atom;
};

struct StageTimings {
    double pattern_ms = 0;
    double objective_ms = 0;
    double index_ms = 0;
    double documents_ms = 0;
    double total_ms = 0;
};

struct QueryResult {
    std::vector<EventMatch> matches;  // ordered by event label
    StageCounters counters;
    StageTimings timings;
    std::vector<std::string> warnings;

    std::vector<EventLabel> matched_events() const;
};

QueryResult execute(const QueryPlan& plan, const ExecutionContext& ctx);

/// Brute force: no index, no early stop, no caching, sequential.
QueryResult execute_reference(const QueryPlan& plan, const ExecutionContext& ctx);

nlohmann::ordered_json to_json(const QueryPlan& plan, const QueryResult& result);

/// Runs the assessor over every event collection and records, per
/// attribution and viewpoint, each participant with at least one witness.
/// Event attributions are keyed by the event label.
std::vector<AttributionPositive> collect_positives_by_scan(const KnowledgeGraph& kg, const CorpusStore& corpus,
                                                           const Assessor& assessor, const EngineConfig& config);

/// Subjective attributions declared in the schema.
std::set<std::string> subjective_attributions(const KnowledgeGraph& kg);

}  // namespace narratekg
