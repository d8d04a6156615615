#pragma once

// Event-centric knowledge graph KG(E ∪ Entities ∪ Types, A).
//
// Nodes are events, entities and event types. Edges are typed: event
// functions (has_type, has_participant, has_role with the role label as
// payload), supertype links, objective attributions and has_collection.
// The graph is built once by ingest_kg() and is read-only afterwards.

#include "narratekg/model.hpp"

#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace narratekg {

enum class NodeKind { Event, Entity, EventType };

struct NodeRef {
    NodeKind kind;
    std::string id;
    auto operator<=>(const NodeRef&) const = default;
};

struct Edge {
    std::string label;  // has_type, has_participant, has_role, supertype, has_collection or an attribution name
    NodeRef source;
    std::string target;  // node id, or collection id for has_collection
    std::optional<std::string> payload;
    auto operator<=>(const Edge&) const = default;
};

/// Objective attribution fact. `entity` is empty for event attributions.
struct ObjectiveAttributionEdge {
    std::string attribution;
    EventLabel event;
    std::optional<EntityId> entity;
    bool value = true;
    auto operator<=>(const ObjectiveAttributionEdge&) const = default;
};

/// Built-in structural predicates. They are always registered as objective
/// and are evaluated directly from the event structure.
inline constexpr std::string_view kBuiltinRoleEquals = "role_equals";
inline constexpr std::string_view kBuiltinParticipantCountAtLeast = "participant_count_at_least";
inline constexpr std::string_view kBuiltinParticipantCountAtMost = "participant_count_at_most";
inline constexpr std::string_view kBuiltinTimeWithin = "time_within";
inline constexpr std::string_view kBuiltinLocationEquals = "location_equals";

bool is_builtin_predicate(std::string_view name);

/// Arguments of an objective check beyond the subject. Built-ins take their
/// parameters here (role label, count, dates, location id).
struct ObjectiveQuery {
    std::string attribution;
    EventLabel event;
    std::optional<EntityId> entity;
    std::vector<Value> args;
};

class KnowledgeGraph {
public:
    const EventTypeTaxonomy& taxonomy() const noexcept { return taxonomy_; }
    const std::map<EventLabel, Event>& events() const noexcept { return events_; }
    const std::map<EntityId, Entity>& entities() const noexcept { return entities_; }
    const std::map<LocationId, Location>& locations() const noexcept { return locations_; }
    const std::map<ViewpointId, Viewpoint>& viewpoints() const noexcept { return viewpoints_; }
    const std::map<std::string, AttributionSignature>& attribution_schema() const noexcept { return schema_; }
    const std::set<ObjectiveAttributionEdge>& objective_edges() const noexcept { return objective_; }
    const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    /// Throws NotFoundError.
    const Event& event(const EventLabel& label) const;
    const Entity& entity(const EntityId& id) const;
    const AttributionSignature* find_attribution(std::string_view name) const;

    std::set<ViewpointId> viewpoint_ids() const;

    /// Events whose type set contains `type` (as_supertype=false) or
    /// intersects its downward closure (as_supertype=true). Ordered by label.
    std::vector<const Event*> events_matching_type(const TypeId& type, bool as_supertype) const;

    /// Closed-world evaluation of an objective attribution or built-in
    /// predicate. Entity attributions read the entity attribute at the
    /// event's time. Throws MisuseError for subjective names.
    bool check_objective(const ObjectiveQuery& query) const;
    bool check_objective(const std::string& attribution, const EventLabel& event,
                         const std::optional<EntityId>& entity = std::nullopt) const;

    std::optional<CollectionId> collection_of(const EventLabel& label) const;

    /// Nodes and typed edges of the directed-graph view.
    std::set<NodeRef> nodes() const;
    std::set<Edge> edges() const;

    /// Writes the graph back in the KG file format, one record per line,
    /// in a canonical order.
    void write(std::ostream& out) const;

    std::size_t event_count() const noexcept { return events_.size(); }

private:
    friend class KnowledgeGraphBuilder;

    EventTypeTaxonomy taxonomy_;
    std::map<EventLabel, Event> events_;
    std::map<EntityId, Entity> entities_;
    std::map<LocationId, Location> locations_;
    std::map<ViewpointId, Viewpoint> viewpoints_;
    std::map<std::string, AttributionSignature> schema_;
    std::set<ObjectiveAttributionEdge> objective_;
    std::vector<std::string> warnings_;
};

/// Parses the line-delimited KG format. All-or-nothing: the first invalid
/// record aborts ingestion with a SchemaError carrying its line number.
KnowledgeGraph ingest_kg(std::istream& in);
KnowledgeGraph load_kg(const std::string& path);

}  // namespace narratekg
