#pragma once

// Domain types for events, participants, roles, attributions and viewpoints.
//
// Everything here is a plain value type. Instances are built by the
// knowledge-graph ingestion and are immutable afterwards, so they can be
// shared freely between concurrent readers.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace narratekg {

using TypeId = std::string;
using RoleLabel = std::string;
using EntityId = std::string;
using EventLabel = std::string;
using LocationId = std::string;
using ViewpointId = std::string;
using CollectionId = std::string;

/// Calendar day, stored as days since 1970-01-01 (proleptic Gregorian).
class Date {
public:
    constexpr Date() = default;
    constexpr explicit Date(std::int32_t days_since_epoch) : days_(days_since_epoch) {}

    /// Parses "YYYY-MM-DD". Throws SchemaError on malformed or impossible dates.
    static Date parse(std::string_view text);
    static Date from_ymd(int year, unsigned month, unsigned day);

    constexpr std::int32_t days() const noexcept { return days_; }
    std::string to_string() const;

    constexpr auto operator<=>(const Date&) const = default;

private:
    std::int32_t days_ = 0;
};

struct Interval {
    Date start;
    Date end;
    auto operator<=>(const Interval&) const = default;
};

/// Either a single day or a closed interval of days.
class TimeSpec {
public:
    TimeSpec() = default;
    static TimeSpec point(Date d) { return TimeSpec(d); }
    /// Throws DomainError when start > end.
    static TimeSpec interval(Date start, Date end);

    bool is_point() const noexcept { return std::holds_alternative<Date>(value_); }
    Date start() const noexcept;
    Date end() const noexcept;

    /// Closed-interval overlap; a point is the interval [p, p].
    bool overlaps(const TimeSpec& other) const noexcept;

    std::string to_string() const;
    auto operator<=>(const TimeSpec&) const = default;

private:
    explicit TimeSpec(Date d) : value_(d) {}
    explicit TimeSpec(Interval i) : value_(i) {}
    std::variant<Date, Interval> value_;
};

/// Attribute value of an entity. Strings, numbers and booleans cover the
/// properties used by the query language.
using Value = std::variant<bool, double, std::string>;

std::string value_to_string(const Value& v);

struct Location {
    LocationId id;
    std::string name;
    std::optional<LocationId> parent;
    auto operator<=>(const Location&) const = default;
};

struct AttributeValue {
    std::string name;
    Value value;
    std::optional<TimeSpec> qualifier;
    auto operator<=>(const AttributeValue&) const = default;
};

struct Entity {
    EntityId id;
    std::string name;
    std::set<std::string> aliases;  // always contains name
    std::vector<AttributeValue> attributes;

    auto operator<=>(const Entity&) const = default;
};

/// Looks up attribute `name` for the time `at`. A qualified value wins when
/// its qualifier overlaps `at`; otherwise the unqualified value (if any) acts
/// as the default. For "name", Entity::name is the default unless an
/// unqualified "name" attribute overrides it.
std::optional<Value> attribute_at(const Entity& entity, std::string_view name, const TimeSpec& at);

/// Checks per-entity attribute invariants: at most one unqualified value per
/// name and no overlapping qualifiers for the same name. Throws SchemaError.
void validate_entity(const Entity& entity);

struct RoleAssignment {
    EntityId entity;
    RoleLabel role;
    auto operator<=>(const RoleAssignment&) const = default;
};

struct Event {
    EventLabel label;
    TimeSpec time;
    LocationId location;
    std::set<TypeId> types;
    std::set<EntityId> participants;
    std::vector<RoleAssignment> role_assignments;
    std::optional<CollectionId> collection;

    auto operator<=>(const Event&) const = default;
};

/// Supertype hierarchy over event types with per-type permissible roles.
class EventTypeTaxonomy {
public:
    void add_type(const TypeId& type);
    void add_role(const RoleLabel& role);
    /// Both endpoints must already be registered types.
    void add_supertype(const TypeId& child, const TypeId& parent);
    void add_roles(const TypeId& type, const std::set<RoleLabel>& roles);

    bool has_type(const TypeId& type) const { return types_.contains(type); }
    bool has_role(const RoleLabel& role) const { return role_vocabulary_.contains(role); }
    const std::set<TypeId>& types() const noexcept { return types_; }
    const std::set<RoleLabel>& role_vocabulary() const noexcept { return role_vocabulary_; }
    const std::set<std::pair<TypeId, TypeId>>& supertype_edges() const noexcept { return edges_; }
    const std::map<TypeId, std::set<RoleLabel>>& roles_by_type() const noexcept { return roles_; }

    /// roles(t); empty when no schema was declared. Throws SchemaError for unknown t.
    const std::set<RoleLabel>& roles(const TypeId& type) const;

    /// `type` plus every transitive subtype.
    std::set<TypeId> downward_closure(const TypeId& type) const;

    /// Kahn topological order (parents before children). Throws SchemaError on a cycle.
    std::vector<TypeId> topological_order() const;

    /// Checks the DAG property and that every role in roles_by_type is in the vocabulary.
    void validate() const;

    bool operator==(const EventTypeTaxonomy&) const = default;

private:
    std::set<TypeId> types_;
    std::set<RoleLabel> role_vocabulary_;
    std::set<std::pair<TypeId, TypeId>> edges_;  // (child, parent)
    std::map<TypeId, std::set<RoleLabel>> roles_;
};

struct Viewpoint {
    ViewpointId id;
    std::string name;
    auto operator<=>(const Viewpoint&) const = default;
};

enum class AttributionKind { Entity, Event, EntityInEvent };
enum class Subjectivity { Objective, Subjective };

std::string_view to_string(AttributionKind kind);
std::string_view to_string(Subjectivity s);
AttributionKind parse_attribution_kind(std::string_view text);
Subjectivity parse_subjectivity(std::string_view text);

struct AttributionSignature {
    std::string name;
    AttributionKind kind = AttributionKind::EntityInEvent;
    Subjectivity subjectivity = Subjectivity::Objective;

    /// Throws SchemaError for subjective entity attributions.
    void validate() const;
    bool is_subjective() const noexcept { return subjectivity == Subjectivity::Subjective; }
    auto operator<=>(const AttributionSignature&) const = default;
};

// Event functions.

const std::set<TypeId>& event_types(const Event& event);
const std::set<EntityId>& participants(const Event& event);
/// Union of roles(t) over the event's types.
std::set<RoleLabel> roles_for_event(const Event& event, const EventTypeTaxonomy& taxonomy);
/// Role of a participant, if assigned. Throws DomainError for non-participants.
std::optional<RoleLabel> role_of(const Event& event, const EntityId& entity);

/// Validates the per-event invariants against a taxonomy.
void validate_event(const Event& event, const EventTypeTaxonomy& taxonomy);

}  // namespace narratekg
