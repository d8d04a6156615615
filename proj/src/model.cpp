#include "narratekg/model.hpp"

#include "narratekg/error.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <deque>
#include <sstream>

namespace narratekg {

namespace {

template <typename Int>
bool parse_int(std::string_view text, Int& out) {
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
    using namespace std::chrono;
    year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
    if (!ymd.ok()) {
        throw SchemaError("invalid calendar date " + std::to_string(year) + "-" + std::to_string(month) + "-" +
                          std::to_string(day));
    }
    return Date(static_cast<std::int32_t>(sys_days(ymd).time_since_epoch().count()));
}

Date Date::parse(std::string_view text) {
    // YYYY-MM-DD, year may have a leading '-' for BCE dates.
    auto second_dash = text.rfind('-');
    auto first_dash = second_dash == std::string_view::npos ? std::string_view::npos : text.rfind('-', second_dash - 1);
    const std::size_t year_digits = first_dash == std::string_view::npos ? 0 : first_dash - (text[0] == '-' ? 1 : 0);
    if (first_dash == std::string_view::npos || year_digits < 4 || second_dash - first_dash != 3 ||
        text.size() - second_dash != 3) {
        throw SchemaError("malformed date '" + std::string(text) + "', expected YYYY-MM-DD");
    }
    int year = 0;
    unsigned month = 0, day = 0;
    if (!parse_int(text.substr(0, first_dash), year) || !parse_int(text.substr(first_dash + 1, 2), month) ||
        !parse_int(text.substr(second_dash + 1, 2), day)) {
        throw SchemaError("malformed date '" + std::string(text) + "', expected YYYY-MM-DD");
    }
    return from_ymd(year, month, day);
}

std::string Date::to_string() const {
    using namespace std::chrono;
    year_month_day ymd{sys_days{std::chrono::days{days_}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

TimeSpec TimeSpec::interval(Date start, Date end) {
    if (end < start) {
        throw DomainError("interval start " + start.to_string() + " is after end " + end.to_string());
    }
    return TimeSpec(Interval{start, end});
}

Date TimeSpec::start() const noexcept {
    if (const auto* d = std::get_if<Date>(&value_)) return *d;
    return std::get<Interval>(value_).start;
}

Date TimeSpec::end() const noexcept {
    if (const auto* d = std::get_if<Date>(&value_)) return *d;
    return std::get<Interval>(value_).end;
}

bool TimeSpec::overlaps(const TimeSpec& other) const noexcept {
    return start() <= other.end() && other.start() <= end();
}

std::string TimeSpec::to_string() const {
    if (is_point()) return start().to_string();
    return "[" + start().to_string() + ", " + end().to_string() + "]";
}

std::string value_to_string(const Value& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, bool>) {
                return x ? "true" : "false";
            } else if constexpr (std::is_same_v<T, double>) {
                std::ostringstream os;
                os << x;
                return os.str();
            } else {
                return x;
            }
        },
        v);
}

std::optional<Value> attribute_at(const Entity& entity, std::string_view name, const TimeSpec& at) {
    std::optional<Value> fallback;
    if (name == "name") fallback = Value{entity.name};
    for (const auto& attr : entity.attributes) {
        if (attr.name != name) continue;
        if (!attr.qualifier) {
            fallback = attr.value;
        } else if (attr.qualifier->overlaps(at)) {
            // Qualifiers for one name never overlap each other, so the first hit is the only one.
            return attr.value;
        }
    }
    return fallback;
}

void validate_entity(const Entity& entity) {
    if (entity.id.empty()) throw SchemaError("entity id must be nonempty");
    if (entity.name.empty()) throw SchemaError("entity '" + entity.id + "' has an empty name");
    if (!entity.aliases.contains(entity.name)) {
        throw SchemaError("entity '" + entity.id + "' name is missing from its aliases");
    }
    std::map<std::string, std::vector<const AttributeValue*>> by_name;
    for (const auto& attr : entity.attributes) by_name[attr.name].push_back(&attr);
    for (const auto& [name, values] : by_name) {
        int unqualified = 0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (!values[i]->qualifier) {
                ++unqualified;
                continue;
            }
            for (std::size_t j = i + 1; j < values.size(); ++j) {
                if (values[j]->qualifier && values[i]->qualifier->overlaps(*values[j]->qualifier)) {
                    throw SchemaError("entity '" + entity.id + "' attribute '" + name +
                                      "' has overlapping time qualifiers");
                }
            }
        }
        if (unqualified > 1) {
            throw SchemaError("entity '" + entity.id + "' attribute '" + name + "' has more than one unqualified value");
        }
    }
}

void EventTypeTaxonomy::add_type(const TypeId& type) {
    if (type.empty()) throw SchemaError("event type id must be nonempty");
    types_.insert(type);
}

void EventTypeTaxonomy::add_role(const RoleLabel& role) {
    if (role.empty()) throw SchemaError("role label must be nonempty");
    role_vocabulary_.insert(role);
}

void EventTypeTaxonomy::add_supertype(const TypeId& child, const TypeId& parent) {
    if (!has_type(child)) throw SchemaError("unknown event type '" + child + "'");
    if (!has_type(parent)) throw SchemaError("unknown event type '" + parent + "'");
    edges_.emplace(child, parent);
}

void EventTypeTaxonomy::add_roles(const TypeId& type, const std::set<RoleLabel>& roles) {
    if (!has_type(type)) throw SchemaError("unknown event type '" + type + "'");
    roles_[type].insert(roles.begin(), roles.end());
}

const std::set<RoleLabel>& EventTypeTaxonomy::roles(const TypeId& type) const {
    static const std::set<RoleLabel> empty;
    if (!has_type(type)) throw SchemaError("unknown event type '" + type + "'");
    auto it = roles_.find(type);
    return it == roles_.end() ? empty : it->second;
}

std::set<TypeId> EventTypeTaxonomy::downward_closure(const TypeId& type) const {
    if (!has_type(type)) throw SchemaError("unknown event type '" + type + "'");
    std::map<TypeId, std::vector<TypeId>> children;
    for (const auto& [child, parent] : edges_) children[parent].push_back(child);
    std::set<TypeId> out{type};
    std::deque<TypeId> work{type};
    while (!work.empty()) {
        auto current = std::move(work.front());
        work.pop_front();
        for (const auto& child : children[current]) {
            if (out.insert(child).second) work.push_back(child);
        }
    }
    return out;
}

std::vector<TypeId> EventTypeTaxonomy::topological_order() const {
    std::map<TypeId, int> indegree;
    std::map<TypeId, std::vector<TypeId>> children;
    for (const auto& t : types_) indegree[t] = 0;
    for (const auto& [child, parent] : edges_) {
        ++indegree[child];
        children[parent].push_back(child);
    }
    std::deque<TypeId> ready;
    for (const auto& [t, d] : indegree) {
        if (d == 0) ready.push_back(t);
    }
    std::vector<TypeId> order;
    while (!ready.empty()) {
        auto t = ready.front();
        ready.pop_front();
        order.push_back(t);
        for (const auto& c : children[t]) {
            if (--indegree[c] == 0) ready.push_back(c);
        }
    }
    if (order.size() != types_.size()) {
        for (const auto& [t, d] : indegree) {
            if (d > 0) throw SchemaError("supertype hierarchy has a cycle through '" + t + "'");
        }
    }
    return order;
}

void EventTypeTaxonomy::validate() const {
    topological_order();
    for (const auto& [type, roles] : roles_) {
        for (const auto& r : roles) {
            if (!has_role(r)) throw SchemaError("role '" + r + "' of type '" + type + "' is not a registered role");
        }
    }
}

std::string_view to_string(AttributionKind kind) {
    switch (kind) {
        case AttributionKind::Entity: return "entity";
        case AttributionKind::Event: return "event";
        case AttributionKind::EntityInEvent: return "entity-in-event";
    }
    return "?";
}

std::string_view to_string(Subjectivity s) {
    return s == Subjectivity::Objective ? "objective" : "subjective";
}

AttributionKind parse_attribution_kind(std::string_view text) {
    if (text == "entity") return AttributionKind::Entity;
    if (text == "event") return AttributionKind::Event;
    if (text == "entity-in-event") return AttributionKind::EntityInEvent;
    throw SchemaError("unknown attribution kind '" + std::string(text) + "'");
}

Subjectivity parse_subjectivity(std::string_view text) {
    if (text == "objective") return Subjectivity::Objective;
    if (text == "subjective") return Subjectivity::Subjective;
    throw SchemaError("unknown subjectivity '" + std::string(text) + "'");
}

void AttributionSignature::validate() const {
    if (name.empty()) throw SchemaError("attribution name must be nonempty");
    if (subjectivity == Subjectivity::Subjective && kind == AttributionKind::Entity) {
        throw SchemaError("attribution '" + name + "': subjective attributions cannot target plain entities");
    }
}

const std::set<TypeId>& event_types(const Event& event) { return event.types; }

const std::set<EntityId>& participants(const Event& event) { return event.participants; }

std::set<RoleLabel> roles_for_event(const Event& event, const EventTypeTaxonomy& taxonomy) {
    std::set<RoleLabel> out;
    for (const auto& t : event.types) {
        const auto& r = taxonomy.roles(t);
        out.insert(r.begin(), r.end());
    }
    return out;
}

std::optional<RoleLabel> role_of(const Event& event, const EntityId& entity) {
    if (!event.participants.contains(entity)) {
        throw DomainError("'" + entity + "' is not a participant of event '" + event.label + "'");
    }
    for (const auto& ra : event.role_assignments) {
        if (ra.entity == entity) return ra.role;
    }
    return std::nullopt;
}

void validate_event(const Event& event, const EventTypeTaxonomy& taxonomy) {
    if (event.label.empty()) throw SchemaError("event label must be nonempty");
    if (event.types.empty()) throw SchemaError("event '" + event.label + "' has no event type");
    for (const auto& t : event.types) {
        if (!taxonomy.has_type(t)) throw SchemaError("event '" + event.label + "' has unknown type '" + t + "'");
    }
    const auto permitted = roles_for_event(event, taxonomy);
    std::set<EntityId> seen;
    for (const auto& ra : event.role_assignments) {
        if (!event.participants.contains(ra.entity)) {
            throw SchemaError("event '" + event.label + "' assigns a role to non-participant '" + ra.entity + "'");
        }
        if (!permitted.contains(ra.role)) {
            throw SchemaError("event '" + event.label + "' role '" + ra.role + "' is not permitted by its types");
        }
        if (!seen.insert(ra.entity).second) {
            throw SchemaError("event '" + event.label + "' assigns more than one role to '" + ra.entity + "'");
        }
    }
}

}  // namespace narratekg
