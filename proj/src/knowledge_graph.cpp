#include "narratekg/knowledge_graph.hpp"

#include "narratekg/error.hpp"
#include "narratekg/jsonl.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

namespace narratekg {

namespace {

constexpr std::int32_t kScopeWarningDays = 50 * 365 + 12;

const std::map<std::string, AttributionSignature, std::less<>>& builtin_signatures() {
    static const std::map<std::string, AttributionSignature, std::less<>> table = [] {
        std::map<std::string, AttributionSignature, std::less<>> t;
        auto add = [&](std::string_view name, AttributionKind kind) {
            t.emplace(std::string(name), AttributionSignature{std::string(name), kind, Subjectivity::Objective});
        };
        add(kBuiltinRoleEquals, AttributionKind::EntityInEvent);
        add(kBuiltinParticipantCountAtLeast, AttributionKind::Event);
        add(kBuiltinParticipantCountAtMost, AttributionKind::Event);
        add(kBuiltinTimeWithin, AttributionKind::Event);
        add(kBuiltinLocationEquals, AttributionKind::Event);
        return t;
    }();
    return table;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

TimeSpec read_time(const jsonl::Json& j, int line) {
    try {
        if (j.is_string()) return TimeSpec::point(Date::parse(j.get<std::string>()));
        if (j.contains("point")) return TimeSpec::point(Date::parse(j.at("point").get<std::string>()));
        return TimeSpec::interval(Date::parse(j.at("start").get<std::string>()),
                                  Date::parse(j.at("end").get<std::string>()));
    } catch (const SchemaError& e) {
        throw SchemaError(e.what(), line);
    } catch (const DomainError& e) {
        throw SchemaError(e.what(), line);
    } catch (const jsonl::Json::exception&) {
        throw SchemaError("time must be a date string, {\"point\": ...} or {\"start\": ..., \"end\": ...}", line);
    }
}

jsonl::OrderedJson write_time(const TimeSpec& t) {
    jsonl::OrderedJson j;
    if (t.is_point()) {
        j["point"] = t.start().to_string();
    } else {
        j["start"] = t.start().to_string();
        j["end"] = t.end().to_string();
    }
    return j;
}

Value read_value(const jsonl::Json& j, int line) {
    if (j.is_boolean()) return j.get<bool>();
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) return j.get<std::string>();
    throw SchemaError("attribute value must be a boolean, number or string", line);
}

jsonl::OrderedJson write_value(const Value& v) {
    return std::visit([](const auto& x) { return jsonl::OrderedJson(x); }, v);
}

}  // namespace

bool is_builtin_predicate(std::string_view name) { return builtin_signatures().contains(name); }

// Collects records, then validates references once the whole stream is read
// so that records may appear in any order.
class KnowledgeGraphBuilder {
public:
    void add(const jsonl::Json& rec, int line);
    KnowledgeGraph finish();

private:
    template <typename T>
    struct At {
        T value;
        int line;
    };

    KnowledgeGraph g_;
    std::map<TypeId, int> type_lines_;
    std::vector<At<std::pair<TypeId, TypeId>>> supertypes_;
    std::vector<At<std::pair<TypeId, std::set<RoleLabel>>>> role_schemas_;
    std::map<LocationId, int> location_lines_;
    std::map<EntityId, int> entity_lines_;
    std::map<EventLabel, int> event_lines_;
    std::vector<At<ObjectiveAttributionEdge>> objectives_;
    std::vector<At<std::pair<EventLabel, CollectionId>>> links_;
    std::map<std::string, int> attribution_lines_;
};

void KnowledgeGraphBuilder::add(const jsonl::Json& rec, int line) {
    const auto kind = jsonl::require_string(rec, "kind", line);
    auto dup = [&](std::map<std::string, int>& seen, const std::string& id, std::string_view what) {
        auto [it, inserted] = seen.emplace(id, line);
        if (!inserted) {
            throw SchemaError("duplicate " + std::string(what) + " '" + id + "' (first declared on line " +
                                  std::to_string(it->second) + ")",
                              line);
        }
    };
    if (kind == "type") {
        auto id = jsonl::require_string(rec, "id", line);
        dup(type_lines_, id, "type");
        g_.taxonomy_.add_type(id);
    } else if (kind == "supertype") {
        supertypes_.push_back({{jsonl::require_string(rec, "child", line), jsonl::require_string(rec, "parent", line)},
                               line});
    } else if (kind == "role") {
        g_.taxonomy_.add_role(jsonl::require_string(rec, "id", line));
    } else if (kind == "role_schema") {
        auto type = jsonl::require_string(rec, "type", line);
        auto roles = jsonl::require_string_list(rec, "roles", line);
        role_schemas_.push_back({{type, std::set<RoleLabel>(roles.begin(), roles.end())}, line});
    } else if (kind == "location") {
        Location loc{jsonl::require_string(rec, "id", line), jsonl::optional_string(rec, "name", line).value_or(""),
                     jsonl::optional_string(rec, "parent", line)};
        dup(location_lines_, loc.id, "location");
        g_.locations_.emplace(loc.id, std::move(loc));
    } else if (kind == "viewpoint") {
        Viewpoint vp{jsonl::require_string(rec, "id", line), jsonl::optional_string(rec, "name", line).value_or("")};
        if (g_.viewpoints_.contains(vp.id)) throw SchemaError("duplicate viewpoint '" + vp.id + "'", line);
        g_.viewpoints_.emplace(vp.id, std::move(vp));
    } else if (kind == "attribution") {
        AttributionSignature sig;
        sig.name = jsonl::require_string(rec, "name", line);
        try {
            sig.kind = parse_attribution_kind(jsonl::require_string(rec, "target", line));
            sig.subjectivity = parse_subjectivity(jsonl::require_string(rec, "subjectivity", line));
            sig.validate();
        } catch (const SchemaError& e) {
            throw SchemaError(e.what(), line);
        }
        if (is_builtin_predicate(sig.name)) throw SchemaError("'" + sig.name + "' is a built-in predicate", line);
        dup(attribution_lines_, sig.name, "attribution");
        g_.schema_.emplace(sig.name, std::move(sig));
    } else if (kind == "entity") {
        Entity e;
        e.id = jsonl::require_string(rec, "id", line);
        e.name = jsonl::require_string(rec, "name", line);
        for (auto& a : jsonl::optional_string_list(rec, "aliases", line)) e.aliases.insert(std::move(a));
        e.aliases.insert(e.name);
        if (rec.contains("attributes")) {
            if (!rec["attributes"].is_array()) throw SchemaError("'attributes' must be an array", line);
            for (const auto& a : rec["attributes"]) {
                AttributeValue av;
                av.name = jsonl::require_string(a, "name", line);
                if (!a.contains("value")) throw SchemaError("attribute '" + av.name + "' has no value", line);
                av.value = read_value(a["value"], line);
                if (a.contains("time") && !a["time"].is_null()) av.qualifier = read_time(a["time"], line);
                e.attributes.push_back(std::move(av));
            }
        }
        try {
            validate_entity(e);
        } catch (const SchemaError& ex) {
            throw SchemaError(ex.what(), line);
        }
        dup(entity_lines_, e.id, "entity");
        g_.entities_.emplace(e.id, std::move(e));
    } else if (kind == "event") {
        Event ev;
        ev.label = jsonl::require_string(rec, "label", line);
        if (!rec.contains("time")) throw SchemaError("event '" + ev.label + "' has no time", line);
        ev.time = read_time(rec["time"], line);
        ev.location = jsonl::require_string(rec, "location", line);
        for (auto& t : jsonl::require_string_list(rec, "types", line)) ev.types.insert(std::move(t));
        for (auto& p : jsonl::optional_string_list(rec, "participants", line)) ev.participants.insert(std::move(p));
        if (rec.contains("roles")) {
            if (!rec["roles"].is_array()) throw SchemaError("'roles' must be an array", line);
            for (const auto& r : rec["roles"]) {
                ev.role_assignments.push_back(
                    {jsonl::require_string(r, "entity", line), jsonl::require_string(r, "role", line)});
            }
        }
        if (ev.label.empty()) throw SchemaError("event label must be nonempty", line);
        dup(event_lines_, ev.label, "event");
        g_.events_.emplace(ev.label, std::move(ev));
    } else if (kind == "objective") {
        ObjectiveAttributionEdge edge;
        edge.attribution = jsonl::require_string(rec, "name", line);
        edge.event = jsonl::require_string(rec, "event", line);
        edge.entity = jsonl::optional_string(rec, "entity", line);
        if (rec.contains("value")) {
            if (!rec["value"].is_boolean()) throw SchemaError("objective 'value' must be boolean", line);
            edge.value = rec["value"].get<bool>();
        }
        objectives_.push_back({std::move(edge), line});
    } else if (kind == "collection_link") {
        links_.push_back({{jsonl::require_string(rec, "event", line), jsonl::require_string(rec, "collection", line)},
                          line});
    } else {
        throw SchemaError("unknown record kind '" + kind + "'", line);
    }
}

KnowledgeGraph KnowledgeGraphBuilder::finish() {
    auto& tax = g_.taxonomy_;
    for (const auto& [edge, line] : supertypes_) {
        try {
            tax.add_supertype(edge.first, edge.second);
        } catch (const SchemaError& e) {
            throw SchemaError(e.what(), line);
        }
    }
    for (const auto& [schema, line] : role_schemas_) {
        if (!tax.has_type(schema.first)) throw SchemaError("unknown event type '" + schema.first + "'", line);
        for (const auto& r : schema.second) {
            if (!tax.has_role(r)) throw SchemaError("role '" + r + "' is not a registered role", line);
        }
        tax.add_roles(schema.first, schema.second);
    }
    try {
        tax.validate();
    } catch (const SchemaError& e) {
        int line = supertypes_.empty() ? 0 : supertypes_.back().line;
        throw SchemaError(e.what(), line);
    }

    for (const auto& [id, loc] : g_.locations_) {
        std::set<LocationId> chain{id};
        const Location* cur = &loc;
        while (cur->parent) {
            auto it = g_.locations_.find(*cur->parent);
            if (it == g_.locations_.end()) {
                throw SchemaError("location '" + id + "' has unknown parent '" + *cur->parent + "'",
                                  location_lines_.at(id));
            }
            if (!chain.insert(it->first).second) {
                throw SchemaError("location containment cycle through '" + id + "'", location_lines_.at(id));
            }
            cur = &it->second;
        }
    }

    for (auto& [label, ev] : g_.events_) {
        const int line = event_lines_.at(label);
        if (!g_.locations_.contains(ev.location)) {
            throw SchemaError("event '" + label + "' references undeclared location '" + ev.location + "'", line);
        }
        for (const auto& p : ev.participants) {
            if (!g_.entities_.contains(p)) {
                throw SchemaError("event '" + label + "' references undeclared entity '" + p + "'", line);
            }
        }
        try {
            validate_event(ev, tax);
        } catch (const SchemaError& e) {
            throw SchemaError(e.what(), line);
        }
        if (ev.time.end().days() - ev.time.start().days() > kScopeWarningDays) {
            g_.warnings_.push_back("event '" + label + "' spans more than 50 years");
        }
        const auto& loc = g_.locations_.at(ev.location);
        if (lower(loc.id) == "world" || lower(loc.name) == "world") {
            g_.warnings_.push_back("event '" + label + "' is located at world scale");
        }
    }

    for (auto& [edge, line] : objectives_) {
        const auto* sig = g_.find_attribution(edge.attribution);
        if (!sig) throw SchemaError("unknown attribution '" + edge.attribution + "'", line);
        if (sig->is_subjective()) {
            throw SchemaError("attribution '" + edge.attribution + "' is subjective; only objective facts belong in the graph",
                              line);
        }
        if (is_builtin_predicate(edge.attribution)) {
            throw SchemaError("'" + edge.attribution + "' is computed from the graph and cannot be asserted", line);
        }
        auto ev = g_.events_.find(edge.event);
        if (ev == g_.events_.end()) {
            throw SchemaError("objective record references undeclared event '" + edge.event + "'", line);
        }
        switch (sig->kind) {
            case AttributionKind::Entity:
                throw SchemaError("entity attribution '" + edge.attribution + "' is stored as an entity attribute", line);
            case AttributionKind::Event:
                if (edge.entity) throw SchemaError("event attribution '" + edge.attribution + "' takes no entity", line);
                break;
            case AttributionKind::EntityInEvent:
                if (!edge.entity) throw SchemaError("attribution '" + edge.attribution + "' needs an entity", line);
                if (!g_.entities_.contains(*edge.entity)) {
                    throw SchemaError("objective record references undeclared entity '" + *edge.entity + "'", line);
                }
                if (!ev->second.participants.contains(*edge.entity)) {
                    throw SchemaError("'" + *edge.entity + "' is not a participant of '" + edge.event + "'", line);
                }
                break;
        }
        g_.objective_.insert(edge);
    }

    for (const auto& [link, line] : links_) {
        auto ev = g_.events_.find(link.first);
        if (ev == g_.events_.end()) {
            throw SchemaError("collection_link references undeclared event '" + link.first + "'", line);
        }
        if (link.second.empty()) throw SchemaError("collection id must be nonempty", line);
        if (ev->second.collection && *ev->second.collection != link.second) {
            throw SchemaError("event '" + link.first + "' is already linked to collection '" + *ev->second.collection + "'",
                              line);
        }
        ev->second.collection = link.second;
    }
    return std::move(g_);
}

const Event& KnowledgeGraph::event(const EventLabel& label) const {
    auto it = events_.find(label);
    if (it == events_.end()) throw NotFoundError("unknown event '" + label + "'");
    return it->second;
}

const Entity& KnowledgeGraph::entity(const EntityId& id) const {
    auto it = entities_.find(id);
    if (it == entities_.end()) throw NotFoundError("unknown entity '" + id + "'");
    return it->second;
}

const AttributionSignature* KnowledgeGraph::find_attribution(std::string_view name) const {
    if (auto it = schema_.find(std::string(name)); it != schema_.end()) return &it->second;
    const auto& builtins = builtin_signatures();
    if (auto it = builtins.find(name); it != builtins.end()) return &it->second;
    return nullptr;
}

std::set<ViewpointId> KnowledgeGraph::viewpoint_ids() const {
    std::set<ViewpointId> out;
    for (const auto& [id, _] : viewpoints_) out.insert(id);
    return out;
}

std::vector<const Event*> KnowledgeGraph::events_matching_type(const TypeId& type, bool as_supertype) const {
    if (!taxonomy_.has_type(type)) throw SchemaError("unknown event type '" + type + "'");
    const std::set<TypeId> wanted = as_supertype ? taxonomy_.downward_closure(type) : std::set<TypeId>{type};
    std::vector<const Event*> out;
    for (const auto& [label, ev] : events_) {
        if (std::any_of(ev.types.begin(), ev.types.end(), [&](const TypeId& t) { return wanted.contains(t); })) {
            out.push_back(&ev);
        }
    }
    return out;
}

namespace {

double number_arg(const ObjectiveQuery& q, std::size_t i) {
    if (q.args.size() <= i || !std::holds_alternative<double>(q.args[i])) {
        throw MisuseError("'" + q.attribution + "' expects a number as argument " + std::to_string(i + 1));
    }
    return std::get<double>(q.args[i]);
}

const std::string& string_arg(const ObjectiveQuery& q, std::size_t i) {
    if (q.args.size() <= i || !std::holds_alternative<std::string>(q.args[i])) {
        throw MisuseError("'" + q.attribution + "' expects a string as argument " + std::to_string(i + 1));
    }
    return std::get<std::string>(q.args[i]);
}

}  // namespace

bool KnowledgeGraph::check_objective(const ObjectiveQuery& q) const {
    const auto* sig = find_attribution(q.attribution);
    if (!sig) throw SchemaError("unknown attribution '" + q.attribution + "'");
    if (sig->is_subjective()) {
        throw MisuseError("'" + q.attribution + "' is subjective and must be evaluated against documents");
    }
    const Event& ev = event(q.event);
    if (sig->kind != AttributionKind::Event && !q.entity) {
        throw MisuseError("'" + q.attribution + "' needs an entity argument");
    }

    if (q.attribution == kBuiltinRoleEquals) {
        if (!ev.participants.contains(*q.entity)) return false;
        auto role = role_of(ev, *q.entity);
        return role && *role == string_arg(q, 0);
    }
    if (q.attribution == kBuiltinParticipantCountAtLeast) {
        return static_cast<double>(ev.participants.size()) >= number_arg(q, 0);
    }
    if (q.attribution == kBuiltinParticipantCountAtMost) {
        return static_cast<double>(ev.participants.size()) <= number_arg(q, 0);
    }
    if (q.attribution == kBuiltinTimeWithin) {
        auto from = Date::parse(string_arg(q, 0));
        auto to = Date::parse(string_arg(q, 1));
        return from <= ev.time.start() && ev.time.end() <= to;
    }
    if (q.attribution == kBuiltinLocationEquals) return ev.location == string_arg(q, 0);

    switch (sig->kind) {
        case AttributionKind::Entity: {
            auto v = attribute_at(entity(*q.entity), q.attribution, ev.time);
            return v && std::holds_alternative<bool>(*v) && std::get<bool>(*v);
        }
        case AttributionKind::Event:
            return objective_.contains(ObjectiveAttributionEdge{q.attribution, q.event, std::nullopt, true});
        case AttributionKind::EntityInEvent:
            return objective_.contains(ObjectiveAttributionEdge{q.attribution, q.event, q.entity, true});
    }
    return false;
}

bool KnowledgeGraph::check_objective(const std::string& attribution, const EventLabel& event,
                                     const std::optional<EntityId>& entity) const {
    return check_objective(ObjectiveQuery{attribution, event, entity, {}});
}

std::optional<CollectionId> KnowledgeGraph::collection_of(const EventLabel& label) const {
    return event(label).collection;
}

std::set<NodeRef> KnowledgeGraph::nodes() const {
    std::set<NodeRef> out;
    for (const auto& [id, _] : events_) out.insert({NodeKind::Event, id});
    for (const auto& [id, _] : entities_) out.insert({NodeKind::Entity, id});
    for (const auto& t : taxonomy_.types()) out.insert({NodeKind::EventType, t});
    return out;
}

std::set<Edge> KnowledgeGraph::edges() const {
    std::set<Edge> out;
    for (const auto& [child, parent] : taxonomy_.supertype_edges()) {
        out.insert({"supertype", {NodeKind::EventType, child}, parent, std::nullopt});
    }
    for (const auto& [label, ev] : events_) {
        NodeRef src{NodeKind::Event, label};
        for (const auto& t : ev.types) out.insert({"has_type", src, t, std::nullopt});
        for (const auto& p : ev.participants) out.insert({"has_participant", src, p, std::nullopt});
        for (const auto& ra : ev.role_assignments) out.insert({"has_role", src, ra.entity, ra.role});
        if (ev.collection) out.insert({"has_collection", src, *ev.collection, std::nullopt});
    }
    for (const auto& o : objective_) {
        out.insert({o.attribution, {NodeKind::Event, o.event}, o.entity.value_or(o.event),
                    std::string(o.value ? "true" : "false")});
    }
    return out;
}

void KnowledgeGraph::write(std::ostream& out) const {
    using J = jsonl::OrderedJson;
    auto emit = [&](const J& j) { out << j.dump() << '\n'; };
    for (const auto& t : taxonomy_.types()) emit(J{{"kind", "type"}, {"id", t}});
    for (const auto& r : taxonomy_.role_vocabulary()) emit(J{{"kind", "role"}, {"id", r}});
    for (const auto& [child, parent] : taxonomy_.supertype_edges()) {
        emit(J{{"kind", "supertype"}, {"child", child}, {"parent", parent}});
    }
    for (const auto& [type, roles] : taxonomy_.roles_by_type()) {
        emit(J{{"kind", "role_schema"}, {"type", type}, {"roles", roles}});
    }
    for (const auto& [id, loc] : locations_) {
        J j{{"kind", "location"}, {"id", id}, {"name", loc.name}};
        if (loc.parent) j["parent"] = *loc.parent;
        emit(j);
    }
    for (const auto& [id, vp] : viewpoints_) emit(J{{"kind", "viewpoint"}, {"id", id}, {"name", vp.name}});
    for (const auto& [name, sig] : schema_) {
        emit(J{{"kind", "attribution"},
               {"name", name},
               {"target", to_string(sig.kind)},
               {"subjectivity", to_string(sig.subjectivity)}});
    }
    for (const auto& [id, e] : entities_) {
        J j{{"kind", "entity"}, {"id", id}, {"name", e.name}, {"aliases", e.aliases}};
        J attrs = J::array();
        for (const auto& a : e.attributes) {
            J aj{{"name", a.name}, {"value", write_value(a.value)}};
            if (a.qualifier) aj["time"] = write_time(*a.qualifier);
            attrs.push_back(std::move(aj));
        }
        j["attributes"] = std::move(attrs);
        emit(j);
    }
    for (const auto& [label, ev] : events_) {
        J roles = J::array();
        for (const auto& ra : ev.role_assignments) roles.push_back(J{{"entity", ra.entity}, {"role", ra.role}});
        emit(J{{"kind", "event"},
               {"label", label},
               {"time", write_time(ev.time)},
               {"location", ev.location},
               {"types", ev.types},
               {"participants", ev.participants},
               {"roles", roles}});
    }
    for (const auto& o : objective_) {
        J j{{"kind", "objective"}, {"name", o.attribution}, {"event", o.event}};
        if (o.entity) j["entity"] = *o.entity;
        j["value"] = o.value;
        emit(j);
    }
    for (const auto& [label, ev] : events_) {
        if (ev.collection) emit(J{{"kind", "collection_link"}, {"event", label}, {"collection", *ev.collection}});
    }
}

KnowledgeGraph ingest_kg(std::istream& in) {
    KnowledgeGraphBuilder builder;
    jsonl::for_each_record(in, [&](const jsonl::Json& rec, int line) { builder.add(rec, line); });
    return builder.finish();
}

KnowledgeGraph load_kg(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open knowledge graph file '" + path + "'");
    return ingest_kg(in);
}

}  // namespace narratekg
