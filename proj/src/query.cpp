#include "narratekg/query.hpp"

#include <algorithm>
#include <chrono>
#include <mutex>
#include <sstream>

namespace narratekg {

namespace {

using dsl::Atom;
using dsl::Comparator;
using dsl::Expr;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

enum class Tri { False, Unknown, True };

Tri tri_not(Tri t) {
    if (t == Tri::True) return Tri::False;
    if (t == Tri::False) return Tri::True;
    return Tri::Unknown;
}

const char* tri_name(Tri t) {
    switch (t) {
        case Tri::True: return "true";
        case Tri::False: return "false";
        default: return "unknown";
    }
}

const std::set<std::string>& event_functions() {
    static const std::set<std::string> fns = {"participant_count", "label", "location", "start", "end"};
    return fns;
}

Value event_function(const Event& ev, const std::string& fn) {
    if (fn == "participant_count") return static_cast<double>(ev.participants.size());
    if (fn == "label") return ev.label;
    if (fn == "location") return ev.location;
    if (fn == "start") return ev.time.start().to_string();
    return ev.time.end().to_string();
}

template <typename T>
bool ordered(const T& a, const T& b, Comparator c) {
    switch (c) {
        case Comparator::Eq: return a == b;
        case Comparator::Ne: return a != b;
        case Comparator::Lt: return a < b;
        case Comparator::Le: return a <= b;
        case Comparator::Gt: return a > b;
        case Comparator::Ge: return a >= b;
    }
    return false;
}

// Incomparable pairs (type mismatch, ordering on booleans) are false for
// every comparator.
bool compare(const Value& v, const dsl::Literal& lit, Comparator c) {
    if (const auto* d = std::get_if<double>(&v)) {
        if (const auto* l = std::get_if<double>(&lit)) return ordered(*d, *l, c);
        return false;
    }
    if (const auto* s = std::get_if<std::string>(&v)) {
        if (const auto* l = std::get_if<std::string>(&lit)) return ordered(*s, *l, c);
        if (const auto* sym = std::get_if<dsl::Symbol>(&lit)) return ordered(*s, sym->name, c);
        return false;
    }
    const bool b = std::get<bool>(v);
    const auto* sym = std::get_if<dsl::Symbol>(&lit);
    if (!sym || (sym->name != "true" && sym->name != "false")) return false;
    if (c != Comparator::Eq && c != Comparator::Ne) return false;
    return ordered(b, sym->name == "true", c);
}

bool is_participant_arg(const dsl::Arg& a) {
    return std::holds_alternative<dsl::Var>(a) || std::holds_alternative<dsl::Wildcard>(a);
}

const std::string& call_name(const Atom& a) {
    if (const auto* o = std::get_if<dsl::ObjectiveCall>(&a.node)) return o->name;
    return std::get<dsl::SubjectiveCall>(a.node).name;
}

const std::vector<dsl::Arg>& call_args(const Atom& a) {
    if (const auto* o = std::get_if<dsl::ObjectiveCall>(&a.node)) return o->args;
    return std::get<dsl::SubjectiveCall>(a.node).args;
}

bool is_call(const Atom& a) {
    return std::holds_alternative<dsl::ObjectiveCall>(a.node) || std::holds_alternative<dsl::SubjectiveCall>(a.node);
}

// Variable assignment for one event.
struct Assignment {
    const std::vector<std::string>* names = nullptr;
    std::vector<const EntityId*> values;
    const EntityId* wildcard = nullptr;

    const EntityId& get(const dsl::Arg& a) const {
        if (std::holds_alternative<dsl::Wildcard>(a)) return *wildcard;
        const auto& name = std::get<dsl::Var>(a).name;
        for (std::size_t i = 0; i < names->size(); ++i) {
            if ((*names)[i] == name) return *values[i];
        }
        throw MisuseError("unbound variable " + name);
    }

    std::map<std::string, EntityId> bindings() const {
        std::map<std::string, EntityId> out;
        for (std::size_t i = 0; i < names->size(); ++i) out[(*names)[i]] = *values[i];
        return out;
    }
};

std::vector<Assignment> enumerate_assignments(const std::vector<std::string>& names, const Event& ev) {
    std::vector<const EntityId*> parts;
    for (const auto& p : ev.participants) parts.push_back(&p);
    std::vector<Assignment> out;
    if (!names.empty() && parts.empty()) return out;
    std::vector<std::size_t> idx(names.size(), 0);
    while (true) {
        Assignment a;
        a.names = &names;
        for (auto i : idx) a.values.push_back(parts[i]);
        out.push_back(std::move(a));
        std::size_t k = 0;
        while (k < idx.size() && ++idx[k] == parts.size()) idx[k++] = 0;
        if (k == idx.size()) break;
    }
    return out;
}

std::vector<Candidate> candidates_for(const KnowledgeGraph& kg, const Event& ev) {
    std::vector<Candidate> out;
    for (const auto& p : ev.participants) {
        const auto& e = kg.entity(p);
        out.push_back({p, std::vector<std::string>(e.aliases.begin(), e.aliases.end())});
    }
    return out;
}

ObjectiveQuery objective_query(const std::string& attribution, AttributionKind kind, const std::vector<dsl::Arg>& args,
                               const Event& ev, const Assignment& asg) {
    ObjectiveQuery q{attribution, ev.label, std::nullopt, {}};
    std::size_t i = 0;
    if (kind != AttributionKind::Event && !args.empty() && is_participant_arg(args[0])) {
        q.entity = asg.get(args[0]);
        i = 1;
    }
    for (; i < args.size(); ++i) {
        if (const auto* s = std::get_if<std::string>(&args[i])) {
            q.args.emplace_back(*s);
        } else if (const auto* d = std::get_if<double>(&args[i])) {
            q.args.emplace_back(*d);
        }
    }
    return q;
}

bool eval_structural(const KnowledgeGraph& kg, const Atom& atom, const Event& ev, const Assignment& asg) {
    if (const auto* rb = std::get_if<dsl::RoleBinding>(&atom.node)) {
        auto role = role_of(ev, asg.get(rb->subject));
        return role && *role == rb->role;
    }
    const auto& t = std::get<dsl::AttributeTest>(atom.node);
    if (!t.subject) return compare(event_function(ev, t.function), t.value, t.comparator);
    auto v = attribute_at(kg.entity(asg.get(*t.subject)), t.function, ev.time);
    return v && compare(*v, t.value, t.comparator);
}

std::vector<const Document*> partition(const CorpusStore& corpus, const Event& ev, const ViewpointId& vp) {
    if (!ev.collection || !corpus.has_collection(*ev.collection)) return {};
    return corpus.documents_for(*ev.collection, std::set<ViewpointId>{vp});
}

std::string with_bindings(const std::string& text, const Assignment& asg) {
    if (asg.names->empty() && !asg.wildcard) return text;
    std::vector<std::string> parts;
    for (std::size_t i = 0; i < asg.names->size(); ++i) parts.push_back((*asg.names)[i] + " = " + *asg.values[i]);
    if (asg.wildcard) parts.push_back("_ = " + *asg.wildcard);
    return text + " [" + join(parts, ", ") + "]";
}

// ---------------------------------------------------------------------------
// Planning

class Planner {
public:
    Planner(const KnowledgeGraph& kg, const AttributionIndexSet* index, const CorpusStore* corpus)
        : kg_(kg), index_(index), corpus_(corpus) {}

    QueryPlan run(const dsl::Prototype& proto) {
        QueryPlan out;
        out.prototype = proto;
        const auto& pat = proto.pattern;
        switch (pat.kind) {
            case dsl::Pattern::Kind::Event:
                if (kg_.events().contains(pat.name)) {
                    out.candidates.push_back(pat.name);
                } else {
                    problems_.push_back("unknown event '" + pat.name + "'");
                }
                break;
            case dsl::Pattern::Kind::Type:
            case dsl::Pattern::Kind::Supertype:
                if (!kg_.taxonomy().has_type(pat.name)) {
                    problems_.push_back("unknown event type '" + pat.name + "'");
                    break;
                }
                for (const auto* ev : kg_.events_matching_type(pat.name, pat.kind == dsl::Pattern::Kind::Supertype)) {
                    out.candidates.push_back(ev->label);
                }
                break;
        }
        candidates_ = &out.candidates;
        atoms_ = &out.atoms;
        out.root = build(proto.where);
        if (!problems_.empty()) throw PlanningError(problems_);

        std::vector<std::size_t> ids(out.atoms.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
        std::stable_sort(ids.begin(), ids.end(),
                         [&](std::size_t a, std::size_t b) { return cost(out.atoms[a]) < cost(out.atoms[b]); });
        for (auto id : ids) {
            (out.atoms[id].cls == PlannedAtom::Class::Subjective ? out.subjective_checks : out.objective_checks)
                .push_back(id);
        }
        return out;
    }

private:
    static double cost(const PlannedAtom& a) {
        switch (a.cls) {
            case PlannedAtom::Class::Structural:
                return std::holds_alternative<dsl::RoleBinding>(a.atom.node) ? 0.0 : 1.0;
            case PlannedAtom::Class::Objective: return 2.0;
            case PlannedAtom::Class::Subjective: return 1000.0 + static_cast<double>(a.estimated_documents);
        }
        return 0.0;
    }

    double subtree_cost(const PlanNode& n) const {
        if (n.op == Expr::Op::Atom) return cost((*atoms_)[n.atom]);
        double c = 0;
        for (const auto& ch : n.children) c += subtree_cost(ch);
        return c;
    }

    PlanNode build(const Expr& e) {
        PlanNode n;
        n.op = e.op;
        if (e.op == Expr::Op::Atom) {
            n.atom = add_atom(*e.atom);
            return n;
        }
        for (const auto& ch : e.children) n.children.push_back(build(ch));
        if (e.op == Expr::Op::And || e.op == Expr::Op::Or) {
            std::stable_sort(n.children.begin(), n.children.end(),
                             [&](const PlanNode& a, const PlanNode& b) { return subtree_cost(a) < subtree_cost(b); });
        }
        return n;
    }

    std::size_t add_atom(const Atom& atom) {
        PlannedAtom pa;
        pa.id = atoms_->size();
        pa.atom = atom;
        pa.text = dsl::render(atom);
        const Atom* inner = &atom;
        if (const auto* ex = std::get_if<dsl::ExistsParticipant>(&atom.node)) {
            inner = &*ex->inner;
            pa.existential = true;
        }
        classify(*inner, pa);
        atoms_->push_back(std::move(pa));
        return atoms_->size() - 1;
    }

    void classify(const Atom& atom, PlannedAtom& pa) {
        if (const auto* rb = std::get_if<dsl::RoleBinding>(&atom.node)) {
            pa.cls = PlannedAtom::Class::Structural;
            if (!kg_.taxonomy().has_role(rb->role)) problems_.push_back("unknown role '" + rb->role + "'");
            return;
        }
        if (const auto* t = std::get_if<dsl::AttributeTest>(&atom.node)) {
            pa.cls = PlannedAtom::Class::Structural;
            if (!t->subject && !event_functions().contains(t->function)) {
                problems_.push_back("unknown event function '" + t->function + "'");
            }
            return;
        }
        const auto& name = call_name(atom);
        const auto& args = call_args(atom);
        const auto* sig = kg_.find_attribution(name);
        if (!sig) {
            problems_.push_back("unknown attribution '" + name + "'");
            return;
        }
        pa.attribution = name;
        pa.kind = sig->kind;
        const auto* sc = std::get_if<dsl::SubjectiveCall>(&atom.node);
        if (!sig->is_subjective()) {
            pa.cls = PlannedAtom::Class::Objective;
            if (sc) problems_.push_back("viewpoint qualifier on objective attribution '" + name + "'");
            check_objective_args(name, *sig, args);
            return;
        }
        pa.cls = PlannedAtom::Class::Subjective;
        check_participant_args(name, *sig, args);
        if (sc) {
            for (const auto& v : sc->viewpoints) {
                if (!kg_.viewpoints().contains(v)) {
                    problems_.push_back("unknown viewpoint '" + v + "'");
                } else if (std::find(pa.viewpoints.begin(), pa.viewpoints.end(), v) == pa.viewpoints.end()) {
                    pa.viewpoints.push_back(v);
                }
            }
        } else {
            pa.any_viewpoint = true;
            for (const auto& v : kg_.viewpoint_ids()) pa.viewpoints.push_back(v);
        }
        pa.index_prunable = index_ && index_->covers(name);
        if (corpus_) {
            for (const auto& label : *candidates_) {
                const auto& ev = kg_.event(label);
                for (const auto& v : pa.viewpoints) pa.estimated_documents += partition(*corpus_, ev, v).size();
            }
        }
    }

    void check_participant_args(const std::string& name, const AttributionSignature& sig,
                                const std::vector<dsl::Arg>& args) {
        if (sig.kind == AttributionKind::Event) {
            if (!args.empty()) problems_.push_back("event attribution '" + name + "' takes no arguments");
        } else if (args.size() != 1 || !is_participant_arg(args[0])) {
            problems_.push_back("attribution '" + name + "' takes exactly one participant argument");
        }
    }

    void check_objective_args(const std::string& name, const AttributionSignature& sig,
                              const std::vector<dsl::Arg>& args) {
        auto is_str = [](const dsl::Arg& a) { return std::holds_alternative<std::string>(a); };
        auto is_num = [](const dsl::Arg& a) { return std::holds_alternative<double>(a); };
        auto bad = [&](const char* usage) { problems_.push_back("'" + name + "' expects " + usage); };
        if (name == kBuiltinRoleEquals) {
            if (args.size() != 2 || !is_participant_arg(args[0]) || !is_str(args[1])) {
                bad("(participant, \"role\")");
            } else if (!kg_.taxonomy().has_role(std::get<std::string>(args[1]))) {
                problems_.push_back("unknown role '" + std::get<std::string>(args[1]) + "'");
            }
        } else if (name == kBuiltinParticipantCountAtLeast || name == kBuiltinParticipantCountAtMost) {
            if (args.size() != 1 || !is_num(args[0])) bad("(number)");
        } else if (name == kBuiltinTimeWithin) {
            if (args.size() != 2 || !is_str(args[0]) || !is_str(args[1])) {
                bad("(\"YYYY-MM-DD\", \"YYYY-MM-DD\")");
                return;
            }
            for (const auto& a : args) {
                try {
                    Date::parse(std::get<std::string>(a));
                } catch (const Error&) {
                    problems_.push_back("'" + name + "' has an invalid date \"" + std::get<std::string>(a) + "\"");
                }
            }
        } else if (name == kBuiltinLocationEquals) {
            if (args.size() != 1 || !is_str(args[0])) bad("(\"location\")");
        } else {
            check_participant_args(name, sig, args);
        }
    }

    const KnowledgeGraph& kg_;
    const AttributionIndexSet* index_;
    const CorpusStore* corpus_;
    const std::vector<EventLabel>* candidates_ = nullptr;
    std::vector<PlannedAtom>* atoms_ = nullptr;
    std::vector<std::string> problems_;
};

// ---------------------------------------------------------------------------
// Staged execution

enum class Stage { Objective, Index, Documents };

struct Trace {
    std::vector<std::string> lines;
    std::vector<Evidence> evidence;
};

class Executor {
public:
    Executor(const QueryPlan& plan, const ExecutionContext& ctx) : plan_(plan), ctx_(ctx) {
        result_.counters.documents_per_atom.assign(plan.atoms.size(), 0);
    }

    QueryResult run() {
        const auto t_total = Clock::now();
        auto t0 = Clock::now();
        struct State {
            const Event* ev;
            std::vector<Assignment> open;
            bool matched = false;
        };
        std::vector<State> states;
        for (const auto& label : plan_.candidates) states.push_back({&ctx_.kg.event(label), {}, false});
        result_.counters.after_pattern = states.size();
        result_.timings.pattern_ms = ms_since(t0);

        t0 = Clock::now();
        std::vector<State> kept;
        for (auto& st : states) {
            begin_event(*st.ev);
            for (auto& asg : enumerate_assignments(plan_.prototype.variables, *st.ev)) {
                Trace tr;
                const Tri t = eval(plan_.root, asg, Stage::Objective, &tr);
                if (t == Tri::True) {
                    record_match(*st.ev, asg, std::move(tr));
                    st.matched = true;
                    break;
                }
                if (t == Tri::Unknown) st.open.push_back(std::move(asg));
            }
            if (st.matched || !st.open.empty()) kept.push_back(std::move(st));
        }
        states = std::move(kept);
        result_.counters.after_objective = states.size();
        result_.timings.objective_ms = ms_since(t0);

        t0 = Clock::now();
        if (ctx_.index) {
            kept.clear();
            for (auto& st : states) {
                if (!st.matched) {
                    begin_event(*st.ev);
                    std::vector<Assignment> open;
                    for (auto& asg : st.open) {
                        if (eval(plan_.root, asg, Stage::Index, nullptr) != Tri::False) open.push_back(std::move(asg));
                    }
                    st.open = std::move(open);
                }
                if (st.matched || !st.open.empty()) kept.push_back(std::move(st));
            }
            states = std::move(kept);
        }
        result_.counters.after_index = states.size();
        result_.timings.index_ms = ms_since(t0);

        t0 = Clock::now();
        for (auto& st : states) {
            if (st.matched) continue;
            begin_event(*st.ev);
            for (const auto& asg : st.open) {
                Trace tr;
                if (eval(plan_.root, asg, Stage::Documents, &tr) == Tri::True) {
                    record_match(*st.ev, asg, std::move(tr));
                    break;
                }
            }
        }
        result_.timings.documents_ms = ms_since(t0);

        std::sort(result_.matches.begin(), result_.matches.end(),
                  [](const EventMatch& a, const EventMatch& b) { return a.event < b.event; });
        result_.counters.matched = result_.matches.size();
        result_.timings.total_ms = ms_since(t_total);
        return std::move(result_);
    }

private:
    void begin_event(const Event& ev) {
        if (ev_ == &ev) return;
        ev_ = &ev;
        candidates_ = candidates_for(ctx_.kg, ev);
        partitions_.clear();
        outcomes_.clear();
        assessments_.clear();
    }

    void record_match(const Event& ev, const Assignment& asg, Trace tr) {
        EventMatch m;
        m.event = ev.label;
        m.bindings = asg.bindings();
        m.justification = std::move(tr.lines);
        m.evidence = std::move(tr.evidence);
        result_.matches.push_back(std::move(m));
    }

    Tri eval(const PlanNode& n, const Assignment& asg, Stage stage, Trace* tr) {
        switch (n.op) {
            case Expr::Op::Atom: return eval_atom(plan_.atoms[n.atom], asg, stage, tr);
            case Expr::Op::Not: return tri_not(eval(n.children[0], asg, stage, tr));
            case Expr::Op::And: {
                Tri acc = Tri::True;
                for (const auto& ch : n.children) {
                    const Tri t = eval(ch, asg, stage, tr);
                    if (t == Tri::False) return Tri::False;
                    if (t == Tri::Unknown) acc = Tri::Unknown;
                }
                return acc;
            }
            case Expr::Op::Or: {
                Tri acc = Tri::False;
                for (const auto& ch : n.children) {
                    const Tri t = eval(ch, asg, stage, tr);
                    if (t == Tri::True) return Tri::True;
                    if (t == Tri::Unknown) acc = Tri::Unknown;
                }
                return acc;
            }
        }
        return Tri::False;
    }

    Tri eval_atom(const PlannedAtom& pa, const Assignment& asg, Stage stage, Trace* tr) {
        Tri out;
        if (const auto* ex = std::get_if<dsl::ExistsParticipant>(&pa.atom.node)) {
            out = Tri::False;
            Assignment inner = asg;
            for (const auto& p : ev_->participants) {
                inner.wildcard = &p;
                const Tri t = eval_simple(pa, *ex->inner, inner, stage, tr);
                if (t == Tri::True) {
                    if (tr) tr->lines.push_back(with_bindings(pa.text, inner) + ": true");
                    return Tri::True;
                }
                if (t == Tri::Unknown) out = Tri::Unknown;
            }
        } else {
            out = eval_simple(pa, pa.atom, asg, stage, tr);
        }
        if (tr && out != Tri::Unknown) tr->lines.push_back(with_bindings(pa.text, asg) + ": " + tri_name(out));
        return out;
    }

    Tri eval_simple(const PlannedAtom& pa, const Atom& atom, const Assignment& asg, Stage stage, Trace* tr) {
        switch (pa.cls) {
            case PlannedAtom::Class::Structural:
                return eval_structural(ctx_.kg, atom, *ev_, asg) ? Tri::True : Tri::False;
            case PlannedAtom::Class::Objective:
                return ctx_.kg.check_objective(objective_query(pa.attribution, pa.kind, call_args(atom), *ev_, asg))
                           ? Tri::True
                           : Tri::False;
            case PlannedAtom::Class::Subjective: break;
        }
        if (!ev_->collection) {
            warn("event '" + ev_->label + "' has no linked collection; its subjective atoms are false");
            return Tri::False;
        }
        if (stage == Stage::Objective) return Tri::Unknown;

        std::optional<EntityId> required;
        if (pa.kind != AttributionKind::Event) required = asg.get(call_args(atom)[0]);
        const EntityId key = required.value_or(ev_->label);

        std::vector<ViewpointId> live;
        for (const auto& vp : pa.viewpoints) {
            if (ctx_.index && pa.index_prunable && ctx_.index->viewpoints().contains(vp)) {
                ++result_.counters.index_lookups;
                if (!ctx_.index->may_hold(pa.attribution, key, vp)) {
                    ++result_.counters.index_prunes;
                    if (!pa.any_viewpoint) return Tri::False;
                    continue;
                }
            }
            live.push_back(vp);
        }
        if (live.empty()) return Tri::False;
        if (stage == Stage::Index) return Tri::Unknown;

        std::stable_sort(live.begin(), live.end(), [&](const ViewpointId& a, const ViewpointId& b) {
            return docs(a).size() < docs(b).size();
        });
        for (const auto& vp : live) {
            const auto& outcome = witnesses(pa, required, vp);
            if (tr) {
                tr->evidence.push_back(
                    {pa.id, pa.attribution, key, vp, outcome.holds, outcome.witness_count, outcome.witnesses});
            }
            if (pa.any_viewpoint && outcome.holds) return Tri::True;
            if (!pa.any_viewpoint && !outcome.holds) return Tri::False;
        }
        return pa.any_viewpoint ? Tri::False : Tri::True;
    }

    const std::vector<const Document*>& docs(const ViewpointId& vp) {
        auto it = partitions_.find(vp);
        if (it == partitions_.end()) {
            if (!ctx_.corpus.has_collection(*ev_->collection)) {
                warn("collection '" + *ev_->collection + "' of event '" + ev_->label + "' is not in the corpus");
            }
            it = partitions_.emplace(vp, partition(ctx_.corpus, *ev_, vp)).first;
        }
        return it->second;
    }

    const WitnessOutcome& witnesses(const PlannedAtom& pa, const std::optional<EntityId>& required,
                                    const ViewpointId& vp) {
        const auto cache_key = std::make_tuple(pa.attribution, required.value_or(""), vp);
        if (auto it = outcomes_.find(cache_key); it != outcomes_.end()) return it->second;

        AssessmentRequest req;
        req.attribution = pa.attribution;
        req.question = instantiate_template(ctx_.config.question_template(pa.attribution), ev_->label);
        req.candidates = candidates_;
        req.required_participant = required;

        std::mutex mu;
        AssessFn assess = [&](const AssessmentRequest& r) -> AssessmentResult {
            const auto key = std::make_pair(r.document->doc_id, r.attribution);
            {
                std::lock_guard lock(mu);
                if (auto it = assessments_.find(key); it != assessments_.end()) {
                    ++result_.counters.assessments_reused;
                    return it->second;
                }
            }
            auto res = ctx_.assessor.assess(r);
            std::lock_guard lock(mu);
            ++result_.counters.documents_assessed;
            ++result_.counters.documents_per_atom[pa.id];
            assessments_.emplace(key, res);
            return res;
        };
        auto outcome = evaluate_witnesses(docs(vp), req, ctx_.config.witness, assess);
        result_.counters.documents_skipped += outcome.documents_skipped;
        return outcomes_.emplace(cache_key, std::move(outcome)).first->second;
    }

    void warn(const std::string& msg) {
        if (warned_.insert(msg).second) result_.warnings.push_back(msg);
    }

    const QueryPlan& plan_;
    const ExecutionContext& ctx_;
    QueryResult result_;
    std::set<std::string> warned_;

    const Event* ev_ = nullptr;
    std::vector<Candidate> candidates_;
    std::map<ViewpointId, std::vector<const Document*>> partitions_;
    std::map<std::tuple<std::string, EntityId, ViewpointId>, WitnessOutcome> outcomes_;
    std::map<std::pair<DocId, std::string>, AssessmentResult> assessments_;
};

// ---------------------------------------------------------------------------
// Reference evaluator. Walks the unplanned AST and re-derives everything
// from the graph for every assignment.

class Reference {
public:
    Reference(const QueryPlan& plan, const ExecutionContext& ctx) : plan_(plan), ctx_(ctx) {
        result_.counters.documents_per_atom.assign(plan.atoms.size(), 0);
    }

    QueryResult run() {
        const auto t0 = Clock::now();
        result_.counters.after_pattern = plan_.candidates.size();
        for (const auto& label : plan_.candidates) {
            const Event& ev = ctx_.kg.event(label);
            for (const auto& asg : enumerate_assignments(plan_.prototype.variables, ev)) {
                if (eval(plan_.prototype.where, ev, asg)) {
                    EventMatch m;
                    m.event = label;
                    m.bindings = asg.bindings();
                    result_.matches.push_back(std::move(m));
                    break;
                }
            }
        }
        std::sort(result_.matches.begin(), result_.matches.end(),
                  [](const EventMatch& a, const EventMatch& b) { return a.event < b.event; });
        result_.counters.matched = result_.matches.size();
        result_.counters.after_objective = result_.counters.after_pattern;
        result_.counters.after_index = result_.counters.after_pattern;
        result_.timings.total_ms = ms_since(t0);
        result_.timings.documents_ms = result_.timings.total_ms;
        return std::move(result_);
    }

private:
    bool eval(const Expr& e, const Event& ev, const Assignment& asg) {
        switch (e.op) {
            case Expr::Op::Atom: return atom(*e.atom, ev, asg);
            case Expr::Op::Not: return !eval(e.children[0], ev, asg);
            case Expr::Op::And: {
                const bool l = eval(e.children[0], ev, asg);
                const bool r = eval(e.children[1], ev, asg);
                return l && r;
            }
            case Expr::Op::Or: {
                const bool l = eval(e.children[0], ev, asg);
                const bool r = eval(e.children[1], ev, asg);
                return l || r;
            }
        }
        return false;
    }

    bool atom(const Atom& a, const Event& ev, const Assignment& asg) {
        if (const auto* ex = std::get_if<dsl::ExistsParticipant>(&a.node)) {
            bool any = false;
            Assignment inner = asg;
            for (const auto& p : ev.participants) {
                inner.wildcard = &p;
                if (atom(*ex->inner, ev, inner)) any = true;
            }
            return any;
        }
        if (!is_call(a)) return eval_structural(ctx_.kg, a, ev, asg);
        const auto& name = call_name(a);
        const auto& args = call_args(a);
        const auto* sig = ctx_.kg.find_attribution(name);
        if (!sig->is_subjective()) return ctx_.kg.check_objective(objective_query(name, sig->kind, args, ev, asg));

        std::optional<EntityId> required;
        if (sig->kind != AttributionKind::Event) required = asg.get(args[0]);
        if (const auto* sc = std::get_if<dsl::SubjectiveCall>(&a.node)) {
            bool all = true;
            for (const auto& vp : sc->viewpoints) all = holds(name, ev, required, vp) && all;
            return all;
        }
        bool any = false;
        for (const auto& vp : ctx_.kg.viewpoint_ids()) any = holds(name, ev, required, vp) || any;
        return any;
    }

    bool holds(const std::string& attribution, const Event& ev, const std::optional<EntityId>& required,
               const ViewpointId& vp) {
        if (!ev.collection) return false;
        AssessmentRequest req;
        req.attribution = attribution;
        req.question = instantiate_template(ctx_.config.question_template(attribution), ev.label);
        req.candidates = candidates_for(ctx_.kg, ev);
        req.required_participant = required;
        WitnessPolicy policy = ctx_.config.witness;
        policy.early_stop = false;
        policy.parallelism = 1;
        AssessFn assess = [&](const AssessmentRequest& r) {
            ++result_.counters.documents_assessed;
            return ctx_.assessor.assess(r);
        };
        const auto outcome = evaluate_witnesses(partition(ctx_.corpus, ev, vp), req, policy, assess);
        result_.counters.documents_skipped += outcome.documents_skipped;
        return outcome.holds;
    }

    const QueryPlan& plan_;
    const ExecutionContext& ctx_;
    QueryResult result_;
};

const char* class_name(PlannedAtom::Class c) {
    switch (c) {
        case PlannedAtom::Class::Structural: return "structural";
        case PlannedAtom::Class::Objective: return "objective";
        case PlannedAtom::Class::Subjective: return "subjective";
    }
    return "";
}

const char* pattern_keyword(dsl::Pattern::Kind k) {
    switch (k) {
        case dsl::Pattern::Kind::Event: return "EVENT";
        case dsl::Pattern::Kind::Type: return "TYPE";
        case dsl::Pattern::Kind::Supertype: return "SUPERTYPE";
    }
    return "";
}

}  // namespace

PlanningError::PlanningError(std::vector<std::string> problems)
    : Error("planning failed: " + join(problems, "; ")), problems_(std::move(problems)) {}

std::string QueryPlan::describe() const {
    std::ostringstream os;
    os << "pattern: " << pattern_keyword(prototype.pattern.kind) << ' ' << prototype.pattern.name << " ("
       << candidates.size() << " candidate event" << (candidates.size() == 1 ? "" : "s") << ")\n";
    os << "objective checks: " << objective_checks.size() << '\n';
    for (auto id : objective_checks) os << "  [" << id << "] " << atoms[id].text << "  (" << class_name(atoms[id].cls) << ")\n";
    os << "subjective checks: " << subjective_checks.size() << '\n';
    for (auto id : subjective_checks) {
        const auto& a = atoms[id];
        std::vector<std::string> vps(a.viewpoints.begin(), a.viewpoints.end());
        os << "  [" << id << "] " << a.text << "  (" << (a.any_viewpoint ? "any of {" : "all of {") << join(vps, ", ")
           << "}" << (a.existential ? ", some participant" : "") << (a.index_prunable ? ", index-prunable" : "")
           << ", ~" << a.estimated_documents << " docs)\n";
    }
    return os.str();
}

QueryPlan plan(const dsl::Prototype& prototype, const KnowledgeGraph& kg, const AttributionIndexSet* index,
               const CorpusStore* corpus) {
    return Planner(kg, index, corpus).run(prototype);
}

std::vector<EventLabel> QueryResult::matched_events() const {
    std::vector<EventLabel> out;
    for (const auto& m : matches) out.push_back(m.event);
    return out;
}

QueryResult execute(const QueryPlan& plan, const ExecutionContext& ctx) { return Executor(plan, ctx).run(); }

QueryResult execute_reference(const QueryPlan& plan, const ExecutionContext& ctx) {
    return Reference(plan, ctx).run();
}

nlohmann::ordered_json to_json(const QueryPlan& plan, const QueryResult& result) {
    using J = nlohmann::ordered_json;
    J j;
    j["prototype"] = dsl::render(plan.prototype);
    J atoms = J::array();
    for (const auto& a : plan.atoms) {
        J ja{{"id", a.id}, {"text", a.text}, {"class", class_name(a.cls)}};
        if (a.cls == PlannedAtom::Class::Subjective) {
            ja["viewpoints"] = a.viewpoints;
            ja["any_viewpoint"] = a.any_viewpoint;
            ja["index_prunable"] = a.index_prunable;
            ja["estimated_documents"] = a.estimated_documents;
        }
        atoms.push_back(std::move(ja));
    }
    j["plan"] = {{"candidates", plan.candidates},
                 {"atoms", std::move(atoms)},
                 {"objective_checks", plan.objective_checks},
                 {"subjective_checks", plan.subjective_checks}};
    J matches = J::array();
    for (const auto& m : result.matches) {
        J evidence = J::array();
        for (const auto& e : m.evidence) {
            J ws = J::array();
            for (const auto& w : e.witnesses) {
                ws.push_back({{"doc_id", w.doc_id},
                              {"rank_score", w.rank_score},
                              {"answer", w.result.answer_phrase},
                              {"confidence", w.result.confidence},
                              {"canonical_target", w.result.canonical_target ? J(*w.result.canonical_target) : J(nullptr)},
                              {"similarity", w.result.similarity}});
            }
            evidence.push_back({{"atom", e.atom},
                                {"attribution", e.attribution},
                                {"participant", e.participant},
                                {"viewpoint", e.viewpoint},
                                {"holds", e.holds},
                                {"witness_count", e.witness_count},
                                {"witnesses", std::move(ws)}});
        }
        matches.push_back({{"event", m.event},
                           {"bindings", m.bindings},
                           {"justification", m.justification},
                           {"evidence", std::move(evidence)}});
    }
    j["matches"] = std::move(matches);
    const auto& c = result.counters;
    j["counters"] = {{"after_pattern", c.after_pattern},
                     {"after_objective", c.after_objective},
                     {"after_index", c.after_index},
                     {"matched", c.matched},
                     {"index_lookups", c.index_lookups},
                     {"index_prunes", c.index_prunes},
                     {"documents_assessed", c.documents_assessed},
                     {"assessments_reused", c.assessments_reused},
                     {"documents_skipped", c.documents_skipped},
                     {"documents_per_atom", c.documents_per_atom}};
    const auto& t = result.timings;
    j["timings_ms"] = {{"pattern", t.pattern_ms},
                       {"objective", t.objective_ms},
                       {"index", t.index_ms},
                       {"documents", t.documents_ms},
                       {"total", t.total_ms}};
    j["warnings"] = result.warnings;
    return j;
}

std::set<std::string> subjective_attributions(const KnowledgeGraph& kg) {
    std::set<std::string> out;
    for (const auto& [name, sig] : kg.attribution_schema()) {
        if (sig.is_subjective()) out.insert(name);
    }
    return out;
}

std::vector<AttributionPositive> collect_positives_by_scan(const KnowledgeGraph& kg, const CorpusStore& corpus,
                                                           const Assessor& assessor, const EngineConfig& config) {
    std::set<AttributionPositive> found;
    const auto attributions = subjective_attributions(kg);
    for (const auto& [label, ev] : kg.events()) {
        if (!ev.collection || !corpus.has_collection(*ev.collection)) continue;
        const auto candidates = candidates_for(kg, ev);
        for (const auto* doc : corpus.documents_for(*ev.collection)) {
            for (const auto& attribution : attributions) {
                AssessmentRequest req;
                req.document = doc;
                req.attribution = attribution;
                req.question = instantiate_template(config.question_template(attribution), label);
                req.candidates = candidates;
                const auto res = assessor.assess(req);
                if (res.confidence < config.witness.confidence_threshold) continue;
                std::string key;
                if (kg.find_attribution(attribution)->kind == AttributionKind::Event) {
                    key = label;
                } else if (res.canonical_target) {
                    key = *res.canonical_target;
                } else {
                    continue;
                }
                for (const auto& vp : doc->viewpoints) found.insert({attribution, vp, key});
            }
        }
    }
    return {found.begin(), found.end()};
}

}  // namespace narratekg
