#include "support.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace testsupport {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path fixture_dir() { return fs::path(NARRATEKG_FIXTURE_DIR); }
fs::path fixture_path(const std::string& name) { return fixture_dir() / name; }

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ExecutionContext World::context(bool with_index) const {
    return {kg, corpus, with_index && index ? &*index : nullptr, *assessor, config};
}

void World::build_index() {
    const auto positives = collect_positives_by_scan(kg, corpus, *assessor, config);
    index = narratekg::build_index(positives, subjective_attributions(kg), kg.viewpoint_ids(), config.index);
}

QueryResult World::run(const std::string& prototype, bool with_index) const {
    const auto ctx = context(with_index);
    const auto p = plan(dsl::parse(prototype), kg, ctx.index, &corpus);
    return execute(p, ctx);
}

QueryResult World::run_reference(const std::string& prototype) const {
    const auto ctx = context(false);
    return execute_reference(plan(dsl::parse(prototype), kg, nullptr, &corpus), ctx);
}

KnowledgeGraph kg_from_text(const std::string& jsonl) {
    std::istringstream in(jsonl);
    return ingest_kg(in);
}

CorpusStore corpus_from_docs(const std::vector<Document>& docs) {
    CorpusStore c;
    for (const auto& d : docs) c.add(d);
    return c;
}

namespace {

CorpusIngestOptions fixture_corpus_options(const KnowledgeGraph& kg, const EngineConfig& config) {
    CorpusIngestOptions o;
    o.outlet_viewpoints = config.outlet_viewpoints;
    o.known_viewpoints = kg.viewpoint_ids();
    return o;
}

}  // namespace

World fixture_world() {
    World w;
    w.config = EngineConfig::load(fixture_path("config.json").string());
    w.kg = load_kg(fixture_path("kg.jsonl").string());
    w.corpus = load_corpus(fixture_path("corpus.jsonl").string(), fixture_corpus_options(w.kg, w.config));
    w.assessor = std::make_unique<BaselineAssessor>(w.config.baseline);
    return w;
}

std::vector<Document> fixture_documents() {
    const auto w = fixture_world();
    std::vector<Document> out;
    for (const auto& [id, d] : w.corpus.documents()) out.push_back(d);
    return out;
}

World fixture_world_with(const std::vector<Document>& docs) {
    World w;
    w.config = EngineConfig::load(fixture_path("config.json").string());
    w.kg = load_kg(fixture_path("kg.jsonl").string());
    w.corpus = corpus_from_docs(docs);
    w.assessor = std::make_unique<BaselineAssessor>(w.config.baseline);
    return w;
}

std::vector<NamedPrototypeText> fixture_prototypes() {
    std::vector<NamedPrototypeText> out;
    std::istringstream in(read_file(fixture_path("prototypes.txt")));
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto colon = line.find(':');
        auto text = line.substr(colon + 1);
        text.erase(0, text.find_first_not_of(' '));
        out.push_back({line.substr(0, colon), text});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Random worlds

namespace {

const std::vector<std::string> kNames = {"Alpha", "Bravo", "Charlie", "Delta", "Echo", "Foxtrot", "Golf", "Hotel"};
const std::vector<std::string> kFillers = {"quickly", "reportedly", "again", "openly", "once", "today", "there", "still"};
const std::vector<std::string> kNoise = {"The talks continued without result.", "Markets were calm.",
                                         "Officials met in the capital.", "Nothing changed overnight.",
                                         "A ceasefire was discussed."};

std::size_t pick(Rng& rng, std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); }
bool chance(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

template <typename T>
const T& pick_of(Rng& rng, const std::vector<T>& v) {
    return v[pick(rng, v.size())];
}

std::string date(int year, int month, int day) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
    return buf;
}

const std::map<std::string, std::vector<std::string>> kRoleSchema = {
    {"ta", {"r0", "r1"}}, {"tb", {"r1", "r2"}}, {"tc", {"r0", "r2"}}};

std::string signal_phrase(const std::string& attribution) {
    if (attribution == "s0") return "signal zero";
    if (attribution == "s1") return "signal one";
    return "signal event";
}

std::string positive_sentence(Rng& rng, const std::string& attribution, const std::string& name) {
    std::string s = name.empty() ? "Today" : name;
    // Up to 3 fillers keeps the confidence at 0.95 * 0.9^3 > 0.5.
    const auto gap = pick(rng, 4);
    for (std::size_t i = 0; i < gap; ++i) s += " " + pick_of(rng, kFillers);
    return s + " " + signal_phrase(attribution) + ".";
}

std::string random_sentence(Rng& rng, const std::vector<std::string>& names) {
    static const std::vector<std::string> attrs = {"s0", "s1", "sev"};
    const auto& attr = pick_of(rng, attrs);
    const std::string name = names.empty() ? "" : pick_of(rng, names);
    switch (pick(rng, 5)) {
        case 0: {
            // Too far from the signal to be confident.
            std::string s = name.empty() ? "Today" : name;
            for (int i = 0; i < 8; ++i) s += " " + pick_of(rng, kFillers);
            return s + " " + signal_phrase(attr) + ".";
        }
        case 1: return "Reports denied that " + (name.empty() ? "anyone" : name) + " " + signal_phrase(attr) + ".";
        case 2: return pick_of(rng, kNoise);
        default: return positive_sentence(rng, attr, name);
    }
}

}  // namespace

Document random_positive(Rng& rng, const std::string& doc_id, const std::string& collection,
                         const std::set<ViewpointId>& viewpoints, const std::string& attribution,
                         const std::string& entity_name) {
    Document d;
    d.doc_id = doc_id;
    d.collection = collection;
    d.outlet = "generated";
    d.viewpoints = viewpoints;
    d.headline = "Report " + doc_id;
    d.body = pick_of(rng, kNoise) + " " + positive_sentence(rng, attribution, entity_name);
    return d;
}

World random_world(Rng& rng, const RandomWorldOptions& options) {
    std::vector<json> recs;
    for (const auto* t : {"top", "ta", "tb", "tc"}) recs.push_back({{"kind", "type"}, {"id", t}});
    recs.push_back({{"kind", "supertype"}, {"child", "ta"}, {"parent", "top"}});
    recs.push_back({{"kind", "supertype"}, {"child", "tb"}, {"parent", "top"}});
    recs.push_back({{"kind", "supertype"}, {"child", "tc"}, {"parent", "ta"}});
    for (const auto* r : {"r0", "r1", "r2"}) recs.push_back({{"kind", "role"}, {"id", r}});
    for (const auto& [t, roles] : kRoleSchema) recs.push_back({{"kind", "role_schema"}, {"type", t}, {"roles", roles}});
    recs.push_back({{"kind", "location"}, {"id", "l0"}, {"name", "Zero"}});
    recs.push_back({{"kind", "location"}, {"id", "l1"}, {"name", "One"}});

    std::vector<std::string> vps = {"V0", "V1", "V2"};
    vps.resize(1 + pick(rng, 3));
    for (const auto& v : vps) recs.push_back({{"kind", "viewpoint"}, {"id", v}, {"name", v}});

    recs.push_back({{"kind", "attribution"}, {"name", "o1"}, {"target", "entity-in-event"}, {"subjectivity", "objective"}});
    recs.push_back({{"kind", "attribution"}, {"name", "oev"}, {"target", "event"}, {"subjectivity", "objective"}});
    recs.push_back({{"kind", "attribution"}, {"name", "s0"}, {"target", "entity-in-event"}, {"subjectivity", "subjective"}});
    recs.push_back({{"kind", "attribution"}, {"name", "s1"}, {"target", "entity-in-event"}, {"subjectivity", "subjective"}});
    recs.push_back({{"kind", "attribution"}, {"name", "sev"}, {"target", "event"}, {"subjectivity", "subjective"}});

    const std::size_t n_entities = 1 + pick(rng, options.max_entities);
    std::vector<std::string> names(kNames.begin(), kNames.begin() + static_cast<long>(n_entities));
    for (const auto& n : names) {
        recs.push_back({{"kind", "entity"},
                        {"id", n},
                        {"name", n},
                        {"aliases", json::array()},
                        {"attributes", json::array({{{"name", "rank"}, {"value", static_cast<double>(1 + pick(rng, 5))}}})}});
    }

    const std::size_t n_events = 1 + pick(rng, options.max_events);
    std::vector<std::string> collections;
    std::map<std::string, std::vector<std::string>> participants_of;
    for (std::size_t i = 0; i < n_events; ++i) {
        const std::string label = "E" + std::to_string(i);
        std::vector<std::string> types = {pick_of(rng, std::vector<std::string>{"ta", "tb", "tc"})};
        if (chance(rng, 0.2)) {
            const std::string extra = pick_of(rng, std::vector<std::string>{"ta", "tb", "tc"});
            if (extra != types[0]) types.push_back(extra);
        }
        std::set<std::string> permitted;
        for (const auto& t : types) permitted.insert(kRoleSchema.at(t).begin(), kRoleSchema.at(t).end());
        std::vector<std::string> perm(permitted.begin(), permitted.end());

        std::vector<std::string> shuffled = names;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        shuffled.resize(1 + pick(rng, std::min<std::size_t>(4, names.size())));
        json roles = json::array();
        for (const auto& p : shuffled) {
            if (chance(rng, 0.6)) roles.push_back({{"entity", p}, {"role", pick_of(rng, perm)}});
        }
        const int y = 2000 + static_cast<int>(pick(rng, 20));
        json time = chance(rng, 0.5) ? json(date(y, 1 + static_cast<int>(pick(rng, 12)), 1))
                                     : json{{"start", date(y, 1, 1)}, {"end", date(y + 1 + static_cast<int>(pick(rng, 3)), 6, 30)}};
        recs.push_back({{"kind", "event"},
                        {"label", label},
                        {"time", time},
                        {"location", chance(rng, 0.5) ? "l0" : "l1"},
                        {"types", types},
                        {"participants", shuffled},
                        {"roles", roles}});
        participants_of[label] = shuffled;
        for (const auto& p : shuffled) {
            if (chance(rng, 0.3)) recs.push_back({{"kind", "objective"}, {"name", "o1"}, {"event", label}, {"entity", p}});
        }
        if (chance(rng, 0.5)) recs.push_back({{"kind", "objective"}, {"name", "oev"}, {"event", label}});
        if (chance(rng, 0.85)) {
            const std::string coll = "c_" + label;
            recs.push_back({{"kind", "collection_link"}, {"event", label}, {"collection", coll}});
            collections.push_back(coll);
        }
    }

    std::string kg_text;
    for (const auto& r : recs) kg_text += r.dump() + "\n";

    World w;
    w.kg = kg_from_text(kg_text);
    w.config = EngineConfig::defaults();
    w.config.baseline.lexicon = {{"s0", {"signal zero"}}, {"s1", {"signal one"}}, {"sev", {"signal event"}}};
    w.config.question_templates = {{"s0", "Who did zero in <EVENT_MASK>"},
                                   {"s1", "Who did one in <EVENT_MASK>"},
                                   {"sev", "What happened in <EVENT_MASK>"}};
    w.config.witness.min_witnesses = 1 + pick(rng, 2);
    w.config.witness.parallelism = 1;

    const std::size_t n_docs = collections.empty() ? 0 : pick(rng, options.max_documents + 1);
    for (std::size_t i = 0; i < n_docs; ++i) {
        Document d;
        d.doc_id = "d" + std::to_string(100 + i);
        d.collection = pick_of(rng, collections);
        d.outlet = "generated";
        d.viewpoints.insert(pick_of(rng, vps));
        if (chance(rng, 0.25)) d.viewpoints.insert(pick_of(rng, vps));
        d.headline = "Item " + std::to_string(i);
        // Mentions are drawn mostly from the event's own participants.
        const auto& parts = participants_of[d.collection.substr(2)];
        const std::size_t sentences = 1 + pick(rng, 3);
        for (std::size_t s = 0; s < sentences; ++s) {
            d.body += (s ? " " : "") + random_sentence(rng, chance(rng, 0.8) ? parts : names);
        }
        w.corpus.add(std::move(d));
    }
    w.assessor = std::make_unique<BaselineAssessor>(w.config.baseline);
    return w;
}

// ---------------------------------------------------------------------------
// Random prototypes against a world

namespace {

struct ProtoGen {
    Rng& rng;
    const World& w;
    std::vector<std::string> vars;

    std::string subject() { return vars.empty() ? "" : pick_of(rng, vars); }

    std::string viewpoint_set() {
        std::vector<std::string> vps;
        for (const auto& v : w.kg.viewpoint_ids()) vps.push_back(v);
        std::shuffle(vps.begin(), vps.end(), rng);
        vps.resize(1 + pick(rng, vps.size()));
        std::string out = " FROM {";
        for (std::size_t i = 0; i < vps.size(); ++i) out += (i ? ", " : "") + vps[i];
        return out + "}";
    }

    std::string subjective(const std::string& subj) {
        const std::string attr = chance(rng, 0.5) ? "s0" : "s1";
        return attr + "(" + subj + ")" + (chance(rng, 0.5) ? viewpoint_set() : "");
    }

    std::string participant_atom(const std::string& subj) {
        switch (pick(rng, 6)) {
            case 0: return "role(" + subj + ") = " + pick_of(rng, std::vector<std::string>{"r0", "r1", "r2"});
            case 1: return "name(" + subj + ") = \"" + pick_of(rng, kNames) + "\"";
            case 2: return "rank(" + subj + ") " + pick_of(rng, std::vector<std::string>{">", "<=", "!="}) + " " +
                           std::to_string(1 + pick(rng, 5));
            case 3: return "o1(" + subj + ")";
            default: return subjective(subj);
        }
    }

    std::string event_atom() {
        switch (pick(rng, 7)) {
            case 0: return "oev()";
            case 1: return "participant_count() >= " + std::to_string(1 + pick(rng, 4));
            case 2: return "location() = l" + std::to_string(pick(rng, 2));
            case 3: return "time_within(\"2005-01-01\", \"2014-12-31\")";
            case 4: return "sev()" + (chance(rng, 0.5) ? viewpoint_set() : std::string());
            default: return "EXISTS(" + participant_atom("_") + ")";
        }
    }

    std::string atom() {
        if (vars.empty() || chance(rng, 0.3)) return event_atom();
        const auto s = subject();
        if (chance(rng, 0.1)) return "role_equals(" + s + ", \"r" + std::to_string(pick(rng, 3)) + "\")";
        return participant_atom(s);
    }

    std::string expr(int depth) {
        if (depth == 0 || chance(rng, 0.4)) return atom();
        switch (pick(rng, 5)) {
            case 0: return "NOT " + factor(depth - 1);
            case 1:
            case 2: return factor(depth - 1) + " AND " + factor(depth - 1);
            default: return factor(depth - 1) + " OR " + factor(depth - 1);
        }
    }

    std::string factor(int depth) {
        auto e = expr(depth);
        return e.find(' ') == std::string::npos || e.rfind("EXISTS", 0) == 0 ? e : "(" + e + ")";
    }
};

}  // namespace

std::string random_prototype(Rng& rng, const World& w) {
    ProtoGen g{rng, w, {}};
    const auto nvars = pick(rng, 3);
    if (nvars >= 1) g.vars.push_back("x");
    if (nvars >= 2) g.vars.push_back("y");

    std::string out = "MATCH ";
    switch (pick(rng, 4)) {
        case 0:
        case 1: {
            std::vector<std::string> labels;
            for (const auto& [l, e] : w.kg.events()) labels.push_back(l);
            out += "EVENT " + pick_of(rng, labels);
            break;
        }
        case 2: out += "TYPE " + pick_of(rng, std::vector<std::string>{"ta", "tb", "tc"}); break;
        default: out += "SUPERTYPE " + pick_of(rng, std::vector<std::string>{"top", "ta"}); break;
    }
    if (!g.vars.empty()) {
        out += " BIND ";
        for (std::size_t i = 0; i < g.vars.size(); ++i) out += (i ? ", " : "") + g.vars[i];
    }
    return out + " WHERE " + g.expr(3);
}

// ---------------------------------------------------------------------------
// Random ASTs

namespace {

struct AstGen {
    Rng& rng;
    std::vector<std::string> vars;

    std::string ident() {
        static const std::vector<std::string> stems = {"a", "is_b", "c_d", "Foo", "x1", "_y", "w", "event2", "match"};
        std::string s = pick_of(rng, stems);
        if (chance(rng, 0.5)) s += std::to_string(pick(rng, 100));
        return s;
    }

    std::string text() {
        static const std::string alphabet = "abc XYZ09_-\"\\\n\t\r{}(),=<>!#";
        std::string s;
        const auto n = pick(rng, 8);
        for (std::size_t i = 0; i < n; ++i) s += alphabet[pick(rng, alphabet.size())];
        return s;
    }

    double number() {
        switch (pick(rng, 3)) {
            case 0: return static_cast<double>(static_cast<int>(pick(rng, 2001)) - 1000);
            case 1: return std::uniform_real_distribution<double>(-1e6, 1e6)(rng);
            default: return std::ldexp(std::uniform_real_distribution<double>(-1, 1)(rng), static_cast<int>(pick(rng, 200)) - 100);
        }
    }

    dsl::Arg subject(bool wildcard) {
        if (wildcard) return dsl::Wildcard{};
        return dsl::Var{pick_of(rng, vars)};
    }

    dsl::Arg arg(bool in_exists) {
        switch (pick(rng, 3)) {
            case 0: return text();
            case 1: return number();
            default:
                if (vars.empty() && !in_exists) return text();
                return subject(in_exists && (vars.empty() || chance(rng, 0.5)));
        }
    }

    dsl::Literal literal() {
        switch (pick(rng, 3)) {
            case 0: return text();
            case 1: return number();
            default: return dsl::Symbol{ident()};
        }
    }

    std::vector<std::string> viewpoints() {
        std::vector<std::string> v;
        const auto n = 1 + pick(rng, 3);
        for (std::size_t i = 0; i < n; ++i) v.push_back(ident());
        return v;
    }

    // `needs_wildcard`: body of EXISTS, must mention '_'.
    dsl::Atom simple(bool in_exists) {
        const bool can_subject = in_exists || !vars.empty();
        switch (pick(rng, can_subject ? 4 : 2)) {
            case 0: {
                dsl::ObjectiveCall c{ident(), {}};
                if (c.name == "role") c.name = "roles";
                const auto n = pick(rng, 3);
                for (std::size_t i = 0; i < n; ++i) c.args.push_back(arg(in_exists));
                if (in_exists) c.args.insert(c.args.begin(), dsl::Wildcard{});
                return {c};
            }
            case 1: {
                dsl::SubjectiveCall c{ident(), {}, viewpoints()};
                if (c.name == "role") c.name = "roles";
                if (is_builtin_predicate(c.name)) c.name += "_x";
                const auto n = pick(rng, 2);
                for (std::size_t i = 0; i < n; ++i) c.args.push_back(arg(in_exists));
                if (in_exists) c.args.push_back(dsl::Wildcard{});
                return {c};
            }
            case 2: return {dsl::RoleBinding{subject(in_exists), chance(rng, 0.5) ? ident() : text()}};
            default: {
                dsl::AttributeTest t;
                t.subject = subject(in_exists);
                if (!in_exists && chance(rng, 0.3)) t.subject.reset();
                t.function = ident();
                if (t.function == "role") t.function = "roles";
                t.comparator = static_cast<dsl::Comparator>(pick(rng, 6));
                t.value = literal();
                return {t};
            }
        }
    }

    dsl::Atom atom() {
        if (chance(rng, 0.2)) return {dsl::ExistsParticipant{simple(true)}};
        return simple(false);
    }

    dsl::Expr expr(int depth) {
        if (depth == 0 || chance(rng, 0.35)) return dsl::Expr::leaf(atom());
        switch (pick(rng, 3)) {
            case 0: return dsl::Expr::negate(expr(depth - 1));
            case 1: return dsl::Expr::conj(expr(depth - 1), expr(depth - 1));
            default: return dsl::Expr::disj(expr(depth - 1), expr(depth - 1));
        }
    }
};

}  // namespace

dsl::Prototype random_ast(Rng& rng) {
    AstGen g{rng, {}};
    dsl::Prototype p;
    p.pattern.kind = static_cast<dsl::Pattern::Kind>(pick(rng, 3));
    p.pattern.name = g.ident();
    const auto nvars = pick(rng, 4);
    for (std::size_t i = 0; i < nvars; ++i) {
        auto v = g.ident();
        if (std::find(p.variables.begin(), p.variables.end(), v) == p.variables.end()) p.variables.push_back(v);
    }
    g.vars = p.variables;
    p.where = g.expr(5);
    return p;
}

// ---------------------------------------------------------------------------
// Calibration corpus

World calibration_world(std::size_t per_collection) {
    // Viewpoint skew per collection: most coverage is US/UK, RU is thin.
    struct Mix {
        std::string collection;
        std::size_t us, uk, ru;
    };
    const std::size_t n = per_collection;
    const std::vector<Mix> mixes = {
        {"vietnam-docs", n * 55 / 100, n * 425 / 1000, n - n * 55 / 100 - n * 425 / 1000},
        {"gulf-docs", n * 55 / 100, n - n * 55 / 100, 0},
        {"iraq-docs", n * 45 / 100, n * 40 / 100, n - n * 45 / 100 - n * 40 / 100},
        {"crimea-docs", n * 45 / 100, n * 40 / 100, n - n * 45 / 100 - n * 40 / 100},
        {"ruc22-docs", n * 45 / 100, n * 40 / 100, n - n * 45 / 100 - n * 40 / 100},
    };
    static const std::vector<std::string> filler = {
        "Delegations met again to discuss the situation.", "Analysts expect further talks next week.",
        "Shipping in the region slowed.", "The parliament debated the budget.",
        "Correspondents described the mood in the capital as tense.", "Aid convoys reached the border towns."};

    std::vector<Document> docs;
    for (const auto& m : mixes) {
        const std::string stem = m.collection.substr(0, m.collection.find('-'));
        auto add = [&](const std::string& vp, std::size_t count) {
            for (std::size_t i = 0; i < count; ++i) {
                Document d;
                char id[64];
                std::snprintf(id, sizeof id, "%s-%s-%04zu", stem.c_str(), vp.c_str(), i);
                d.doc_id = id;
                d.collection = m.collection;
                d.outlet = vp == "US" ? "New York Times" : vp == "UK" ? "The Guardian" : "RT.com";
                d.viewpoints = {vp};
                d.headline = "Dispatch " + std::to_string(i);
                d.body = filler[i % filler.size()] + " " + filler[(i * 7 + 3) % filler.size()];
                docs.push_back(std::move(d));
            }
        };
        add("US", m.us);
        add("UK", m.uk);
        add("RU", m.ru);
    }
    auto seed = [&](const std::string& id, const std::string& body) {
        auto it = std::find_if(docs.begin(), docs.end(), [&](const Document& d) { return d.doc_id == id; });
        it->body = body;
    };
    // Sparse positives, first in their partitions.
    seed("vietnam-US-0000", "Hanoi launched an offensive across the border.");
    seed("ruc22-US-0000", "Officials said Russia launched an offensive along the border.");
    seed("ruc22-UK-0000", "Moscow was the aggressor, ministers said.");
    seed("ruc22-US-0001", "Russia is an enemy of the free world, one senator said.");
    seed("iraq-UK-0000", "America invaded in March.");

    World w;
    w.config = EngineConfig::load(fixture_path("config.json").string());
    w.kg = load_kg(fixture_path("kg.jsonl").string());
    w.corpus = corpus_from_docs(docs);
    w.assessor = std::make_unique<BaselineAssessor>(w.config.baseline);
    return w;
}

std::vector<std::string> labels(const QueryResult& r) { return r.matched_events(); }

}  // namespace testsupport
