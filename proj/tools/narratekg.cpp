// narratekg: ingest, build-index, query and bench over a workspace directory.
//
// exit codes: 0 ok, 1 user error, 2 environment error, 3 invariant breach

#include "narratekg/bench.hpp"
#include "narratekg/query.hpp"
#include "narratekg/workspace.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include <unistd.h>

namespace fs = std::filesystem;
using namespace narratekg;

namespace {

enum Exit { kOk = 0, kUser = 1, kEnv = 2, kInvariant = 3 };

struct InvariantBreach : Error {
    using Error::Error;
};
struct UsageError : Error {
    using Error::Error;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_report(const std::string& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error("cannot write report '" + path + "'");
    out << j.dump(2) << '\n';
}

void print_result(std::ostream& os, const QueryResult& res) {
    if (res.matches.empty()) os << "no matching events\n";
    for (const auto& m : res.matches) {
        os << m.event;
        if (!m.bindings.empty()) {
            os << "  [";
            bool first = true;
            for (const auto& [var, ent] : m.bindings) {
                os << (first ? "" : ", ") << var << " = " << ent;
                first = false;
            }
            os << ']';
        }
        os << '\n';
        for (const auto& j : m.justification) os << "    " << j << '\n';
        for (const auto& e : m.evidence) {
            os << "    evidence " << e.attribution << '(' << e.participant << ") from " << e.viewpoint << ": "
               << e.witness_count << " witness" << (e.witness_count == 1 ? "" : "es") << (e.holds ? "" : " (below threshold)")
               << '\n';
            for (const auto& w : e.witnesses) {
                os << "      " << w.doc_id << "  score " << w.rank_score << "  \"" << w.result.answer_phrase << "\"\n";
            }
        }
    }
    const auto& c = res.counters;
    os << "candidates: pattern " << c.after_pattern << ", objective " << c.after_objective << ", index "
       << c.after_index << ", matched " << c.matched << "; index prunes " << c.index_prunes << "; documents assessed "
       << c.documents_assessed;
    if (c.documents_skipped) os << "; skipped " << c.documents_skipped;
    os << "; " << res.timings.total_ms << " ms\n";
    for (const auto& w : res.warnings) os << "warning: " << w << '\n';
}

// Runs one prototype; returns false on a user error (already reported).
bool run_query(const Workspace& ws, const Assessor& assessor, const std::string& text, bool use_index,
               const std::string& report_path) {
    dsl::Prototype ast;
    try {
        ast = dsl::parse(text);
    } catch (const dsl::ParseError& e) {
        std::cerr << dsl::format_diagnostic(text, e);
        return false;
    }
    const AttributionIndexSet* index = use_index && ws.index ? &*ws.index : nullptr;
    QueryPlan p;
    try {
        p = plan(ast, ws.kg, index, &ws.corpus);
    } catch (const PlanningError& e) {
        std::cerr << "error: planning failed\n";
        for (const auto& problem : e.problems()) std::cerr << "  " << problem << '\n';
        return false;
    }
    ExecutionContext ctx{ws.kg, ws.corpus, index, assessor, ws.config};
    const auto res = execute(p, ctx);
    print_result(std::cout, res);
    if (!report_path.empty()) write_report(report_path, to_json(p, res));
    return true;
}

int cmd_ingest(const std::string& root, const std::string& kg, const std::string& corpus, const std::string& config) {
    const auto s = ingest_workspace(root, kg, corpus, config);
    std::cout << "ingested " << s.events << " events, " << s.entities << " entities, " << s.documents
              << " documents in " << s.collections << " collections";
    if (s.dropped) std::cout << " (" << s.dropped << " dropped by filters)";
    std::cout << '\n';
    for (const auto& w : s.warnings) std::cout << "warning: " << w << '\n';
    auto ws = open_workspace(root);
    log_run(ws.paths, "ingest", ws.config);
    return kOk;
}

int cmd_build_index(const std::string& root, std::optional<double> fpr, std::optional<std::uint64_t> capacity,
                    const std::string& source, const std::string& log_path) {
    if (fpr && !(*fpr > 0.0 && *fpr < 1.0)) throw UsageError("--fpr must be in (0, 1)");
    auto ws = open_workspace(root);
    auto options = ws.config.index;
    if (fpr) options.target_fpr = *fpr;
    if (capacity) options.capacity_hint = *capacity;

    std::vector<AttributionPositive> positives;
    if (source == "scan") {
        const auto assessor = make_assessor(ws.config);
        positives = collect_positives_by_scan(ws.kg, ws.corpus, *assessor, ws.config);
        std::ofstream log(ws.paths.positives_log(), std::ios::trunc);
        write_positive_log(log, positives);
    } else {
        const std::string path = log_path.empty() ? ws.paths.positives_log().string() : log_path;
        std::ifstream in(path);
        if (!in) throw NotFoundError("cannot open evaluation log '" + path + "'");
        positives = read_positive_log(in);
    }
    const auto index = build_index(positives, subjective_attributions(ws.kg), ws.kg.viewpoint_ids(), options);
    index.save(ws.paths.index().string());
    ws.config.index = options;
    log_run(ws.paths, "build-index", ws.config);

    std::cout << "index written to " << ws.paths.index().string() << " (" << positives.size()
              << " positives, target fpr " << options.target_fpr << ")\n";
    for (const auto& [a, f] : index.coarse()) {
        std::cout << "  coarse " << a << ": n=" << f.inserted_count() << " m=" << f.bit_count()
                  << " k=" << f.hash_count() << '\n';
    }
    for (const auto& [key, f] : index.fine()) {
        std::cout << "  fine   " << key.first << '/' << key.second << ": n=" << f.inserted_count()
                  << " m=" << f.bit_count() << " k=" << f.hash_count() << '\n';
    }
    return kOk;
}

int cmd_query(const std::string& root, const std::string& query, const std::string& file, bool no_index,
              const std::string& report) {
    const auto ws = open_workspace(root);
    log_run(ws.paths, "query", ws.config);
    const auto assessor = make_assessor(ws.config);
    if (!query.empty() || !file.empty()) {
        const std::string text = !query.empty() ? query : read_file(file);
        return run_query(ws, *assessor, text, !no_index, report) ? kOk : kUser;
    }
    // REPL: one prototype per line, no state carried between lines.
    std::string line;
    const bool tty = isatty(0);
    while ((!tty || std::cerr << "> ") && std::getline(std::cin, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        run_query(ws, *assessor, line, !no_index, report);
        std::cout.flush();
    }
    return kOk;
}

int cmd_bench(const std::string& root, const std::string& prototypes_path, std::size_t repeat, double delay_ms,
              const std::string& report_path) {
    if (delay_ms < 0) throw UsageError("--assessor-delay must not be negative");
    if (repeat == 0) throw UsageError("--repeat must be at least 1");
    const auto ws = open_workspace(root);
    if (!ws.index) throw NotFoundError("workspace has no index; run build-index first");
    std::ifstream in(prototypes_path);
    if (!in) throw NotFoundError("cannot open prototype file '" + prototypes_path + "'");
    const auto prototypes = read_prototype_file(in);
    if (prototypes.empty()) throw UsageError("prototype file '" + prototypes_path + "' contains no prototypes");
    log_run(ws.paths, "bench", ws.config);

    const auto base = make_assessor(ws.config);
    DelayedAssessor delayed(*base, std::chrono::microseconds(static_cast<long long>(delay_ms * 1000.0)));
    const Assessor& assessor = delay_ms > 0 ? static_cast<const Assessor&>(delayed) : *base;
    ExecutionContext ctx{ws.kg, ws.corpus, &*ws.index, assessor, ws.config};
    BenchOptions opts;
    opts.repeat = repeat;
    const auto report = run_bench(prototypes, ctx, opts);

    std::printf("%-10s %12s %14s %9s %10s %10s %7s  %s\n", "prototype", "indexed ms", "non-indexed ms", "speedup",
                "docs idx", "docs full", "prunes", "matched");
    for (const auto& r : report.rows) {
        std::string matched;
        for (const auto& m : r.matched) matched += (matched.empty() ? "" : ",") + m;
        std::printf("%-10s %12.3f %14.3f %8.2fx %10zu %10zu %7zu  {%s}%s\n", r.name.c_str(), r.indexed_ms, r.plain_ms,
                    r.indexed_ms > 0 ? r.plain_ms / r.indexed_ms : 0.0, r.documents_indexed, r.documents_plain,
                    r.index_prunes, matched.c_str(), r.diverged ? "  DIVERGED" : "");
    }
    std::printf("aggregate speedup %.2fx (median of %zu runs)\n", report.aggregate_speedup, report.repeat);
    if (!report_path.empty()) write_report(report_path, report.to_json());
    if (report.diverged()) throw InvariantBreach("indexed and non-indexed results differ");
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"narrative queries over an event-centric knowledge graph"};
    app.require_subcommand(1);
    std::string workspace = "workspace";

    auto* ingest = app.add_subcommand("ingest", "validate inputs and write a workspace snapshot");
    std::string kg_path, corpus_path, config_path;
    ingest->add_option("--workspace,-w", workspace, "workspace directory");
    ingest->add_option("--kg", kg_path, "knowledge graph (JSONL)")->required();
    ingest->add_option("--corpus", corpus_path, "document corpus (JSONL)")->required();
    ingest->add_option("--config", config_path, "engine config (JSON)");

    auto* build = app.add_subcommand("build-index", "build the attribution index");
    std::optional<double> fpr;
    std::optional<std::uint64_t> capacity;
    std::string source = "scan", log_path;
    build->add_option("--workspace,-w", workspace, "workspace directory");
    build->add_option("--fpr", fpr, "target false-positive rate per filter");
    build->add_option("--capacity", capacity, "expected elements per filter");
    build->add_option("--source", source, "positives from a corpus scan or an evaluation log")
        ->check(CLI::IsMember({"scan", "log"}));
    build->add_option("--log", log_path, "evaluation log for --source log");

    auto* query = app.add_subcommand("query", "evaluate a prototype; reads prototypes from stdin when none is given");
    std::string query_text, query_file, report_path;
    bool no_index = false;
    query->add_option("--workspace,-w", workspace, "workspace directory");
    query->add_option("prototype", query_text, "prototype text");
    query->add_option("--file,-f", query_file, "read the prototype from a file");
    query->add_flag("--no-index", no_index, "evaluate without index pruning");
    query->add_option("--report", report_path, "write a JSON report");

    auto* bench = app.add_subcommand("bench", "compare indexed and non-indexed runs");
    std::string prototypes_path;
    std::size_t repeat = 5;
    double delay_ms = 0;
    bench->add_option("--workspace,-w", workspace, "workspace directory");
    bench->add_option("--prototypes,-p", prototypes_path, "prototype file")->required();
    bench->add_option("--repeat,-r", repeat, "runs per prototype and mode");
    bench->add_option("--assessor-delay", delay_ms, "added latency per assessed document (ms)");
    bench->add_option("--report", report_path, "write a JSON report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUser;
    }

    try {
        if (*ingest) return cmd_ingest(workspace, kg_path, corpus_path, config_path);
        if (*build) return cmd_build_index(workspace, fpr, capacity, source, log_path);
        if (*query) return cmd_query(workspace, query_text, query_file, no_index, report_path);
        if (*bench) return cmd_bench(workspace, prototypes_path, repeat, delay_ms, report_path);
    } catch (const InvariantBreach& e) {
        std::cerr << "invariant breach: " << e.what() << '\n';
        return kInvariant;
    } catch (const NotFoundError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kEnv;
    } catch (const IndexFormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kEnv;
    } catch (const AssessorError& e) {
        std::cerr << "error: assessor: " << e.what() << '\n';
        return kEnv;
    } catch (const dsl::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUser;
    } catch (const PlanningError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUser;
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUser;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUser;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kEnv;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kEnv;
    }
    return kUser;
}
