#include "narratekg/bench.hpp"

#include <algorithm>

namespace narratekg {

namespace {

using Clock = std::chrono::steady_clock;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

struct Sample {
    double ms;
    QueryResult last;
};

// Runs both modes in alternation until each has used min_sample, so load
// changes on the machine hit both modes alike. A mode that has had its time
// stops early; the other keeps going.
std::pair<Sample, Sample> measure_pair(const QueryPlan& plan_a, const ExecutionContext& ctx_a, const QueryPlan& plan_b,
                                       const ExecutionContext& ctx_b, std::chrono::milliseconds min_sample,
                                       bool a_first) {
    double spent[2] = {0, 0};
    std::size_t runs[2] = {0, 0};
    QueryResult last[2];
    auto once = [&](int m) {
        const auto t0 = Clock::now();
        last[m] = m == 0 ? execute(plan_a, ctx_a) : execute(plan_b, ctx_b);
        spent[m] += std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        ++runs[m];
    };
    const double budget = static_cast<double>(min_sample.count());
    bool flip = !a_first;
    while (runs[0] == 0 || runs[1] == 0 || spent[0] < budget || spent[1] < budget) {
        for (int m : {flip ? 1 : 0, flip ? 0 : 1}) {
            if (runs[m] == 0 || spent[m] < budget) once(m);
        }
        flip = !flip;
    }
    return {Sample{spent[0] / static_cast<double>(runs[0]), std::move(last[0])},
            Sample{spent[1] / static_cast<double>(runs[1]), std::move(last[1])}};
}

}  // namespace

std::vector<NamedPrototype> read_prototype_file(std::istream& in) {
    std::vector<NamedPrototype> out;
    std::string line;
    std::size_t unnamed = 0;
    while (std::getline(in, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto colon = line.find(':');
        if (line.rfind("MATCH", 0) == 0 || colon == std::string::npos) {
            out.push_back({"q" + std::to_string(++unnamed), line});
        } else {
            out.push_back({trim(line.substr(0, colon)), trim(line.substr(colon + 1))});
        }
    }
    return out;
}

bool BenchReport::diverged() const {
    return std::any_of(rows.begin(), rows.end(), [](const BenchRow& r) { return r.diverged; });
}

BenchReport run_bench(const std::vector<NamedPrototype>& prototypes, const ExecutionContext& ctx,
                      const BenchOptions& options) {
    if (!ctx.index) throw MisuseError("benchmark needs an index");
    ExecutionContext plain{ctx.kg, ctx.corpus, nullptr, ctx.assessor, ctx.config};

    struct Prepared {
        QueryPlan indexed;
        QueryPlan plain;
    };
    std::vector<Prepared> plans;
    for (const auto& p : prototypes) {
        const auto ast = dsl::parse(p.text);
        plans.push_back({plan(ast, ctx.kg, ctx.index, &ctx.corpus), plan(ast, ctx.kg, nullptr, &ctx.corpus)});
    }

    BenchReport report;
    report.repeat = std::max<std::size_t>(1, options.repeat);
    std::vector<std::vector<double>> t_idx(prototypes.size()), t_plain(prototypes.size());
    report.rows.resize(prototypes.size());
    for (std::size_t r = 0; r < report.repeat; ++r) {
        for (std::size_t i = 0; i < prototypes.size(); ++i) {
            auto& row = report.rows[i];
            row.name = prototypes[i].name;
            // Alternate which mode goes first so warm-up effects cancel.
            auto [a, b] = measure_pair(plans[i].indexed, ctx, plans[i].plain, plain, options.min_sample, r % 2 == 0);
            t_idx[i].push_back(a.ms);
            t_plain[i].push_back(b.ms);
            const auto mi = a.last.matched_events();
            const auto mp = b.last.matched_events();
            if (mi != mp) row.diverged = true;
            row.matched = mi;
            row.matched_plain = mp;
            row.documents_indexed = a.last.counters.documents_assessed;
            row.documents_plain = b.last.counters.documents_assessed;
            row.index_prunes = a.last.counters.index_prunes;
        }
    }
    double sum_idx = 0, sum_plain = 0;
    for (std::size_t i = 0; i < prototypes.size(); ++i) {
        auto& row = report.rows[i];
        row.indexed_ms = median(t_idx[i]);
        row.plain_ms = median(t_plain[i]);
        sum_idx += row.indexed_ms;
        sum_plain += row.plain_ms;
    }
    report.aggregate_speedup = sum_idx > 0 ? sum_plain / sum_idx : 0.0;
    return report;
}

nlohmann::ordered_json BenchReport::to_json() const {
    nlohmann::ordered_json j;
    j["repeat"] = repeat;
    auto rs = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        rs.push_back({{"name", r.name},
                      {"indexed_ms", r.indexed_ms},
                      {"non_indexed_ms", r.plain_ms},
                      {"speedup", r.indexed_ms > 0 ? r.plain_ms / r.indexed_ms : 0.0},
                      {"documents_assessed_indexed", r.documents_indexed},
                      {"documents_assessed_non_indexed", r.documents_plain},
                      {"index_prunes", r.index_prunes},
                      {"matched", r.matched},
                      {"diverged", r.diverged}});
    }
    j["prototypes"] = std::move(rs);
    j["aggregate_speedup"] = aggregate_speedup;
    j["diverged"] = diverged();
    return j;
}

}  // namespace narratekg
