#pragma once

// Indexed vs. non-indexed runs of a prototype suite.

#include "narratekg/query.hpp"

#include <json.hpp>

#include <chrono>
#include <istream>
#include <string>
#include <vector>

namespace narratekg {

struct NamedPrototype {
    std::string name;
    std::string text;
};

/// One prototype per line, optionally prefixed with "name:". Blank lines and
/// lines starting with '#' are skipped. Unnamed prototypes are called q1, q2, ...
std::vector<NamedPrototype> read_prototype_file(std::istream& in);

struct BenchOptions {
    std::size_t repeat = 5;
    /// Each sample repeats the query until this much time has passed and
    /// reports the mean per run, so sub-millisecond queries are measurable.
    std::chrono::milliseconds min_sample{20};
};

struct BenchRow {
    std::string name;
    double indexed_ms = 0;  // median
    double plain_ms = 0;    // median
    std::size_t documents_indexed = 0;
    std::size_t documents_plain = 0;
    std::size_t index_prunes = 0;
    std::vector<EventLabel> matched;
    /// Set when the two modes disagreed on any run.
    bool diverged = false;
    std::vector<EventLabel> matched_plain;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    /// sum of non-indexed medians / sum of indexed medians
    double aggregate_speedup = 0;
    std::size_t repeat = 0;
    bool diverged() const;
    nlohmann::ordered_json to_json() const;
};

/// `ctx.index` must be set; the non-indexed runs use the same context
/// without it. Throws PlanningError/ParseError for invalid prototypes.
BenchReport run_bench(const std::vector<NamedPrototype>& prototypes, const ExecutionContext& ctx,
                      const BenchOptions& options = {});

}  // namespace narratekg
