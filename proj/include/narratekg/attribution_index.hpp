#pragma once

// Two-tier membership index over subjective attributions.
//
// coarse(s)    holds every participant e for which s(e) was witnessed true
//              in any event and any viewpoint;
// fine(s, v)   holds every participant e for which s(e) was witnessed true
//              in any event from viewpoint v.
//
// A negative answer is definitive (Bloom filters have no false negatives),
// so the query engine may skip document evaluation for it.

#include "narratekg/bloom.hpp"
#include "narratekg/error.hpp"
#include "narratekg/model.hpp"

#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace narratekg {

struct AttributionPositive {
    std::string attribution;
    ViewpointId viewpoint;
    EntityId participant;
    auto operator<=>(const AttributionPositive&) const = default;
};

class IndexFormatError : public Error {
public:
    enum class Reason { BadMagic, VersionMismatch, ChecksumMismatch, Malformed };
    IndexFormatError(Reason reason, const std::string& what) : Error(what), reason_(reason) {}
    Reason reason() const noexcept { return reason_; }

private:
    Reason reason_;
};

struct IndexBuildOptions {
    double target_fpr = 0.01;
    /// Per-filter capacity. 0 sizes each filter by its distinct element count.
    std::uint64_t capacity_hint = 0;
    std::uint64_t seed = 0x6e61727261746531ULL;
};

class AttributionIndexSet {
public:
    inline static constexpr std::uint32_t kFormatVersion = 1;

    AttributionIndexSet() = default;

    /// Attributions and viewpoints the index was built for. Only covered
    /// attributions may be pruned with this index.
    const std::set<std::string>& attributions() const noexcept { return attributions_; }
    const std::set<ViewpointId>& viewpoints() const noexcept { return viewpoints_; }
    bool covers(const std::string& attribution) const { return attributions_.contains(attribution); }
    double target_fpr() const noexcept { return target_fpr_; }

    /// false means "never witnessed"; true means "maybe".
    bool may_hold(const std::string& attribution, const EntityId& participant,
                  const std::optional<ViewpointId>& viewpoint = std::nullopt) const;

    const std::map<std::string, BloomFilter>& coarse() const noexcept { return coarse_; }
    const std::map<std::pair<std::string, ViewpointId>, BloomFilter>& fine() const noexcept { return fine_; }

    std::vector<std::uint8_t> serialize() const;
    /// Throws IndexFormatError.
    static AttributionIndexSet deserialize(std::span<const std::uint8_t> bytes);

    void save(const std::string& path) const;
    static AttributionIndexSet load(const std::string& path);

    bool operator==(const AttributionIndexSet&) const = default;

private:
    friend AttributionIndexSet build_index(const std::vector<AttributionPositive>&, const std::set<std::string>&,
                                           const std::set<ViewpointId>&, const IndexBuildOptions&);

    std::set<std::string> attributions_;
    std::set<ViewpointId> viewpoints_;
    double target_fpr_ = 0.01;
    std::map<std::string, BloomFilter> coarse_;
    std::map<std::pair<std::string, ViewpointId>, BloomFilter> fine_;
};

/// Builds both tiers. Every (attribution, viewpoint) pair of the covered sets
/// gets a filter, possibly empty. Throws SchemaError for a positive naming an
/// uncovered attribution or unknown viewpoint, std::invalid_argument for a
/// target FPR outside (0, 1).
AttributionIndexSet build_index(const std::vector<AttributionPositive>& positives,
                                const std::set<std::string>& attributions, const std::set<ViewpointId>& viewpoints,
                                const IndexBuildOptions& options = {});

/// Byte encoding of index keys: length-prefixed participant, attribution and
/// (fine tier only) viewpoint.
std::vector<std::uint8_t> coarse_key(const std::string& attribution, const EntityId& participant);
std::vector<std::uint8_t> fine_key(const std::string& attribution, const ViewpointId& viewpoint,
                                   const EntityId& participant);

/// Evaluation log of positives, one JSON object per line.
std::vector<AttributionPositive> read_positive_log(std::istream& in);
void write_positive_log(std::ostream& out, const std::vector<AttributionPositive>& positives);

}  // namespace narratekg
