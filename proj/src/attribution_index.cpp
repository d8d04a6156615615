#include "narratekg/attribution_index.hpp"

#include "narratekg/jsonl.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace narratekg {

namespace {

constexpr char kMagic[8] = {'N', 'K', 'G', 'B', 'L', 'O', 'O', 'M'};

void append_prefixed(std::vector<std::uint8_t>& out, const std::string& s) {
    const auto n = static_cast<std::uint32_t>(s.size());
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
    out.insert(out.end(), s.begin(), s.end());
}

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    void u8(std::uint8_t v) { buf.push_back(v); }
    void u16(std::uint16_t v) { le(v, 2); }
    void u32(std::uint32_t v) { le(v, 4); }
    void u64(std::uint64_t v) { le(v, 8); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u16(static_cast<std::uint16_t>(s.size()));
        buf.insert(buf.end(), s.begin(), s.end());
    }
    std::vector<std::uint8_t> buf;

private:
    void le(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
    std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
    std::uint64_t u64() { return le(8); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const auto n = u16();
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n) const {
        if (remaining() < n) throw IndexFormatError(IndexFormatError::Reason::Malformed, "index file is truncated");
    }
    std::uint64_t le(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = n - 1; i >= 0; --i) v = (v << 8) | bytes_[pos_ + static_cast<std::size_t>(i)];
        pos_ += static_cast<std::size_t>(n);
        return v;
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

std::span<const std::uint8_t> word_bytes(const std::vector<std::uint64_t>& words, std::vector<std::uint8_t>& scratch) {
    scratch.clear();
    for (auto w : words) {
        for (int i = 0; i < 8; ++i) scratch.push_back(static_cast<std::uint8_t>(w >> (8 * i)));
    }
    return scratch;
}

void write_filter(Writer& w, std::uint8_t tier, const std::string& attribution, const std::string& viewpoint,
                  const BloomFilter& f) {
    std::vector<std::uint8_t> scratch;
    w.u8(tier);
    w.str(attribution);
    w.str(viewpoint);
    w.u64(f.bit_count());
    w.u32(f.hash_count());
    w.u64(f.seed());
    w.u64(f.inserted_count());
    w.u64(fnv1a(word_bytes(f.words(), scratch)));
    for (auto word : f.words()) w.u64(word);
}

}  // namespace

std::vector<std::uint8_t> coarse_key(const std::string& attribution, const EntityId& participant) {
    std::vector<std::uint8_t> key;
    append_prefixed(key, participant);
    append_prefixed(key, attribution);
    return key;
}

std::vector<std::uint8_t> fine_key(const std::string& attribution, const ViewpointId& viewpoint,
                                   const EntityId& participant) {
    auto key = coarse_key(attribution, participant);
    append_prefixed(key, viewpoint);
    return key;
}

bool AttributionIndexSet::may_hold(const std::string& attribution, const EntityId& participant,
                                   const std::optional<ViewpointId>& viewpoint) const {
    if (viewpoint) {
        auto it = fine_.find({attribution, *viewpoint});
        return it != fine_.end() && it->second.may_contain(fine_key(attribution, *viewpoint, participant));
    }
    auto it = coarse_.find(attribution);
    return it != coarse_.end() && it->second.may_contain(coarse_key(attribution, participant));
}

AttributionIndexSet build_index(const std::vector<AttributionPositive>& positives,
                                const std::set<std::string>& attributions, const std::set<ViewpointId>& viewpoints,
                                const IndexBuildOptions& options) {
    // Validates fpr before anything else.
    BloomFilter::optimal_parameters(1, options.target_fpr);

    std::map<std::string, std::set<EntityId>> coarse_members;
    std::map<std::pair<std::string, ViewpointId>, std::set<EntityId>> fine_members;
    for (const auto& p : positives) {
        if (!attributions.contains(p.attribution)) {
            throw SchemaError("positive names unindexed attribution '" + p.attribution + "'");
        }
        if (!viewpoints.contains(p.viewpoint)) {
            throw SchemaError("positive names unknown viewpoint '" + p.viewpoint + "'");
        }
        coarse_members[p.attribution].insert(p.participant);
        fine_members[{p.attribution, p.viewpoint}].insert(p.participant);
    }

    auto sized = [&](std::size_t distinct) {
        const std::uint64_t n = std::max<std::uint64_t>(options.capacity_hint, distinct);
        return BloomFilter::with_capacity(n, options.target_fpr, options.seed);
    };

    AttributionIndexSet index;
    index.attributions_ = attributions;
    index.viewpoints_ = viewpoints;
    index.target_fpr_ = options.target_fpr;
    for (const auto& a : attributions) {
        const auto& members = coarse_members[a];
        auto filter = sized(members.size());
        for (const auto& e : members) filter.insert(coarse_key(a, e));
        index.coarse_.emplace(a, std::move(filter));
        for (const auto& v : viewpoints) {
            const auto& fm = fine_members[{a, v}];
            auto ff = sized(fm.size());
            for (const auto& e : fm) ff.insert(fine_key(a, v, e));
            index.fine_.emplace(std::make_pair(a, v), std::move(ff));
        }
    }
    return index;
}

std::vector<std::uint8_t> AttributionIndexSet::serialize() const {
    Writer w;
    w.buf.insert(w.buf.end(), std::begin(kMagic), std::end(kMagic));
    w.u32(kFormatVersion);
    w.f64(target_fpr_);
    w.u32(static_cast<std::uint32_t>(attributions_.size()));
    for (const auto& a : attributions_) w.str(a);
    w.u32(static_cast<std::uint32_t>(viewpoints_.size()));
    for (const auto& v : viewpoints_) w.str(v);
    w.u32(static_cast<std::uint32_t>(coarse_.size() + fine_.size()));
    for (const auto& [a, f] : coarse_) write_filter(w, 0, a, "", f);
    for (const auto& [key, f] : fine_) write_filter(w, 1, key.first, key.second, f);
    w.u64(fnv1a(w.buf));
    return std::move(w.buf);
}

AttributionIndexSet AttributionIndexSet::deserialize(std::span<const std::uint8_t> bytes) {
    using Reason = IndexFormatError::Reason;
    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw IndexFormatError(Reason::BadMagic, "not an attribution index file (bad magic)");
    }
    if (bytes.size() < sizeof kMagic + 4 + 8) {
        throw IndexFormatError(Reason::ChecksumMismatch, "index file checksum mismatch (file truncated)");
    }
    const auto body = bytes.first(bytes.size() - 8);
    if (Reader(bytes.last(8)).u64() != fnv1a(body)) {
        throw IndexFormatError(Reason::ChecksumMismatch, "index file checksum mismatch");
    }
    Reader r(body.subspan(sizeof kMagic));
    const auto version = r.u32();
    if (version != kFormatVersion) {
        throw IndexFormatError(Reason::VersionMismatch, "unsupported index format version " + std::to_string(version) +
                                                            " (expected " + std::to_string(kFormatVersion) + ")");
    }
    AttributionIndexSet index;
    index.target_fpr_ = r.f64();
    for (auto n = r.u32(); n > 0; --n) index.attributions_.insert(r.str());
    for (auto n = r.u32(); n > 0; --n) index.viewpoints_.insert(r.str());
    std::vector<std::uint8_t> scratch;
    for (auto n = r.u32(); n > 0; --n) {
        const auto tier = r.u8();
        auto attribution = r.str();
        auto viewpoint = r.str();
        const auto m = r.u64();
        const auto k = r.u32();
        const auto seed = r.u64();
        const auto inserted = r.u64();
        const auto checksum = r.u64();
        if (m == 0 || k == 0 || (m + 63) / 64 > r.remaining() / 8) {
            throw IndexFormatError(Reason::Malformed, "filter header for '" + attribution + "' is inconsistent");
        }
        std::vector<std::uint64_t> words((m + 63) / 64);
        for (auto& word : words) word = r.u64();
        if (fnv1a(word_bytes(words, scratch)) != checksum) {
            throw IndexFormatError(Reason::ChecksumMismatch, "filter checksum mismatch for '" + attribution + "'");
        }
        auto filter = BloomFilter::from_parts(m, k, seed, inserted, std::move(words));
        if (tier == 0) {
            index.coarse_.emplace(std::move(attribution), std::move(filter));
        } else if (tier == 1) {
            index.fine_.emplace(std::make_pair(std::move(attribution), std::move(viewpoint)), std::move(filter));
        } else {
            throw IndexFormatError(Reason::Malformed, "unknown filter tier " + std::to_string(tier));
        }
    }
    if (r.remaining() != 0) throw IndexFormatError(Reason::Malformed, "trailing bytes after last filter");
    return index;
}

void AttributionIndexSet::save(const std::string& path) const {
    const auto bytes = serialize();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write index file '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing index file '" + path + "'");
}

AttributionIndexSet AttributionIndexSet::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open index file '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

std::vector<AttributionPositive> read_positive_log(std::istream& in) {
    std::vector<AttributionPositive> out;
    jsonl::for_each_record(in, [&](const jsonl::Json& rec, int line) {
        out.push_back({jsonl::require_string(rec, "attribution", line), jsonl::require_string(rec, "viewpoint", line),
                       jsonl::require_string(rec, "participant", line)});
    });
    return out;
}

void write_positive_log(std::ostream& out, const std::vector<AttributionPositive>& positives) {
    for (const auto& p : positives) {
        jsonl::OrderedJson j{{"attribution", p.attribution}, {"viewpoint", p.viewpoint}, {"participant", p.participant}};
        out << j.dump() << '\n';
    }
}

}  // namespace narratekg
