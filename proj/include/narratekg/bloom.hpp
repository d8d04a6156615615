#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace narratekg {

/// 128-bit MurmurHash3 (x64 variant) of `data`, returned as two 64-bit halves.
std::pair<std::uint64_t, std::uint64_t> murmur3_x64_128(std::span<const std::uint8_t> data, std::uint64_t seed);

/// Classic Bloom filter with double hashing (g_i = h1 + i*h2 mod m).
/// Membership answers never produce false negatives.
class BloomFilter {
public:
    /// Optimal sizing for `capacity` elements at false-positive rate `fpr`:
    /// m = ceil(-n ln p / (ln 2)^2), k = ceil((m/n) ln 2). A capacity of 0 is
    /// treated as 1. Throws std::invalid_argument unless 0 < fpr < 1.
    static std::pair<std::uint64_t, std::uint32_t> optimal_parameters(std::uint64_t capacity, double fpr);

    BloomFilter(std::uint64_t bit_count, std::uint32_t hash_count, std::uint64_t seed);
    static BloomFilter with_capacity(std::uint64_t capacity, double fpr, std::uint64_t seed);

    void insert(std::span<const std::uint8_t> key);
    bool may_contain(std::span<const std::uint8_t> key) const;

    void insert(std::string_view key) { insert(as_bytes(key)); }
    bool may_contain(std::string_view key) const { return may_contain(as_bytes(key)); }

    std::uint64_t bit_count() const noexcept { return bit_count_; }
    std::uint32_t hash_count() const noexcept { return hash_count_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t inserted_count() const noexcept { return inserted_; }
    const std::vector<std::uint64_t>& words() const noexcept { return words_; }

    /// Rebuilds a filter from serialized parts. `words` must hold ceil(m/64) words.
    static BloomFilter from_parts(std::uint64_t bit_count, std::uint32_t hash_count, std::uint64_t seed,
                                  std::uint64_t inserted, std::vector<std::uint64_t> words);

    bool operator==(const BloomFilter&) const = default;

private:
    static std::span<const std::uint8_t> as_bytes(std::string_view s) {
        return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
    }

    std::uint64_t bit_count_;
    std::uint32_t hash_count_;
    std::uint64_t seed_;
    std::uint64_t inserted_ = 0;
    std::vector<std::uint64_t> words_;
};

}  // namespace narratekg
