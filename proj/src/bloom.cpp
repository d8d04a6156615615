#include "narratekg/bloom.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace narratekg {

namespace {

constexpr std::uint64_t rotl64(std::uint64_t x, int r) { return (x << r) | (x >> (64 - r)); }

constexpr std::uint64_t fmix64(std::uint64_t k) {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    k *= 0xc4ceb9fe1a85ec53ULL;
    k ^= k >> 33;
    return k;
}

std::uint64_t load_le64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

}  // namespace

std::pair<std::uint64_t, std::uint64_t> murmur3_x64_128(std::span<const std::uint8_t> data, std::uint64_t seed) {
    constexpr std::uint64_t c1 = 0x87c37b91114253d5ULL;
    constexpr std::uint64_t c2 = 0x4cf5ad432745937fULL;
    const std::size_t len = data.size();
    const std::size_t nblocks = len / 16;
    std::uint64_t h1 = seed;
    std::uint64_t h2 = seed;
    const std::uint8_t* bytes = data.data();

    for (std::size_t i = 0; i < nblocks; ++i) {
        std::uint64_t k1 = load_le64(bytes + i * 16);
        std::uint64_t k2 = load_le64(bytes + i * 16 + 8);
        k1 *= c1;
        k1 = rotl64(k1, 31);
        k1 *= c2;
        h1 ^= k1;
        h1 = rotl64(h1, 27);
        h1 += h2;
        h1 = h1 * 5 + 0x52dce729;
        k2 *= c2;
        k2 = rotl64(k2, 33);
        k2 *= c1;
        h2 ^= k2;
        h2 = rotl64(h2, 31);
        h2 += h1;
        h2 = h2 * 5 + 0x38495ab5;
    }

    const std::uint8_t* tail = bytes + nblocks * 16;
    std::uint64_t k1 = 0;
    std::uint64_t k2 = 0;
    switch (len & 15) {
        case 15: k2 ^= static_cast<std::uint64_t>(tail[14]) << 48; [[fallthrough]];
        case 14: k2 ^= static_cast<std::uint64_t>(tail[13]) << 40; [[fallthrough]];
        case 13: k2 ^= static_cast<std::uint64_t>(tail[12]) << 32; [[fallthrough]];
        case 12: k2 ^= static_cast<std::uint64_t>(tail[11]) << 24; [[fallthrough]];
        case 11: k2 ^= static_cast<std::uint64_t>(tail[10]) << 16; [[fallthrough]];
        case 10: k2 ^= static_cast<std::uint64_t>(tail[9]) << 8; [[fallthrough]];
        case 9:
            k2 ^= static_cast<std::uint64_t>(tail[8]);
            k2 *= c2;
            k2 = rotl64(k2, 33);
            k2 *= c1;
            h2 ^= k2;
            [[fallthrough]];
        case 8: k1 ^= static_cast<std::uint64_t>(tail[7]) << 56; [[fallthrough]];
        case 7: k1 ^= static_cast<std::uint64_t>(tail[6]) << 48; [[fallthrough]];
        case 6: k1 ^= static_cast<std::uint64_t>(tail[5]) << 40; [[fallthrough]];
        case 5: k1 ^= static_cast<std::uint64_t>(tail[4]) << 32; [[fallthrough]];
        case 4: k1 ^= static_cast<std::uint64_t>(tail[3]) << 24; [[fallthrough]];
        case 3: k1 ^= static_cast<std::uint64_t>(tail[2]) << 16; [[fallthrough]];
        case 2: k1 ^= static_cast<std::uint64_t>(tail[1]) << 8; [[fallthrough]];
        case 1:
            k1 ^= static_cast<std::uint64_t>(tail[0]);
            k1 *= c1;
            k1 = rotl64(k1, 31);
            k1 *= c2;
            h1 ^= k1;
            break;
        default: break;
    }

    h1 ^= len;
    h2 ^= len;
    h1 += h2;
    h2 += h1;
    h1 = fmix64(h1);
    h2 = fmix64(h2);
    h1 += h2;
    h2 += h1;
    return {h1, h2};
}

std::pair<std::uint64_t, std::uint32_t> BloomFilter::optimal_parameters(std::uint64_t capacity, double fpr) {
    if (!(fpr > 0.0 && fpr < 1.0)) throw std::invalid_argument("false-positive rate must be in (0, 1)");
    const double n = static_cast<double>(capacity == 0 ? 1 : capacity);
    const double ln2 = std::log(2.0);
    const auto m = static_cast<std::uint64_t>(std::ceil(-n * std::log(fpr) / (ln2 * ln2)));
    const auto k = static_cast<std::uint32_t>(std::ceil(static_cast<double>(m) / n * ln2));
    return {m == 0 ? 1 : m, k == 0 ? 1 : k};
}

BloomFilter::BloomFilter(std::uint64_t bit_count, std::uint32_t hash_count, std::uint64_t seed)
    : bit_count_(bit_count), hash_count_(hash_count), seed_(seed), words_((bit_count + 63) / 64, 0) {
    if (bit_count == 0 || hash_count == 0) throw std::invalid_argument("bloom filter needs m > 0 and k > 0");
}

BloomFilter BloomFilter::with_capacity(std::uint64_t capacity, double fpr, std::uint64_t seed) {
    auto [m, k] = optimal_parameters(capacity, fpr);
    return BloomFilter(m, k, seed);
}

void BloomFilter::insert(std::span<const std::uint8_t> key) {
    auto [h1, h2] = murmur3_x64_128(key, seed_);
    for (std::uint32_t i = 0; i < hash_count_; ++i) {
        const std::uint64_t bit = (h1 + static_cast<std::uint64_t>(i) * h2) % bit_count_;
        words_[bit >> 6] |= std::uint64_t{1} << (bit & 63);
    }
    ++inserted_;
}

bool BloomFilter::may_contain(std::span<const std::uint8_t> key) const {
    auto [h1, h2] = murmur3_x64_128(key, seed_);
    for (std::uint32_t i = 0; i < hash_count_; ++i) {
        const std::uint64_t bit = (h1 + static_cast<std::uint64_t>(i) * h2) % bit_count_;
        if (!(words_[bit >> 6] & (std::uint64_t{1} << (bit & 63)))) return false;
    }
    return true;
}

BloomFilter BloomFilter::from_parts(std::uint64_t bit_count, std::uint32_t hash_count, std::uint64_t seed,
                                    std::uint64_t inserted, std::vector<std::uint64_t> words) {
    BloomFilter f(bit_count, hash_count, seed);
    if (words.size() != f.words_.size()) throw std::invalid_argument("bloom filter word count does not match m");
    f.words_ = std::move(words);
    f.inserted_ = inserted;
    return f;
}

}  // namespace narratekg
