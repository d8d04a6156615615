#include <doctest.h>

#include "narratekg/bloom.hpp"

#include <random>
#include <set>
#include <stdexcept>
#include <string>

using namespace narratekg;

namespace {

std::span<const std::uint8_t> bytes(std::string_view s) {
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

}  // namespace

TEST_CASE("murmur3 x64 128 reference vectors") {
    // Reference values from the Python mmh3 package (hash64, unsigned).
    using P = std::pair<std::uint64_t, std::uint64_t>;
    CHECK(murmur3_x64_128(bytes(""), 0) == P{0, 0});
    CHECK(murmur3_x64_128(bytes("hello"), 0) == P{0xcbd8a7b341bd9b02ULL, 0x5b1e906a48ae1d19ULL});
    CHECK(murmur3_x64_128(bytes("The quick brown fox jumps over the lazy dog"), 0) ==
          P{0xe34bbc7bbc071b6cULL, 0x7a433ca9c49a9347ULL});
    CHECK(murmur3_x64_128(bytes("hello"), 42) == P{0xc4b8b3c960af6f08ULL, 0x2334b875b0efbc7aULL});
    std::vector<std::uint8_t> ramp(31);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<std::uint8_t>(i);
    CHECK(murmur3_x64_128(ramp, 123456789) == P{0xe1441659914b626fULL, 0x0c2732b1170e6c83ULL});
}

TEST_CASE("optimal sizing") {
    // m = ceil(-n ln p / ln^2 2), k = ceil(m/n ln 2), computed in Python.
    using P = std::pair<std::uint64_t, std::uint32_t>;
    CHECK(BloomFilter::optimal_parameters(10000, 0.01) == P{95851, 7});
    CHECK(BloomFilter::optimal_parameters(100000, 0.01) == P{958506, 7});
    CHECK(BloomFilter::optimal_parameters(1000, 0.001) == P{14378, 10});
    CHECK(BloomFilter::optimal_parameters(1, 0.5) == P{2, 2});
    CHECK(BloomFilter::optimal_parameters(0, 0.01) == P{10, 7});
    CHECK_THROWS_AS(BloomFilter::optimal_parameters(10, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(BloomFilter::optimal_parameters(10, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(BloomFilter::optimal_parameters(10, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(BloomFilter::optimal_parameters(10, -0.1), std::invalid_argument);
}

TEST_CASE("empty filter answers no") {
    const auto f = BloomFilter::with_capacity(100, 0.01, 1);
    for (int i = 0; i < 1000; ++i) CHECK_FALSE(f.may_contain("k" + std::to_string(i)));
}

TEST_CASE("no false negatives over 100000 insertions and measured fpr within twice the target") {
    constexpr std::size_t n = 100000;
    auto f = BloomFilter::with_capacity(n, 0.01, 0x5eed);
    std::mt19937_64 rng(1234);
    std::set<std::string> inserted;
    while (inserted.size() < n) inserted.insert("in:" + std::to_string(rng()));
    for (const auto& k : inserted) f.insert(k);
    CHECK(f.inserted_count() == n);

    std::size_t false_negatives = 0;
    for (const auto& k : inserted) false_negatives += f.may_contain(k) ? 0 : 1;
    CHECK(false_negatives == 0);

    // Probes drawn from a disjoint key space are known to be absent.
    std::size_t false_positives = 0;
    for (std::size_t i = 0; i < n; ++i) false_positives += f.may_contain("out:" + std::to_string(rng())) ? 1 : 0;
    const double fpr = static_cast<double>(false_positives) / n;
    MESSAGE("measured fpr " << fpr);
    CHECK(fpr <= 0.02);
}

TEST_CASE("insertion is monotone") {
    auto f = BloomFilter::with_capacity(500, 0.05, 9);
    std::vector<std::string> keys;
    for (int i = 0; i < 500; ++i) keys.push_back("key" + std::to_string(i));
    std::vector<bool> before;
    for (int i = 0; i < 500; ++i) {
        f.insert(keys[static_cast<std::size_t>(i)]);
        // Everything that answered true keeps answering true.
        for (int j = 0; j < 1000; ++j) {
            const bool now = f.may_contain("probe" + std::to_string(j));
            if (static_cast<std::size_t>(j) < before.size() && before[static_cast<std::size_t>(j)]) CHECK(now);
        }
        before.clear();
        for (int j = 0; j < 1000; ++j) before.push_back(f.may_contain("probe" + std::to_string(j)));
    }
}

TEST_CASE("seed changes the bit pattern, parts rebuild an equal filter") {
    auto a = BloomFilter::with_capacity(100, 0.01, 1);
    auto b = BloomFilter::with_capacity(100, 0.01, 2);
    for (int i = 0; i < 50; ++i) {
        a.insert("x" + std::to_string(i));
        b.insert("x" + std::to_string(i));
    }
    CHECK(a.words() != b.words());
    const auto c = BloomFilter::from_parts(a.bit_count(), a.hash_count(), a.seed(), a.inserted_count(), a.words());
    CHECK(c == a);
}
