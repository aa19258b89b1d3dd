#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace remkit {

/// Counter-based SplitMix64 stream.
///
/// The n-th draw of a stream seeded with `s` is `mix64(s + (n + 1) * kGolden)`,
/// so the output depends only on the seed and the number of draws taken.
/// Child streams are derived with `split(key)`, which hashes the parent seed
/// together with the key and does not advance the parent. All transforms
/// (uniform, normal, integer ranges) are implemented here rather than through
/// <random> distributions, whose outputs are not portable across standard
/// libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t draws() const { return counter_; }

    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (one variate per call, two uniforms).
    double normal();

    /// Uniform integer in [0, n). n must be > 0.
    std::uint64_t below(std::uint64_t n);

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// k distinct indices from [0, n), in draw order.
    std::vector<std::size_t> choose(std::size_t n, std::size_t k);

    Rng split(std::uint64_t key) const;
    Rng split(std::string_view key) const;

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

std::uint64_t mix64(std::uint64_t x);

/// FNV-1a over the bytes of `s`, finished with mix64.
std::uint64_t hash_str(std::string_view s);

std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b);

}  // namespace remkit
