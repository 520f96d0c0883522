#ifndef ADVGNN_RNG_HPP
#define ADVGNN_RNG_HPP

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "advgnn/matrix.hpp"

namespace advgnn {

/// SplitMix64 finalizer. Used both for seeding and for child-stream derivation.
std::uint64_t splitmix64_mix(std::uint64_t z) noexcept;

/// Deterministic generator: xoshiro256** with its 256-bit state filled from
/// four consecutive SplitMix64 outputs of the seed.
///
/// Child streams: child(k) is a fresh generator seeded with
///   splitmix64_mix(seed ^ splitmix64_mix(k + 0x9E3779B97F4A7C15))
/// where `seed` is the value this generator was constructed with. Children
/// therefore depend only on (seed, k), never on how many draws were made.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    static constexpr std::string_view algorithm() noexcept { return "xoshiro256**/splitmix64"; }

    std::uint64_t seed() const noexcept { return seed_; }
    Rng child(std::uint64_t index) const;

    std::uint64_t next_u64() noexcept;
    /// Uniform in [0, 1) with 53 bits of resolution.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;
    bool bernoulli(double p) noexcept { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) noexcept {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t s_[4];
};

/// Uniform in [-s, s] with s = sqrt(6 / (rows + cols)).
Matrix glorot_init(std::size_t rows, std::size_t cols, Rng& rng);

} // namespace advgnn

#endif // ADVGNN_RNG_HPP
