#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string_view>

namespace svl {

/*!
 * Reproducible random stream with counter-style substream derivation.
 *
 * A stream is identified by a 64-bit key. `derive(i)` hashes the key with the
 * counter `i` (SplitMix64 finalizer) to produce an independent child key, so
 * per-probe or per-path streams depend only on (master seed, path of indices)
 * and never on how work is scheduled. The generator itself is xoshiro256**
 * seeded from the key. Normal variates use Box-Muller with a cached pair.
 */
class Rng
{
  public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed);

    Rng derive(std::uint64_t index) const;
    Rng derive(std::string_view tag) const;
    template<class... Ts>
    Rng derive(std::uint64_t first, Ts... rest) const
    {
        return derive(first).derive(rest...);
    }

    std::uint64_t key() const noexcept { return key_; }

    std::uint64_t operator()();
    static constexpr result_type min() { return 0; }
    static constexpr result_type max()
    {
        return std::numeric_limits<result_type>::max();
    }

    // Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);
    // Uniform integer on [0, n). n == 1 returns 0 without consuming state.
    std::size_t uniform_index(std::size_t n);
    double normal();
    void fill_normal(std::span<double> out);

  private:
    std::uint64_t key_;
    std::uint64_t s_[4];
    double cached_normal_ = 0.0;
    bool has_cached_ = false;
};

// SplitMix64 output function applied to a single value.
std::uint64_t mix64(std::uint64_t x);
// FNV-1a over the bytes of a tag.
std::uint64_t hash_tag(std::string_view tag);

}  // namespace svl
