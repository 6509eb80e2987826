#include "stablevel/rng.hpp"

#include <cmath>
#include <numbers>

namespace svl {

std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

std::uint64_t hash_tag(std::string_view tag)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : tag)
    {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

std::uint64_t rotl(std::uint64_t x, int k)
{
    return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) : key_(seed)
{
    std::uint64_t sm = seed;
    for (auto& s : s_)
    {
        sm += 0x9e3779b97f4a7c15ull;
        s = mix64(sm);
    }
}

Rng Rng::derive(std::uint64_t index) const
{
    return Rng(mix64(key_ ^ mix64(index + 0x632be59bd9b4e019ull)));
}

Rng Rng::derive(std::string_view tag) const
{
    return derive(hash_tag(tag));
}

std::uint64_t Rng::operator()()
{
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform()
{
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi)
{
    return lo + (hi - lo) * uniform();
}

std::size_t Rng::uniform_index(std::size_t n)
{
    if (n <= 1)
        return 0;
    // Lemire's nearly divisionless bounded integer.
    const std::uint64_t range = n;
    __uint128_t m = static_cast<__uint128_t>((*this)()) * range;
    auto low = static_cast<std::uint64_t>(m);
    if (low < range)
    {
        const std::uint64_t threshold = (0 - range) % range;
        while (low < threshold)
        {
            m = static_cast<__uint128_t>((*this)()) * range;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::size_t>(m >> 64);
}

double Rng::normal()
{
    if (has_cached_)
    {
        has_cached_ = false;
        return cached_normal_;
    }
    double u1 = uniform();
    while (u1 <= 0.0)
        u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    cached_normal_ = r * std::sin(phi);
    has_cached_ = true;
    return r * std::cos(phi);
}

void Rng::fill_normal(std::span<double> out)
{
    for (auto& x : out)
        x = normal();
}

}  // namespace svl
