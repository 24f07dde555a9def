#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <random>

namespace swarmlab {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seeded random stream. All value conversions are done by hand so that a
// given seed produces the same numbers on every platform; the standard
// distributions leave that unspecified.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n) without modulo bias.
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
        std::uint64_t u;
        do {
            u = next_u64();
        } while (u >= limit);
        return u % n;
    }

    bool coin(double p) { return uniform() < p; }

    void save(std::ostream& os) const { os << gen_; }
    void load(std::istream& is) { is >> gen_; }

private:
    std::mt19937_64 gen_;
};

// Independent stream for (seed, id). Streams derived this way do not depend
// on any draw order, so workers fanning out over ids stay reproducible.
inline Rng derive_stream(std::uint64_t seed, std::uint64_t id) {
    return Rng(splitmix64(splitmix64(seed) ^ splitmix64(id + 0x51ed2701a9b3d27bULL)));
}

}  // namespace swarmlab
