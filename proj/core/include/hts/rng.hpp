#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace hts {

// Portable random source. The engine is std::mt19937_64, whose output
// sequence is fixed by the C++ standard; every derived quantity below is
// computed here rather than through <random> distributions, whose
// algorithms are implementation-defined. Hence streams are bit-identical
// across platforms for the same seed.
//
//   uniform()  = (next() >> 11) * 2^-53                     in [0, 1)
//   normal()   = sqrt(-2 ln(1 - u1)) * cos(2 pi u2)          (Box-Muller, no caching)
//   below(n)   = rejection sampling on next() modulo n
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }
    bool bernoulli(double p) { return uniform() < p; }
    std::size_t below(std::size_t n);

    template <typename T>
    void shuffle(std::vector<T> &items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[below(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// Per-component seed derivation: splitmix64(root ^ fnv1a64(key)).
// Keys are stable strings such as "nnd/<node_id>" so that results do not
// depend on the order in which parallel tasks are scheduled.
std::uint64_t derive_seed(std::uint64_t root, std::string_view key);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t state = 0xcbf29ce484222325ULL);

} // namespace hts
