#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace medusa {

// Deterministic RNG used everywhere seeds matter. Doubles come straight from
// the top 53 bits of the generator so streams do not depend on
// distribution-object internals.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // [0, 1)
    double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        return lo + int(gen_() % std::uint64_t(hi - lo + 1));
    }

  private:
    std::mt19937_64 gen_;
};

// splitmix64 finalizer; combines a seed with salts into a new seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);
std::uint64_t hash_string(std::string_view s);

inline std::uint64_t seed_for(std::uint64_t seed, std::string_view name) {
    return mix_seed(seed, hash_string(name));
}

}  // namespace medusa
