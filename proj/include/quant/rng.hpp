#pragma once
#include <cstdint>
#include <string_view>

namespace quant {

// splitmix64 step: advances `state` and returns the next value.
std::uint64_t splitmix64(std::uint64_t& state);

// FNV-1a hash, used to derive named child streams.
std::uint64_t hash_label(std::string_view label);

// Deterministic RNG used everywhere instead of std:: distributions, whose
// output is implementation-defined and would break byte-identical reruns.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t u64() { return splitmix64(state_); }
    double uniform();                      // [0, 1)
    double uniform(double lo, double hi);  // [lo, hi)
    double normal();                       // Box-Muller
    std::int64_t bounded(std::int64_t n);  // [0, n)

    // Independent child stream; does not advance this generator.
    Rng fork(std::uint64_t salt) const;
    Rng fork(std::string_view label) const { return fork(hash_label(label)); }

  private:
    std::uint64_t state_;
};

}  // namespace quant
