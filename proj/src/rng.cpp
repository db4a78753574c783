#include "quant/rng.hpp"

#include <cmath>

#include "quant/core.hpp"

namespace quant {

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t hash_label(std::string_view label) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

double Rng::uniform() {
    return static_cast<double>(u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::normal() {
    // Box-Muller; u1 shifted into (0, 1] so the log never sees zero.
    double u1 = (static_cast<double>(u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

std::int64_t Rng::bounded(std::int64_t n) {
    require(n > 0, "Rng::bounded requires n > 0");
    return static_cast<std::int64_t>(u64() % static_cast<std::uint64_t>(n));
}

Rng Rng::fork(std::uint64_t salt) const {
    std::uint64_t s = state_ ^ (salt + 0x9E3779B97F4A7C15ULL);
    std::uint64_t mixed = splitmix64(s);
    return Rng(mixed);
}

}  // namespace quant
