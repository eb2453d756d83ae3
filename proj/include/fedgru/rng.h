#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedgru {

using Rng = std::mt19937_64;

// Independent stream for (master seed, stream coordinates). The same
// coordinates always yield the same stream regardless of call order, which
// keeps serial and parallel schedules bit-identical.
Rng derive_rng(std::uint64_t master, std::initializer_list<std::uint64_t> stream);

// Uniform draw in [lo, hi]; returns lo when hi <= lo.
double uniform(Rng& rng, double lo, double hi);

// Tags separating the purposes a stream is used for.
namespace stream {
inline constexpr std::uint64_t kMobility = 1;
inline constexpr std::uint64_t kDelayNoise = 2;
inline constexpr std::uint64_t kAssignment = 3;
inline constexpr std::uint64_t kAttackSelect = 4;
inline constexpr std::uint64_t kAttackPoison = 5;
inline constexpr std::uint64_t kInit = 6;
inline constexpr std::uint64_t kLocalTrain = 7;
inline constexpr std::uint64_t kDropout = 8;
}  // namespace stream

}  // namespace fedgru
