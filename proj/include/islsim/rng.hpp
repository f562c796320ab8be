#pragma once

#include <cstdint>
#include <random>

namespace islsim {

// Seed derivation. Every consumer of randomness derives its own engine from the
// master seed, a fixed stream id and a counter, so adding a consumer never
// perturbs the draws of existing ones and runs stay reproducible regardless of
// evaluation order or thread count.
//
// Stream ids in use:
//   1 traffic generation    2 solver init profiles   3 bootstrap resampling
//   4 mean-field sampling   5 scenario perturbation  6 per-run seed expansion
enum class RngStream : std::uint64_t {
  traffic = 1,
  solver_init = 2,
  bootstrap = 3,
  mfg = 4,
  scenario = 5,
  run = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// master -> (stream, counter) -> 64-bit subseed
inline std::uint64_t derive_seed(std::uint64_t master, RngStream stream,
                                 std::uint64_t counter = 0) {
  std::uint64_t h = splitmix64(master ^ (0x9e3779b97f4a7c15ull *
                                         static_cast<std::uint64_t>(stream)));
  return splitmix64(h ^ (0xd1b54a32d192ed03ull * (counter + 1)));
}

inline std::mt19937_64 make_engine(std::uint64_t master, RngStream stream,
                                   std::uint64_t counter = 0) {
  return std::mt19937_64(derive_seed(master, stream, counter));
}

}  // namespace islsim
