#pragma once

// Seed derivation. Every random quantity in the library is drawn from an
// engine seeded by mixing a master seed with integer coordinates (lattice
// cell, task index, ...), so sampling any region is a pure function of the
// seed and the region.

#include "homlab/types.hpp"

#include <initializer_list>
#include <limits>
#include <span>

namespace homlab {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_combine(std::uint64_t h, std::uint64_t v) noexcept {
  return mix64(h ^ mix64(v));
}

/// SplitMix64 generator; satisfies UniformRandomBitGenerator, so it plugs
/// into the Boost.Random distributions. Seeding is free, which matters because
/// every lattice cell gets its own engine.
class Engine {
 public:
  using result_type = std::uint64_t;

  explicit Engine(Seed s) noexcept : state_(s) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

inline Seed derive_seed(Seed master, std::initializer_list<std::int64_t> keys) {
  std::uint64_t h = mix64(master);
  for (auto k : keys) h = mix_combine(h, static_cast<std::uint64_t>(k));
  return h;
}

/// Experiment identifiers mixed into task seeds.
enum class Experiment : std::int64_t {
  effmat = 1,
  sweep = 2,
  corrector = 3,
  gff_compare = 4,
  error_scaling = 5,
  regularity = 6,
  surrogate = 7,
};

/// Seed of one Monte Carlo task: stable under reordering and resumption.
inline Seed task_seed(Seed master, Experiment kind, std::int64_t scale_index, std::int64_t sample) {
  return derive_seed(master, {static_cast<std::int64_t>(kind), scale_index, sample});
}

/// Substream seed for the unit lattice cell z.
inline Seed cell_seed(Seed master, std::span<const int> z) {
  std::uint64_t h = mix64(master ^ 0x63656c6cULL);
  for (int zi : z) h = mix_combine(h, static_cast<std::uint64_t>(static_cast<std::int64_t>(zi)));
  return h;
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(Engine& e) noexcept {
  return static_cast<double>(e() >> 11) * 0x1.0p-53;
}

}  // namespace homlab
