#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace fedlwf {

// The engine's output sequence is fixed by the standard. All distributions
// used on top of it come from Boost.Random, whose algorithms are fixed code,
// so seeded results are reproducible across standard libraries.
using Rng = std::mt19937_64;

/// splitmix64 finalizer; a bijection on 64-bit integers.
[[nodiscard]] std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Derives a child seed: splitmix64(splitmix64(seed) ^ key).
/// For a fixed seed the map key -> child is a bijection.
[[nodiscard]] std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key) noexcept;
[[nodiscard]] std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key1, std::uint64_t key2) noexcept;

[[nodiscard]] double uniform_real(Rng& rng, double lo, double hi);
[[nodiscard]] double standard_normal(Rng& rng);
[[nodiscard]] double gamma_sample(Rng& rng, double shape);
/// Uniform integer in [0, n).
[[nodiscard]] std::size_t uniform_index(Rng& rng, std::size_t n);

/// Fisher-Yates permutation of 0..n-1.
[[nodiscard]] std::vector<std::size_t> permutation(std::size_t n, Rng& rng);
[[nodiscard]] std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed);

}  // namespace fedlwf
