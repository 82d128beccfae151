#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace lightcone {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a base seed and a stream index
// (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Uniform integer in [0, bound) by rejection on the raw engine output, so the
// draw sequence is identical across standard library implementations.
std::uint64_t uniform_index(Rng& rng, std::uint64_t bound);

// Uniform real in [0, 1) from the top 53 bits of one engine draw.
double uniform_unit(Rng& rng);

// Standard normal draw (Box-Muller on uniform_unit, one value per call).
double standard_normal(Rng& rng);

// Sorted uniform random subset of size k from [0, n) (partial Fisher-Yates).
std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k,
                                                    Rng& rng);

}  // namespace lightcone
