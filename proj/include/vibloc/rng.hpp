#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "vibloc/matrix.hpp"

namespace vibloc {

// Deterministic random source. Every stochastic piece of the library
// (init, dropout, latent noise, shuffles) draws from an Rng, and all Rngs
// in one run are derived from a single master seed, so a run is fully
// reproducible from its config.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  // Independent substream identified by (this seed, tag, index). Does not
  // consume state from this generator.
  Rng derive(std::string_view tag, std::uint64_t index = 0) const;

  double uniform(double lo, double hi);
  double gaussian();  // standard normal
  bool bernoulli(double p_true);

  Matrix uniform_matrix(Index rows, Index cols, double lo, double hi);
  Matrix gaussian_matrix(Index rows, Index cols);

  // Uniformly shuffled {0, ..., n-1}.
  std::vector<Index> permutation(Index n);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace vibloc
