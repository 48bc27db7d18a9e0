#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace czsl {

// Deterministic RNG. All distributions are hand-rolled on top of mt19937_64 so
// that streams are stable across standard-library implementations.
class Rng {
  public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1).
    double uniform();
    // Uniform integer in [0, n).
    int uniform_int(int n);
    // Standard normal via Box-Muller.
    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }
    // Gamma(shape, 1) via Marsaglia-Tsang.
    double gamma(double shape);
    // Dirichlet(alpha) over k categories.
    std::vector<double> dirichlet(double alpha, int k);
    // Sample an index from a normalized probability vector.
    int categorical(const std::vector<double>& probs);
    // Fisher-Yates shuffle of indices [0, n).
    std::vector<int> permutation(int n);

    // Derive an independent child stream (for per-purpose sub-seeding).
    Rng fork(uint64_t salt);

  private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace czsl
