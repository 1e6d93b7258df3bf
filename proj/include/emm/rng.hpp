#pragma once

#include <cstdint>
#include <random>

namespace emm {

// splitmix64 step; advances state and returns the next output.
std::uint64_t splitmix64(std::uint64_t& state);

// Seed for a numbered substream. Fixtures depend on this mapping, so it is
// part of the file-format contract: state = base + GOLDEN * (stream + 1),
// then two splitmix64 outputs xored.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// mt19937_64 with hand-rolled samplers (Box-Muller, Marsaglia-Tsang gamma,
// exponential-race Poisson) so draws are identical on every platform. The
// std::distributions are implementation-defined and would break fixtures.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1).
  double uniform();
  // Uniform on (0, 1]; safe under log().
  double uniform_pos();
  // Unbiased integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n);

  double normal();
  double gamma(double shape, double scale);
  std::int64_t poisson(double lambda);
  // NB2 via the gamma-Poisson mixture: Var = mu + mu^2/theta.
  std::int64_t negative_binomial(double mu, double theta);

 private:
  std::mt19937_64 engine_;
};

}  // namespace emm
