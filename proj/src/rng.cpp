#include "emm/rng.hpp"

#include <cmath>

#include "emm/error.hpp"

namespace emm {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t s = base + 0x9E3779B97F4A7C15ull * (stream + 1);
  const std::uint64_t a = splitmix64(s);
  const std::uint64_t b = splitmix64(s);
  return a ^ (b >> 32) ^ (b << 32);
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform_pos() {
  return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw Error("uniform_index: n must be positive");
  const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  const double u1 = uniform_pos();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

double Rng::gamma(double shape, double scale) {
  if (shape <= 0.0 || scale <= 0.0)
    throw Error("gamma: shape and scale must be positive");
  if (shape < 1.0) {
    // Boost shape by one, then thin with U^{1/shape}.
    const double u = uniform_pos();
    return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
  }
  // Marsaglia-Tsang squeeze.
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return d * v * scale;
  }
}

std::int64_t Rng::poisson(double lambda) {
  if (lambda < 0.0) throw Error("poisson: lambda must be nonnegative");
  if (lambda == 0.0) return 0;
  // Exponential inter-arrival race; exact for any lambda, O(lambda) draws.
  std::int64_t k = 0;
  double acc = -std::log(uniform_pos());
  while (acc <= lambda) {
    ++k;
    acc += -std::log(uniform_pos());
  }
  return k;
}

std::int64_t Rng::negative_binomial(double mu, double theta) {
  if (mu <= 0.0 || theta <= 0.0)
    throw Error("negative_binomial: mu and theta must be positive");
  const double lambda = gamma(theta, mu / theta);
  return poisson(lambda);
}

}  // namespace emm
