#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace hccrm {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to derive independent, reproducible streams from
// a master seed: stream(seed, k) seeds the generator owned by task k.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index,
                                 std::uint64_t salt = 0) {
  return splitmix64(splitmix64(master ^ splitmix64(salt)) + index);
}

inline Rng make_stream(std::uint64_t master, std::uint64_t index,
                       std::uint64_t salt = 0) {
  return Rng(stream_seed(master, index, salt));
}

// Uniform in the open interval (0, 1) from a 64-bit hash value.
inline double open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

template <class URBG>
double uniform01(URBG& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

template <class URBG>
double exponential(URBG& rng, double rate) {
  return std::exponential_distribution<double>(rate)(rng);
}

// Gamma with (shape, rate).
template <class URBG>
double gamma_shape_rate(URBG& rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

template <class URBG>
std::uint64_t poisson(URBG& rng, double mean) {
  if (mean <= 0.0) return 0;
  if (mean > 1e15) throw std::overflow_error("poisson: mean too large");
  return static_cast<std::uint64_t>(std::poisson_distribution<std::int64_t>(mean)(rng));
}

// Poisson(mean) conditioned on being >= 1.
template <class URBG>
std::uint64_t zero_truncated_poisson(URBG& rng, double mean) {
  if (!(mean > 0.0)) throw std::invalid_argument("zero_truncated_poisson: mean must be positive");
  if (mean >= 1.0) {
    for (;;) {
      auto k = poisson(rng, mean);
      if (k > 0) return k;
    }
  }
  // Inversion on the truncated pmf p_k = mean^k e^-mean / (k! (1 - e^-mean)).
  const double norm = -std::expm1(-mean);
  double u = uniform01(rng) * norm;
  double pk = mean * std::exp(-mean);
  std::uint64_t k = 1;
  while (u > pk && k < 1000) {
    u -= pk;
    ++k;
    pk *= mean / static_cast<double>(k);
  }
  return k;
}

}  // namespace hccrm
