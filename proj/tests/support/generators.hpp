#pragma once

// Small seeded generators for property tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace nvtest {

class Gen {
public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
  double log_uniform(double a, double b) { return std::exp(uniform(std::log(a), std::log(b))); }
  double normal(double sigma = 1.0) { return std::normal_distribution<double>(0.0, sigma)(rng_); }
  int integer(int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng_); }
  std::uint64_t seed() { return rng_(); }

  std::vector<double> normals(std::size_t n, double sigma) {
    std::vector<double> v(n);
    for (auto &x : v) {
      x = normal(sigma);
    }
    return v;
  }

  std::mt19937_64 &engine() { return rng_; }

private:
  std::mt19937_64 rng_;
};

inline std::vector<double> linspace(double a, double b, std::size_t n) {
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
  }
  return out;
}

inline double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

} // namespace nvtest
