#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace freespace {

// mt19937_64 with hand-rolled distributions. std::uniform_int_distribution
// and friends are implementation-defined, which would break bit-for-bit
// reproducibility of seeded artifacts across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // Independent substream derived from (seed, stream), e.g. one per RANSAC
  // iteration so results do not depend on scheduling.
  Rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    gen_.seed(seq);
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, n). Modulo bias is < n / 2^64, irrelevant at our scales.
  std::size_t index(std::size_t n) { return gen_() % n; }

  // Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one value per call, cached pair discarded for simplicity.
  double gaussian(double mean = 0.0, double sigma = 1.0) {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(6.283185307179586476925287 * u2);
  }

  // k distinct indices from [0, n), ascending. Partial Fisher-Yates over an
  // index vector, then sort for deterministic downstream iteration order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);

 private:
  std::mt19937_64 gen_;
};

inline std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n,
                                                                std::size_t k) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = 0; i < k && i < n; ++i) {
    const std::size_t j = i + index(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k < n ? k : n);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace freespace
