#pragma once

#include <cstdint>
#include <vector>

namespace cmtssl {

// xoshiro256++ seeded via splitmix64. Self-contained so that permutations,
// masks, and weight initialization are bit-reproducible across platforms and
// standard-library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);

  // Standard normal via Box-Muller (caches the spare draw).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Unbiased integer in [0, n), n > 0.
  std::uint64_t below(std::uint64_t n);

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Uniform permutation of {0..n-1}.
  std::vector<int> permutation(int n);

  // k distinct values from {0..n-1}, in draw order.
  std::vector<int> choose_k(int n, int k);

 private:
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Mixes a base seed with a stream index so parallel workers draw independent,
// order-insensitive streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c);

}  // namespace cmtssl
