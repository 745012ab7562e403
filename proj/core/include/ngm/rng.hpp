#ifndef NGM_RNG_HPP
#define NGM_RNG_HPP

#include <cstdint>
#include <vector>

namespace ngm {

// xoshiro256** seeded through splitmix64. Self-contained so that seeded runs
// are bitwise reproducible across standard libraries and platforms
// (std::<distribution> algorithms are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Standard normal (Box-Muller, pairs cached).
  double normal();

  // Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n);
  // Draw an index from an unnormalized nonnegative weight vector.
  int discrete(const std::vector<double>& weights);

  // Independent deterministic substream (e.g. one per sample chain).
  Rng substream(std::uint64_t index) const;

 private:
  std::uint64_t s_[4];
  std::uint64_t seed_, stream_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace ngm

#endif  // NGM_RNG_HPP
