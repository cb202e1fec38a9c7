#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace kvq {

/// Name of the engine recorded in configs and run summaries.
inline constexpr std::string_view kRngAlgorithm = "mt19937_64";

/// Seeded generator with a portable normal/uniform transform.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The engine state is derived from (seed, stream, counter) through
/// std::seed_seq, which is also standardised, so a batch can be regenerated
/// from its index alone. The standard distributions are not portable, hence
/// the hand-written transforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0, std::uint64_t counter = 0);

  std::uint64_t next() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via Box-Muller; caches the second variate.
  double normal();

  /// Uniform integer in [0, n), unbiased. Requires n > 0.
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace kvq
