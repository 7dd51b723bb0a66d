#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace avl {

/// Deterministic stream on top of std::mt19937_64 (whose output sequence
/// the standard fixes). Ranges use rejection sampling rather than the
/// implementation-defined std distributions so streams match everywhere.
class rng {
public:
  explicit rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  std::uint8_t byte() { return static_cast<std::uint8_t>(engine_() >> 56); }
  void fill(std::span<std::uint8_t> out);
  /// Uniform in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

private:
  std::mt19937_64 engine_;
};

/// Derives an independent stream seed from a base seed and a label.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t label);

struct normality_result {
  double w = 0.0;
  double p_value = 0.0;
  std::size_t n = 0;
  bool degenerate = false;
};

class stats_error : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Shapiro-Wilk W and p-value using Royston's approximation (valid for
/// 3 <= n <= 5000). Zero-range samples are degenerate with p = 0.
normality_result shapiro_wilk(std::span<const double> sample);

/// Inclusive (low, high) count bounds of the middle half: floor(n/4) and
/// n - floor(n/4). 30 -> (7, 23).
std::pair<std::size_t, std::size_t> iqr_bounds(std::size_t n_trials);

/// Standard normal quantile (Acklam's rational approximation refined by one
/// Halley step) and upper-tail probability.
double normal_quantile(double p);
double normal_upper_tail(double z);

} // namespace avl
