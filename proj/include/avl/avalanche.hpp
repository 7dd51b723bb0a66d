#pragma once

#include "avl/io.hpp"
#include "avl/loops.hpp"
#include "avl/replay.hpp"
#include "avl/trace.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace avl {

/// Output byte values in `trial_matrix::output_bytes` order.
using output_vector = std::vector<std::uint8_t>;

struct trial_matrix {
  std::size_t n_trials = 0;
  std::vector<std::uint32_t> input_bytes;  // ascending; bit i = byte i/8, bit i%8
  std::vector<std::uint32_t> output_bytes; // ascending
  std::vector<output_vector> inputs;       // X_n per trial (values of input_bytes)
  std::vector<std::optional<output_vector>> baseline;             // Y_n, empty if the replay failed
  std::vector<std::vector<std::optional<output_vector>>> flipped; // [input bit][trial]
  std::vector<std::set<std::size_t>> discarded;                   // [input bit] -> trials
  std::size_t baseline_failures = 0;

  std::size_t input_bits() const { return input_bytes.size() * 8; }
  std::size_t output_bits() const { return output_bytes.size() * 8; }
  /// More than half of the baseline replays failed.
  bool unanalyzable() const { return n_trials > 0 && 2 * baseline_failures > n_trials; }
};

/// For every trial: random values for the surviving input bytes, a baseline
/// replay, then one replay per input bit with just that bit flipped. The
/// stream is drawn serially from `seed`, so the matrix is reproducible.
trial_matrix run_trials(const snapshot& snap, const io_set& io, std::size_t n_trials, std::uint64_t seed,
                        std::uint64_t max_steps);

/// Mask of output bits whose flip count over the given trial pairs lies in
/// iqr_bounds(number of pairs), inclusive, unless `bounds` overrides them.
std::vector<bool> ava_output_bits(const std::vector<output_vector>& baseline, const std::vector<output_vector>& flipped,
                                  std::optional<std::pair<std::size_t, std::size_t>> bounds = std::nullopt);

/// Hamming distance of `a` and `b` restricted to `mask`.
std::uint32_t count_flipped(const output_vector& a, const output_vector& b, const std::vector<bool>& mask);

struct decision_params {
  std::size_t theta = 8;
  double p_threshold = 0.05;
  std::size_t min_retained = 20;
  std::optional<std::pair<std::size_t, std::size_t>> iqr; // fixed flip-count band instead of iqr_bounds
};

struct input_bit_result {
  std::uint32_t address = 0;
  unsigned bit = 0;
  std::size_t retained = 0;
  std::vector<std::uint32_t> excluded_output_bits;
  std::vector<std::uint32_t> flip_counts;
  double w = 0.0;
  double p_value = 0.0;
  bool degenerate = false;
  bool passed = false;
};

struct hash_filter_result {
  double and_or_per_iteration = 0.0;
  bool suppressed = false;
};

/// Average number of and/or instructions per iteration over the loop span;
/// suppressed when above `limit`.
hash_filter_result hash_loop_filter(const loop_instance& loop, const trace_file& trace, double limit = 5.0);

struct avalanche_report {
  std::size_t input_bit_count = 0;
  std::size_t output_bit_count = 0;
  std::size_t n_trials = 0;
  std::size_t baseline_failures = 0;
  bool unanalyzable = false;
  std::vector<input_bit_result> bits;
  std::size_t avalanche_bit_count = 0;
  std::size_t theta = 0;
  double p_threshold = 0.0;
  hash_filter_result hash;
  bool verdict = false; // avalanche_bit_count >= theta and not hash-suppressed
};

avalanche_report decide_loop(const trial_matrix& matrix, const decision_params& params,
                             const hash_filter_result& hash = {});

} // namespace avl
