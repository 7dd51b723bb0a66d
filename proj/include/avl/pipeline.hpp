#pragma once

#include "avl/avalanche.hpp"
#include "avl/io.hpp"
#include "avl/loops.hpp"
#include "avl/replay.hpp"
#include "avl/taint.hpp"
#include "avl/trace.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace avl {

inline constexpr const char* tool_version = "1.0.0";

struct analysis_config {
  std::size_t n_trials = 30;
  std::size_t theta = 8;
  double p_threshold = 0.05;
  std::uint64_t seed = 0;
  pointer_filter pointers = pointer_filter::strict;
  double hash_threshold = 5.0;
  std::vector<std::string> known_library_globs = {"lib*"};
  std::uint64_t max_step_multiplier = 64;
  std::size_t min_retained = 20;
  std::optional<std::pair<std::size_t, std::size_t>> iqr; // unset: quartiles of the retained trials

  /// Published parameters: 30 trials, theta 8, p 0.05, hash limit 5, and the
  /// plain "never-changing 4-byte read" pointer rule.
  static analysis_config paper_defaults(std::uint64_t seed);
};

struct loop_analysis {
  loop_instance loop;
  std::uint32_t head_address = 0; // end address of the head block
  std::vector<std::uint32_t> head_starts;
  std::vector<std::uint32_t> block_addresses;
  io_set io;
  hash_filter_result hash;
  std::optional<avalanche_report> avalanche;
  std::optional<std::string> skipped_reason;

  bool positive() const { return avalanche && avalanche->verdict; }
};

struct analysis_report {
  analysis_config config;
  std::vector<loop_analysis> loops; // ordered by span start
  std::vector<std::string> diagnostics;
};

/// Per-loop seed: independent of the order loops are analysed in.
std::uint64_t loop_seed(std::uint64_t seed, const loop_instance& loop);

/// Avalanche check of one loop with the given snapshot (normally
/// build_snapshot(loop, trace)).
avalanche_report analyze_loop(const loop_instance& loop, const trace_file& trace, const snapshot& snap,
                              const io_set& io, const analysis_config& config);

/// Detection, I/O filters and the avalanche check for every loop. Loops are
/// checked inner-first; a loop that contains an already positive loop is
/// skipped, as are loops made only of known-library code.
analysis_report analyze(const trace_file& trace, const analysis_config& config);

nlohmann::json to_json(const analysis_config& config);
nlohmann::json to_json(const analysis_report& report);

struct fidelity_entry {
  loop_instance loop;
  fidelity_report report;
};

std::vector<fidelity_entry> fidelity_all(const trace_file& trace);
nlohmann::json to_json(const std::vector<fidelity_entry>& entries);

} // namespace avl
