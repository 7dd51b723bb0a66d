#pragma once

#include "avl/loops.hpp"
#include "avl/trace.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace avl {

enum class removal_reason { constant, pointer };
std::string to_string(removal_reason r);

/// Candidate input/output bytes of one loop. Inputs and outputs are
/// memory-only and byte granular; a byte may be both.
struct io_set {
  std::set<std::uint32_t> inputs;
  std::set<std::uint32_t> outputs;
  std::map<std::uint32_t, removal_reason> removed;
  /// Value at the first read of the byte in each iteration (empty when the
  /// iteration did not read it).
  std::map<std::uint32_t, std::vector<std::optional<std::uint8_t>>> per_iteration_values;
  std::vector<std::string> diagnostics;
};

/// Every byte read in the loop span is an input, every byte written an output.
io_set collect_raw_io(const loop_instance& loop, const trace_file& trace);

/// Moves inputs whose observed value never varies across iterations to
/// `removed` (constant). Skipped, with a diagnostic, for single-iteration loops.
io_set remove_constants(io_set io);

enum class pointer_filter {
  strict, // aligned, never-changing 4-byte reads that were used as a base register
  paper,  // any never-changing 4-byte read
};

std::string to_string(pointer_filter f);
std::optional<pointer_filter> pointer_filter_from_string(const std::string& s);

/// Relabels pointer-like 4-byte read locations as removed (pointer). A
/// location already removed as constant becomes pointer when it qualifies.
io_set remove_pointers(io_set io, const loop_instance& loop, const trace_file& trace, pointer_filter mode);

/// collect_raw_io followed by both filters.
io_set identify_io(const loop_instance& loop, const trace_file& trace, pointer_filter mode);

} // namespace avl
