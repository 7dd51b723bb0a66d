#pragma once

#include "avl/image.hpp"
#include "avl/trace.hpp"

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace avl {

enum class block_end { branch, call, ret, trace_end };

/// Blocks are identified by their terminating instruction; occurrences that
/// end at the same address but enter elsewhere are the same block.
struct basic_block {
  std::uint32_t id = 0;
  std::uint32_t end_address = 0;
  block_end kind = block_end::branch;
  std::set<std::uint32_t> start_addresses;
  std::vector<std::pair<std::size_t, std::size_t>> occurrences; // record index ranges, inclusive
};

struct block_occurrence {
  std::uint32_t block = 0;
  std::size_t first = 0; // record indices, inclusive
  std::size_t last = 0;
};

struct block_partition {
  std::vector<basic_block> blocks;        // by id
  std::vector<block_occurrence> sequence; // execution order
};

/// Cuts the trace after every branch, call and ret (and after the final
/// record). Total: an empty trace gives an empty partition.
block_partition partition_blocks(const trace_file& trace);

struct loop_instance {
  std::uint32_t id = 0;
  std::uint32_t head = 0; // block id
  std::set<std::uint32_t> body_blocks;
  std::size_t first = 0; // trace span, inclusive
  std::size_t last = 0;
  std::vector<std::size_t> iteration_boundaries; // record index of each head entry
  unsigned frame_depth = 0;

  std::size_t span_length() const { return last - first + 1; }
  std::size_t iterations() const { return iteration_boundaries.size(); }
  bool contains(const loop_instance& other) const {
    return first <= other.first && other.last <= last && span_length() > other.span_length();
  }
};

struct loop_detection {
  std::vector<loop_instance> loops; // ordered by span start, outer before inner
  std::vector<std::string> diagnostics;
};

/// Frame-stack loop detection over a block sequence. Calls open a callee
/// frame after the call block is accounted for in the caller; a ret closes
/// the callee frame without touching the caller.
loop_detection detect_loops(const block_partition& blocks);

struct filter_policy {
  std::vector<std::string> known_library_sections; // fnmatch globs
};

/// Drops loops whose every executed instruction lies in a known-library
/// section. The nesting rule (skip loops containing a positive inner loop)
/// is applied by the analysis driver.
std::vector<loop_instance> filter_loops(const std::vector<loop_instance>& loops, const trace_file& trace,
                                        const filter_policy& policy);

} // namespace avl
