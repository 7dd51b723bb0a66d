#pragma once

#include "avl/loops.hpp"
#include "avl/machine.hpp"
#include "avl/trace.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

namespace avl {

class rng;

/// Machine state just before a loop's first instruction. Code is fetched
/// from the snapshot's own memory, so no separate image is needed.
struct snapshot {
  register_file regs;
  memory mem;
  std::uint32_t loop_entry = 0;
  std::set<std::uint32_t> exit_set;
  std::unordered_set<std::uint32_t> loop_addresses; // every code address executed in the span
  std::size_t span_length = 0;

  enum class where : std::uint8_t { outside, loop, exit };
  /// Dense lookup over the loop's code range; exit_set wins over loop code.
  /// Rebuilt by index_code() after editing exit_set or loop_addresses.
  where classify(std::uint32_t pc) const {
    if (pc >= code_lo_ && pc - code_lo_ < code_map_.size() * 8 && (pc & 7u) == (code_lo_ & 7u))
      return code_map_[(pc - code_lo_) / 8];
    if (exit_set.count(pc)) return where::exit;
    return code_map_.empty() && loop_addresses.count(pc) ? where::loop : where::outside;
  }
  void index_code();

private:
  std::uint32_t code_lo_ = 0;
  std::vector<where> code_map_;
};

/// Sections as dumped, then every write recorded before the loop span;
/// registers and flags from the loop's first record.
snapshot build_snapshot(const loop_instance& loop, const trace_file& trace);

enum class replay_status { completed, trap, step_budget_exhausted, divergent_exit };
std::string to_string(replay_status s);

struct replay_result {
  replay_status status = replay_status::completed;
  machine_state final_state;
  std::map<std::uint32_t, std::uint8_t> output_values;
  std::uint64_t steps = 0;
  std::uint32_t stop_address = 0;
};

/// Default step budget: 64 times the original span length.
std::uint64_t default_step_budget(const snapshot& snap);

/// Runs from the snapshot with `overrides` applied until the pc reaches the
/// exit set (completed), leaves the loop's code elsewhere (divergent_exit),
/// traps, or runs out of steps. The snapshot is not modified.
replay_result replay(const snapshot& snap, const std::map<std::uint32_t, std::uint8_t>& overrides,
                     const std::set<std::uint32_t>& outputs, std::uint64_t max_steps);

/// Overwrites round(fraction * mapped bytes) distinct snapshot bytes with
/// random values.
void randomize_memory(snapshot& snap, double fraction, rng& gen);

struct fidelity_report {
  replay_status status = replay_status::completed;
  bool registers_match = false;
  bool outputs_match = false;
  bool registers_compared = false; // false when the loop ends the trace
  std::size_t outputs_compared = 0;
  std::vector<std::string> mismatches;

  bool ok() const { return status == replay_status::completed && outputs_match && (registers_match || !registers_compared); }
};

/// Override-free replay compared with the original trace: the register file
/// of the first record after the span and the last value written to every
/// output byte inside the span.
fidelity_report check_fidelity(const loop_instance& loop, const trace_file& trace, const snapshot& snap);

} // namespace avl
