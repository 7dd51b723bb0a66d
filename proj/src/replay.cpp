#include "avl/replay.hpp"

#include "avl/stats.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace avl {

std::string to_string(replay_status s) {
  switch (s) {
  case replay_status::completed: return "completed";
  case replay_status::trap: return "trap";
  case replay_status::step_budget_exhausted: return "step-budget-exhausted";
  case replay_status::divergent_exit: return "divergent-exit";
  }
  return "unknown";
}

snapshot build_snapshot(const loop_instance& loop, const trace_file& trace) {
  if (loop.first >= trace.records.size() || loop.last >= trace.records.size())
    throw trace_error(trace_error::kind::malformed, "loop span outside the trace", loop.first);
  snapshot snap;
  snap.mem = memory(trace.section_dump);
  for (std::size_t i = 0; i < loop.first; ++i) {
    for (const auto& w : trace.records[i].writes)
      for (unsigned k = 0; k < w.size; ++k)
        snap.mem.poke(w.address + k, static_cast<std::uint8_t>(w.value >> (8 * k)));
  }
  const auto& entry = trace.records[loop.first];
  snap.regs = entry.regs_before;
  snap.loop_entry = entry.address;
  snap.span_length = loop.span_length();
  for (std::size_t i = loop.first; i <= loop.last; ++i) snap.loop_addresses.insert(trace.records[i].address);

  if (loop.last + 1 < trace.records.size()) snap.exit_set.insert(trace.records[loop.last + 1].address);
  // Successors of the head's terminating branch that leave the loop.
  for (std::size_t i = loop.iteration_boundaries.back(); i <= loop.last; ++i) {
    const auto in = decode(trace.records[i].raw);
    if (!in || !is_branch(in->op)) continue;
    std::vector<std::uint32_t> succ;
    if (is_conditional(in->op)) {
      succ = {in->imm, trace.records[i].address + instruction_size};
    } else if (in->op == opcode::jmp && in->immediate) {
      succ = {in->imm};
    }
    for (auto s : succ)
      if (!snap.loop_addresses.count(s)) snap.exit_set.insert(s);
    break;
  }
  snap.index_code();
  return snap;
}

void snapshot::index_code() {
  code_map_.clear();
  if (loop_addresses.empty()) return;
  const auto [lo, hi] = std::minmax_element(loop_addresses.begin(), loop_addresses.end());
  // Mixed alignments cannot share one table; fall back to the sets.
  for (auto a : loop_addresses)
    if ((a & 7u) != (*lo & 7u)) return;
  code_lo_ = *lo;
  code_map_.assign((*hi - *lo) / 8 + 1, where::outside);
  for (auto a : loop_addresses) code_map_[(a - code_lo_) / 8] = where::loop;
  for (auto a : exit_set)
    if (a >= code_lo_ && a - code_lo_ < code_map_.size() * 8 && (a & 7u) == (code_lo_ & 7u))
      code_map_[(a - code_lo_) / 8] = where::exit;
}

std::uint64_t default_step_budget(const snapshot& snap) { return 64 * static_cast<std::uint64_t>(snap.span_length); }

replay_result replay(const snapshot& snap, const std::map<std::uint32_t, std::uint8_t>& overrides,
                     const std::set<std::uint32_t>& outputs, std::uint64_t max_steps) {
  replay_result res;
  machine_state& st = res.final_state;
  st.regs = snap.regs;
  st.mem = snap.mem;
  for (const auto& [addr, v] : overrides) st.mem.poke(addr, v);

  while (true) {
    const auto w = snap.classify(st.regs.pc);
    if (w == snapshot::where::exit) {
      res.status = replay_status::completed;
      break;
    }
    if (w == snapshot::where::outside) {
      res.status = replay_status::divergent_exit;
      break;
    }
    if (res.steps == max_steps) {
      res.status = replay_status::step_budget_exhausted;
      break;
    }
    const auto s = step(st);
    ++res.steps;
    if (s == step_status::trap) {
      res.status = replay_status::trap;
      break;
    }
    if (s == step_status::halted) {
      res.status = replay_status::completed;
      break;
    }
  }
  res.stop_address = st.regs.pc;
  for (auto a : outputs)
    if (auto b = st.mem.byte(a)) res.output_values[a] = *b;
  return res;
}

void randomize_memory(snapshot& snap, double fraction, rng& gen) {
  std::size_t total = 0;
  for (const auto& r : snap.mem.regions()) total += r.bytes.size();
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
  // Partial Fisher-Yates over flat byte positions picks distinct bytes.
  std::vector<std::size_t> idx(total);
  for (std::size_t i = 0; i < total; ++i) idx[i] = i;
  for (std::size_t i = 0; i < count && i < total; ++i) {
    const std::size_t j = i + gen.below(total - i);
    std::swap(idx[i], idx[j]);
    std::size_t pos = idx[i];
    for (auto& r : snap.mem.regions()) {
      if (pos < r.bytes.size()) {
        r.bytes[pos] = gen.byte();
        break;
      }
      pos -= r.bytes.size();
    }
  }
}

fidelity_report check_fidelity(const loop_instance& loop, const trace_file& trace, const snapshot& snap) {
  fidelity_report rep;
  // Expected output bytes: the last value written inside the span.
  std::map<std::uint32_t, std::uint8_t> expected;
  for (std::size_t i = loop.first; i <= loop.last; ++i)
    for (const auto& w : trace.records[i].writes)
      for (unsigned k = 0; k < w.size; ++k) expected[w.address + k] = static_cast<std::uint8_t>(w.value >> (8 * k));
  std::set<std::uint32_t> outs;
  for (const auto& [a, v] : expected) outs.insert(a);

  const auto res = replay(snap, {}, outs, default_step_budget(snap));
  rep.status = res.status;
  rep.outputs_compared = expected.size();
  rep.outputs_match = true;
  for (const auto& [a, v] : expected) {
    auto it = res.output_values.find(a);
    if (it == res.output_values.end() || it->second != v) {
      rep.outputs_match = false;
      if (rep.mismatches.size() < 8)
        rep.mismatches.push_back(fmt::format("byte {:#010x}: replay {:#04x}, trace {:#04x}", a,
                                             it == res.output_values.end() ? 0 : it->second, v));
    }
  }
  if (loop.last + 1 < trace.records.size()) {
    rep.registers_compared = true;
    const auto& want = trace.records[loop.last + 1].regs_before;
    const auto& got = res.final_state.regs;
    rep.registers_match = want == got;
    if (!rep.registers_match) {
      for (unsigned r = 0; r < register_count; ++r)
        if (want.gpr[r] != got.gpr[r])
          rep.mismatches.push_back(fmt::format("r{}: replay {:#x}, trace {:#x}", r, got.gpr[r], want.gpr[r]));
      if (want.pc != got.pc) rep.mismatches.push_back(fmt::format("pc: replay {:#x}, trace {:#x}", got.pc, want.pc));
      if (want.flags != got.flags)
        rep.mismatches.push_back(fmt::format("flags: replay {}, trace {}", got.flags, want.flags));
    }
  }
  return rep;
}

} // namespace avl
