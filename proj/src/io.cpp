#include "avl/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>

namespace avl {

std::string to_string(removal_reason r) { return r == removal_reason::constant ? "constant" : "pointer"; }

std::string to_string(pointer_filter f) { return f == pointer_filter::strict ? "strict" : "paper"; }

std::optional<pointer_filter> pointer_filter_from_string(const std::string& s) {
  if (s == "strict") return pointer_filter::strict;
  if (s == "paper") return pointer_filter::paper;
  return std::nullopt;
}

namespace {

std::size_t iteration_of(const loop_instance& loop, std::size_t record) {
  const auto& b = loop.iteration_boundaries;
  auto it = std::upper_bound(b.begin(), b.end(), record);
  return it == b.begin() ? 0 : static_cast<std::size_t>(it - b.begin()) - 1;
}

} // namespace

io_set collect_raw_io(const loop_instance& loop, const trace_file& trace) {
  io_set io;
  const std::size_t iters = std::max<std::size_t>(loop.iterations(), 1);
  for (std::size_t i = loop.first; i <= loop.last; ++i) {
    const auto& rec = trace.records[i];
    const auto it = iteration_of(loop, i);
    for (const auto& r : rec.reads) {
      for (unsigned k = 0; k < r.size; ++k) {
        const std::uint32_t a = r.address + k;
        io.inputs.insert(a);
        auto& vals = io.per_iteration_values[a];
        if (vals.empty()) vals.resize(iters);
        if (!vals[it]) vals[it] = static_cast<std::uint8_t>(r.value >> (8 * k));
      }
    }
    for (const auto& w : rec.writes)
      for (unsigned k = 0; k < w.size; ++k) io.outputs.insert(w.address + k);
  }
  return io;
}

io_set remove_constants(io_set io) {
  std::size_t iters = 0;
  if (!io.per_iteration_values.empty()) iters = io.per_iteration_values.begin()->second.size();
  if (iters < 2) {
    io.diagnostics.push_back("single-iteration loop: constant filter skipped");
    return io;
  }
  for (auto it = io.inputs.begin(); it != io.inputs.end();) {
    const auto& vals = io.per_iteration_values.at(*it);
    std::optional<std::uint8_t> seen;
    bool varies = false;
    for (const auto& v : vals) {
      if (!v) continue;
      if (seen && *seen != *v) {
        varies = true;
        break;
      }
      seen = v;
    }
    if (varies) {
      ++it;
    } else {
      io.removed[*it] = removal_reason::constant;
      it = io.inputs.erase(it);
    }
  }
  return io;
}

io_set remove_pointers(io_set io, const loop_instance& loop, const trace_file& trace, pointer_filter mode) {
  // Per 4-byte read location: distinct values seen, and whether a register
  // loaded from it was later used as a memory base.
  struct location {
    std::set<std::uint32_t> values;
    bool dereferenced = false;
  };
  std::map<std::uint32_t, location> locs;
  std::array<std::optional<std::uint32_t>, register_count> origin{};

  for (std::size_t i = loop.first; i <= loop.last; ++i) {
    const auto& rec = trace.records[i];
    for (const auto& r : rec.reads)
      if (r.size == 4) locs[r.address].values.insert(r.value);
    const auto in = decode(rec.raw);
    if (!in) continue;
    const auto shape = shape_of(in->op);
    if ((shape == operand_shape::load || shape == operand_shape::store) && origin[in->rs])
      locs[*origin[in->rs]].dereferenced = true;

    const auto dst = destination_register(*in);
    if (!dst) continue;
    std::optional<std::uint32_t> next;
    if (in->op == opcode::ld4 && !rec.reads.empty()) {
      next = rec.reads.front().address;
    } else if (in->op == opcode::mov) {
      next = origin[in->rs];
    } else if ((in->op == opcode::add || in->op == opcode::sub) && in->immediate) {
      next = origin[in->rs]; // pointer plus offset
    }
    origin[*dst] = next;
  }

  for (const auto& [addr, loc] : locs) {
    if (loc.values.size() != 1) continue;
    if (mode == pointer_filter::strict && (addr % 4 != 0 || !loc.dereferenced)) continue;
    for (std::uint32_t k = 0; k < 4; ++k) {
      const std::uint32_t a = addr + k;
      io.inputs.erase(a);
      io.removed[a] = removal_reason::pointer;
    }
  }
  return io;
}

io_set identify_io(const loop_instance& loop, const trace_file& trace, pointer_filter mode) {
  return remove_pointers(remove_constants(collect_raw_io(loop, trace)), loop, trace, mode);
}

} // namespace avl
