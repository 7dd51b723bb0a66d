#include "avl/loops.hpp"

#include <fmt/format.h>
#include <fnmatch.h>

#include <algorithm>
#include <map>
#include <unordered_map>

namespace avl {

namespace {

std::optional<block_end> terminator(const trace_record& r) {
  const auto in = decode(r.raw);
  if (!in || !is_branch(in->op)) return std::nullopt;
  if (in->op == opcode::call) return block_end::call;
  if (in->op == opcode::ret) return block_end::ret;
  return block_end::branch;
}

} // namespace

block_partition partition_blocks(const trace_file& trace) {
  block_partition out;
  std::unordered_map<std::uint32_t, std::uint32_t> by_end;
  const auto& recs = trace.records;
  std::size_t start = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    auto kind = terminator(recs[i]);
    if (!kind && i + 1 != recs.size()) continue;
    const auto end_addr = recs[i].address;
    auto [it, fresh] = by_end.try_emplace(end_addr, static_cast<std::uint32_t>(out.blocks.size()));
    if (fresh) {
      basic_block b;
      b.id = it->second;
      b.end_address = end_addr;
      b.kind = kind.value_or(block_end::trace_end);
      out.blocks.push_back(std::move(b));
    }
    auto& b = out.blocks[it->second];
    b.start_addresses.insert(recs[start].address);
    b.occurrences.emplace_back(start, i);
    out.sequence.push_back({b.id, start, i});
    start = i + 1;
  }
  return out;
}

namespace {

struct frame_entry {
  std::uint32_t block;
  std::size_t seq; // latest occurrence
};

struct frame {
  std::size_t serial = 0;
  std::vector<frame_entry> entries;
  std::unordered_map<std::uint32_t, std::size_t> position; // block -> index in entries
  std::map<std::uint32_t, std::size_t> open;              // head block -> pending loop

  void push(std::uint32_t block, std::size_t seq) {
    position[block] = entries.size();
    entries.push_back({block, seq});
  }
};

struct pending_loop {
  std::uint32_t head;
  unsigned depth;
  std::size_t serial;
  std::vector<std::size_t> head_seq;
};

} // namespace

loop_detection detect_loops(const block_partition& part) {
  loop_detection out;
  const auto& seq = part.sequence;
  const std::size_t n = seq.size();
  std::vector<unsigned> depth(n);
  std::vector<std::size_t> serial(n);
  std::vector<pending_loop> pending;
  std::size_t next_serial = 0;

  std::vector<frame> stack(1);
  stack.back().serial = next_serial++;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& occ = seq[i];
    const auto kind = part.blocks[occ.block].kind;
    frame& f = stack.back();
    depth[i] = static_cast<unsigned>(stack.size() - 1);
    serial[i] = f.serial;

    if (kind == block_end::ret) {
      if (stack.size() == 1) {
        out.diagnostics.push_back(
            fmt::format("ret at record {} with no open call frame; frame stack reset", occ.last));
        stack.back() = frame{};
        stack.back().serial = next_serial++;
      } else {
        stack.pop_back();
      }
      continue;
    }

    if (auto p = f.position.find(occ.block); p != f.position.end()) {
      const std::size_t at = p->second;
      // Unwind the frame back to the head; loops headed by popped blocks end here.
      while (f.entries.size() > at + 1) {
        const auto gone = f.entries.back().block;
        f.open.erase(gone);
        f.position.erase(gone);
        f.entries.pop_back();
      }
      auto& head = f.entries[at];
      if (auto o = f.open.find(occ.block); o != f.open.end()) {
        pending[o->second].head_seq.push_back(i);
      } else {
        f.open[occ.block] = pending.size();
        pending.push_back({occ.block, depth[i], f.serial, {head.seq, i}});
      }
      head.seq = i;
    } else {
      f.push(occ.block, i);
    }

    if (kind == block_end::call) {
      frame callee;
      callee.serial = next_serial++;
      callee.push(occ.block, i);
      stack.push_back(std::move(callee));
    }
  }

  for (const auto& p : pending) {
    loop_instance l;
    l.head = p.head;
    l.frame_depth = p.depth;
    const std::size_t first_seq = p.head_seq.front();
    const std::size_t last_seq = p.head_seq.back();
    for (std::size_t k = first_seq; k <= last_seq; ++k)
      if (serial[k] == p.serial) l.body_blocks.insert(seq[k].block);
    // Run on past the last head entry through the rest of the body and any
    // calls made from it.
    std::size_t end = last_seq;
    for (std::size_t k = last_seq + 1; k < n; ++k) {
      const bool same_frame = serial[k] == p.serial;
      if (same_frame ? !l.body_blocks.count(seq[k].block) : depth[k] <= p.depth) break;
      end = k;
    }
    l.first = seq[first_seq].first;
    l.last = seq[end].last;
    for (auto h : p.head_seq) l.iteration_boundaries.push_back(seq[h].first);
    out.loops.push_back(std::move(l));
  }

  std::sort(out.loops.begin(), out.loops.end(), [](const loop_instance& a, const loop_instance& b) {
    if (a.first != b.first) return a.first < b.first;
    if (a.last != b.last) return a.last > b.last;
    return a.head < b.head;
  });
  for (std::size_t i = 0; i < out.loops.size(); ++i) out.loops[i].id = static_cast<std::uint32_t>(i);
  return out;
}

std::vector<loop_instance> filter_loops(const std::vector<loop_instance>& loops, const trace_file& trace,
                                        const filter_policy& policy) {
  if (policy.known_library_sections.empty()) return loops;
  const auto& img = trace.section_dump;
  auto known = [&](const section* s) {
    if (s == nullptr) return false;
    return std::any_of(policy.known_library_sections.begin(), policy.known_library_sections.end(),
                       [&](const std::string& glob) { return fnmatch(glob.c_str(), s->name.c_str(), 0) == 0; });
  };
  std::vector<loop_instance> out;
  for (const auto& l : loops) {
    bool all_known = true;
    const section* last_hit = nullptr;
    for (std::size_t i = l.first; i <= l.last && all_known; ++i) {
      const auto addr = trace.records[i].address;
      if (last_hit && last_hit->contains(addr)) continue;
      last_hit = img.find_section(addr);
      all_known = known(last_hit);
    }
    if (!all_known) out.push_back(l);
  }
  return out;
}

} // namespace avl
