#include "avl/pipeline.hpp"

#include "avl/stats.hpp"

#include <algorithm>
#include <numeric>

namespace avl {

using nlohmann::json;

analysis_config analysis_config::paper_defaults(std::uint64_t seed) {
  analysis_config c;
  c.seed = seed;
  c.n_trials = 30;
  c.theta = 8;
  c.p_threshold = 0.05;
  c.hash_threshold = 5.0;
  c.pointers = pointer_filter::paper;
  c.max_step_multiplier = 64;
  c.min_retained = 20;
  c.iqr.reset();
  return c;
}

std::uint64_t loop_seed(std::uint64_t seed, const loop_instance& loop) {
  // Keyed by where the loop sits in the trace, not by analysis order.
  return derive_seed(seed, (static_cast<std::uint64_t>(loop.first) << 32) ^ loop.last);
}

avalanche_report analyze_loop(const loop_instance& loop, const trace_file& trace, const snapshot& snap,
                              const io_set& io, const analysis_config& config) {
  const auto budget = config.max_step_multiplier * static_cast<std::uint64_t>(snap.span_length);
  const auto m = run_trials(snap, io, config.n_trials, loop_seed(config.seed, loop), budget);
  decision_params dp;
  dp.theta = config.theta;
  dp.p_threshold = config.p_threshold;
  dp.min_retained = config.min_retained;
  dp.iqr = config.iqr;
  return decide_loop(m, dp, hash_loop_filter(loop, trace, config.hash_threshold));
}

analysis_report analyze(const trace_file& trace, const analysis_config& config) {
  analysis_report rep;
  rep.config = config;
  const auto part = partition_blocks(trace);
  auto det = detect_loops(part);
  rep.diagnostics = det.diagnostics;

  filter_policy policy;
  policy.known_library_sections = config.known_library_globs;
  const auto kept = filter_loops(det.loops, trace, policy);
  std::set<std::uint32_t> kept_ids;
  for (const auto& l : kept) kept_ids.insert(l.id);

  rep.loops.resize(det.loops.size());
  std::vector<std::size_t> order(det.loops.size());
  std::iota(order.begin(), order.end(), 0);
  // Inner loops first: a contained loop always has a shorter span.
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return det.loops[a].span_length() < det.loops[b].span_length();
  });

  std::vector<std::size_t> positives;
  for (auto idx : order) {
    const auto& loop = det.loops[idx];
    auto& la = rep.loops[idx];
    la.loop = loop;
    const auto& head = part.blocks[loop.head];
    la.head_address = head.end_address;
    la.head_starts.assign(head.start_addresses.begin(), head.start_addresses.end());
    for (auto b : loop.body_blocks) la.block_addresses.push_back(part.blocks[b].end_address);
    std::sort(la.block_addresses.begin(), la.block_addresses.end());
    la.hash = hash_loop_filter(loop, trace, config.hash_threshold);

    if (!kept_ids.count(loop.id)) {
      la.skipped_reason = "known-library-code";
      continue;
    }
    if (std::any_of(positives.begin(), positives.end(), [&](std::size_t p) { return loop.contains(det.loops[p]); })) {
      la.skipped_reason = "contains-positive-loop";
      continue;
    }
    la.io = identify_io(loop, trace, config.pointers);
    const auto snap = build_snapshot(loop, trace);
    la.avalanche = analyze_loop(loop, trace, snap, la.io, config);
    if (la.avalanche->verdict) positives.push_back(idx);
  }
  return rep;
}

namespace {

json ranges(const std::set<std::uint32_t>& addrs) {
  json out = json::array();
  std::uint32_t start = 0, len = 0;
  for (auto a : addrs) {
    if (len && a == start + len) {
      ++len;
      continue;
    }
    if (len) out.push_back({start, len});
    start = a;
    len = 1;
  }
  if (len) out.push_back({start, len});
  return out;
}

json to_json(const avalanche_report& a) {
  json bits = json::array();
  for (const auto& b : a.bits) {
    double mean = 0.0;
    if (!b.flip_counts.empty())
      mean = std::accumulate(b.flip_counts.begin(), b.flip_counts.end(), 0.0) / static_cast<double>(b.flip_counts.size());
    bits.push_back({{"address", b.address},
                    {"bit", b.bit},
                    {"retained_trials", b.retained},
                    {"excluded_output_bits", b.excluded_output_bits.size()},
                    {"mean_flips", mean},
                    {"w", b.w},
                    {"p_value", b.p_value},
                    {"degenerate", b.degenerate},
                    {"passed", b.passed}});
  }
  return {{"input_bit_count", a.input_bit_count},
          {"output_bit_count", a.output_bit_count},
          {"n_trials", a.n_trials},
          {"baseline_failures", a.baseline_failures},
          {"unanalyzable", a.unanalyzable},
          {"avalanche_bit_count", a.avalanche_bit_count},
          {"theta", a.theta},
          {"p_threshold", a.p_threshold},
          {"hash_suppressed", a.hash.suppressed},
          {"verdict", a.verdict},
          {"per_input_bit", bits}};
}

} // namespace

json to_json(const analysis_config& c) {
  json iqr = nullptr;
  if (c.iqr) iqr = {c.iqr->first, c.iqr->second};
  return {{"n_trials", c.n_trials},
          {"theta", c.theta},
          {"p_threshold", c.p_threshold},
          {"seed", c.seed},
          {"pointer_filter", to_string(c.pointers)},
          {"hash_filter_threshold", c.hash_threshold},
          {"known_library_globs", c.known_library_globs},
          {"max_step_multiplier", c.max_step_multiplier},
          {"min_retained_trials", c.min_retained},
          {"iqr_band", iqr}};
}

json to_json(const analysis_report& r) {
  json loops = json::array();
  for (const auto& la : r.loops) {
    std::size_t constants = 0, pointers = 0;
    for (const auto& [a, why] : la.io.removed) (why == removal_reason::constant ? constants : pointers)++;
    json io = {{"inputs", la.io.inputs.size()},
               {"outputs", la.io.outputs.size()},
               {"input_ranges", ranges(la.io.inputs)},
               {"output_ranges", ranges(la.io.outputs)},
               {"removed_constant", constants},
               {"removed_pointer", pointers},
               {"diagnostics", la.io.diagnostics}};
    loops.push_back({{"id", la.loop.id},
                     {"head_address", la.head_address},
                     {"head_starts", la.head_starts},
                     {"span",
                      {{"first", la.loop.first},
                       {"last", la.loop.last},
                       {"length", la.loop.span_length()},
                       {"iterations", la.loop.iterations()},
                       {"frame_depth", la.loop.frame_depth}}},
                     {"blocks", la.block_addresses},
                     {"io_summary", la.skipped_reason ? json(nullptr) : io},
                     {"hash_filter",
                      {{"and_or_per_iteration", la.hash.and_or_per_iteration},
                       {"threshold", r.config.hash_threshold},
                       {"suppressed", la.hash.suppressed}}},
                     {"avalanche", la.avalanche ? to_json(*la.avalanche) : json(nullptr)},
                     {"verdict", la.positive()},
                     {"skipped_reason", la.skipped_reason ? json(*la.skipped_reason) : json(nullptr)}});
  }
  return {{"tool_version", tool_version},
          {"config", to_json(r.config)},
          {"diagnostics", r.diagnostics},
          {"loops", loops}};
}

std::vector<fidelity_entry> fidelity_all(const trace_file& trace) {
  std::vector<fidelity_entry> out;
  for (const auto& l : detect_loops(partition_blocks(trace)).loops)
    out.push_back({l, check_fidelity(l, trace, build_snapshot(l, trace))});
  return out;
}

json to_json(const std::vector<fidelity_entry>& entries) {
  json loops = json::array();
  std::size_t agree = 0;
  for (const auto& e : entries) {
    agree += e.report.ok();
    loops.push_back({{"id", e.loop.id},
                     {"span", {{"first", e.loop.first}, {"last", e.loop.last}}},
                     {"status", to_string(e.report.status)},
                     {"registers_compared", e.report.registers_compared},
                     {"registers_match", e.report.registers_match},
                     {"outputs_compared", e.report.outputs_compared},
                     {"outputs_match", e.report.outputs_match},
                     {"mismatches", e.report.mismatches},
                     {"ok", e.report.ok()}});
  }
  return {{"tool_version", tool_version}, {"loops", loops}, {"agreeing", agree}, {"total", entries.size()}};
}

} // namespace avl
