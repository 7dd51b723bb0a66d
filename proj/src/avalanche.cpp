#include "avl/avalanche.hpp"

#include "avl/isa.hpp"
#include "avl/stats.hpp"

#include <bit>

namespace avl {

namespace {

std::optional<output_vector> run_one(const snapshot& snap, const std::map<std::uint32_t, std::uint8_t>& overrides,
                                     const std::set<std::uint32_t>& outs, const std::vector<std::uint32_t>& order,
                                     std::uint64_t max_steps) {
  const auto r = replay(snap, overrides, outs, max_steps);
  if (r.status != replay_status::completed) return std::nullopt;
  output_vector v;
  v.reserve(order.size());
  for (auto a : order) {
    auto it = r.output_values.find(a);
    v.push_back(it == r.output_values.end() ? 0 : it->second);
  }
  return v;
}

} // namespace

trial_matrix run_trials(const snapshot& snap, const io_set& io, std::size_t n_trials, std::uint64_t seed,
                        std::uint64_t max_steps) {
  trial_matrix m;
  m.n_trials = n_trials;
  m.input_bytes.assign(io.inputs.begin(), io.inputs.end());
  m.output_bytes.assign(io.outputs.begin(), io.outputs.end());
  const std::size_t nbits = m.input_bits();
  m.baseline.resize(n_trials);
  m.flipped.assign(nbits, std::vector<std::optional<output_vector>>(n_trials));
  m.discarded.resize(nbits);

  rng gen(seed);
  for (std::size_t n = 0; n < n_trials; ++n) {
    output_vector x(m.input_bytes.size());
    gen.fill(x);
    m.inputs.push_back(x);
  }

  for (std::size_t n = 0; n < n_trials; ++n) {
    std::map<std::uint32_t, std::uint8_t> ov;
    for (std::size_t b = 0; b < m.input_bytes.size(); ++b) ov[m.input_bytes[b]] = m.inputs[n][b];
    m.baseline[n] = run_one(snap, ov, io.outputs, m.output_bytes, max_steps);
    if (!m.baseline[n]) {
      ++m.baseline_failures;
      for (auto& d : m.discarded) d.insert(n);
      continue;
    }
    for (std::size_t i = 0; i < nbits; ++i) {
      const std::uint32_t addr = m.input_bytes[i / 8];
      const std::uint8_t orig = ov[addr];
      ov[addr] = static_cast<std::uint8_t>(orig ^ (1u << (i % 8)));
      m.flipped[i][n] = run_one(snap, ov, io.outputs, m.output_bytes, max_steps);
      ov[addr] = orig;
      if (!m.flipped[i][n]) m.discarded[i].insert(n);
    }
  }
  return m;
}

std::vector<bool> ava_output_bits(const std::vector<output_vector>& baseline, const std::vector<output_vector>& flipped,
                                  std::optional<std::pair<std::size_t, std::size_t>> bounds) {
  const std::size_t trials = baseline.size();
  const std::size_t nbits = trials ? baseline[0].size() * 8 : 0;
  std::vector<std::size_t> counts(nbits, 0);
  for (std::size_t n = 0; n < trials; ++n)
    for (std::size_t j = 0; j < nbits; ++j)
      counts[j] += ((baseline[n][j / 8] ^ flipped[n][j / 8]) >> (j % 8)) & 1u;
  std::vector<bool> mask(nbits, false);
  if (!bounds && trials < 4) return mask;
  const auto [lo, hi] = bounds ? *bounds : iqr_bounds(trials);
  for (std::size_t j = 0; j < nbits; ++j) mask[j] = counts[j] >= lo && counts[j] <= hi;
  return mask;
}

std::uint32_t count_flipped(const output_vector& a, const output_vector& b, const std::vector<bool>& mask) {
  std::uint32_t c = 0;
  for (std::size_t j = 0; j < mask.size(); ++j)
    if (mask[j]) c += ((a[j / 8] ^ b[j / 8]) >> (j % 8)) & 1u;
  return c;
}

hash_filter_result hash_loop_filter(const loop_instance& loop, const trace_file& trace, double limit) {
  std::size_t count = 0;
  for (std::size_t i = loop.first; i <= loop.last && i < trace.records.size(); ++i) {
    const auto in = decode(trace.records[i].raw);
    if (in && (in->op == opcode::and_ || in->op == opcode::or_)) ++count;
  }
  hash_filter_result r;
  const std::size_t iters = std::max<std::size_t>(loop.iterations(), 1);
  r.and_or_per_iteration = static_cast<double>(count) / static_cast<double>(iters);
  r.suppressed = r.and_or_per_iteration > limit;
  return r;
}

avalanche_report decide_loop(const trial_matrix& m, const decision_params& params, const hash_filter_result& hash) {
  avalanche_report rep;
  rep.input_bit_count = m.input_bits();
  rep.output_bit_count = m.output_bits();
  rep.n_trials = m.n_trials;
  rep.baseline_failures = m.baseline_failures;
  rep.unanalyzable = m.unanalyzable();
  rep.theta = params.theta;
  rep.p_threshold = params.p_threshold;
  rep.hash = hash;

  for (std::size_t i = 0; i < m.input_bits(); ++i) {
    input_bit_result b;
    b.address = m.input_bytes[i / 8];
    b.bit = static_cast<unsigned>(i % 8);
    std::vector<output_vector> base, flip;
    for (std::size_t n = 0; n < m.n_trials; ++n) {
      if (m.discarded[i].count(n) || !m.baseline[n] || !m.flipped[i][n]) continue;
      base.push_back(*m.baseline[n]);
      flip.push_back(*m.flipped[i][n]);
    }
    b.retained = base.size();
    if (!rep.unanalyzable && b.retained >= std::max<std::size_t>(params.min_retained, 4) && rep.output_bit_count > 0) {
      const auto mask = ava_output_bits(base, flip, params.iqr);
      for (std::size_t j = 0; j < mask.size(); ++j)
        if (!mask[j]) b.excluded_output_bits.push_back(static_cast<std::uint32_t>(j));
      std::vector<double> sample;
      for (std::size_t n = 0; n < base.size(); ++n) {
        b.flip_counts.push_back(count_flipped(base[n], flip[n], mask));
        sample.push_back(b.flip_counts.back());
      }
      const auto nr = shapiro_wilk(sample);
      b.w = nr.w;
      b.p_value = nr.p_value;
      b.degenerate = nr.degenerate;
      b.passed = !nr.degenerate && nr.p_value >= params.p_threshold;
    }
    rep.avalanche_bit_count += b.passed;
    rep.bits.push_back(std::move(b));
  }
  rep.verdict = !rep.unanalyzable && rep.avalanche_bit_count >= params.theta && !hash.suppressed;
  return rep;
}

} // namespace avl
