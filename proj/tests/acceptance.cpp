// Acceptance checks: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Runs the whole corpus with the published parameters.

#include "corpus_fixture.hpp"
#include "oracles/reference.hpp"

#include "avl/corpus.hpp"
#include "avl/pipeline.hpp"
#include "avl/stats.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

using namespace avl;
using namespace avl::testing;

namespace {

constexpr std::uint64_t base_seed = 0;

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  fmt::print("[{}] criterion {}: {}\n", ok ? "PASS" : "FAIL", id, detail);
  std::fflush(stdout);
}

const program_run& program(const corpus_run& run, const std::string& name) {
  for (const auto& p : run.programs)
    if (p.truth.program == name) return p;
  throw std::runtime_error("corpus has no program " + name);
}

/// Analyzed (not skipped) instances of the labelled loop, in trace order.
std::vector<const loop_analysis*> instances(const program_run& p, const std::string& label) {
  std::vector<const loop_analysis*> out;
  for (const auto& la : p.report.loops) {
    const auto* t = p.truth.find_loop(la.head_starts);
    if (t && t->label == label && la.avalanche) out.push_back(&la);
  }
  return out;
}

// 1 ---------------------------------------------------------------------------

void corpus_classification(const corpus_run& run) {
  const auto& s = run.summary;
  report(1, s.false_negatives == 0 && s.false_positives <= 1 && run.seconds < 600.0,
         fmt::format("corpus --paper-defaults: TP {} TN {} FP {} FN {} over {} programs in {:.1f}s "
                     "(need FN=0, FP<=1, <600s)",
                     s.true_positives, s.true_negatives, s.false_positives, s.false_negatives, run.programs.size(),
                     run.seconds));
}

// 2 ---------------------------------------------------------------------------

void aes_per_bit(const corpus_run& run) {
  bool ok = true;
  std::vector<std::string> parts;
  const auto loops = instances(program(run, "aes"), "rounds");
  for (const auto* la : loops) {
    const auto& a = *la->avalanche;
    if (a.input_bit_count != 128 || a.output_bit_count != 128) continue;
    parts.push_back(fmt::format("{}/{}", a.avalanche_bit_count, a.input_bit_count));
    ok = ok && a.avalanche_bit_count >= 120 && a.verdict;
  }
  ok = ok && !parts.empty();
  report(2, ok, fmt::format("aes single-block round loop avalanche bits (128 in / 128 out): {} (need >=120)",
                            fmt::join(parts, ", ")));
}

// 3 ---------------------------------------------------------------------------

void matmul_divergence() {
  const auto p = load_corpus_program("matmul");
  const auto a = p.sym("A"), b = p.sym("B"), res = p.sym("res");
  std::vector<overrides> contents(1);
  std::mt19937_64 gen(0x3a7);
  for (int c = 0; c < 2; ++c) {
    overrides o;
    put_bytes(o, a, random_bytes(gen, 24));
    put_bytes(o, b, random_bytes(gen, 32));
    contents.push_back(o);
  }
  std::size_t cases = 0, good = 0, positives = 0, min_tainted = 48;
  for (const auto& o : contents) {
    const auto trace = run_corpus(p, o).trace;
    const auto st = propagate(trace, 0, trace.records.size() - 1, {{"A", a, 24}, {"B", b, 32}});
    std::size_t tainted = 0;
    for (std::uint32_t k = 0; k < 48; ++k) tainted += (st.at(res + k) & 3u) == 3u;
    min_tainted = std::min(min_tainted, tainted);
    const bool ripple = ripple_verdict(st, res, 48, 0) && ripple_verdict(st, res, 48, 1);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto rep = analyze(trace, analysis_config::paper_defaults(seed));
      std::size_t pos = 0;
      for (const auto& la : rep.loops) pos += la.positive();
      positives += pos;
      ++cases;
      good += ripple && pos == 0;
    }
  }
  report(3, good == cases && cases >= 15,
         fmt::format("matmul: ripple taints {}/48 res bytes from both A and B (minimum over {} buffer contents); "
                     "avalanche positives {} over {} seed x content runs (need all 48 tainted, 0 positives, >=5 seeds "
                     "x >=3 contents)",
                     min_tainted, contents.size(), positives, cases));
}

// 4 ---------------------------------------------------------------------------

void fidelity(const corpus_run& run) {
  std::size_t total = 0, agree = 0;
  std::vector<std::string> bad;
  for (const auto& p : run.programs)
    for (const auto& e : fidelity_all(p.trace)) {
      ++total;
      if (e.report.ok())
        ++agree;
      else
        bad.push_back(fmt::format("{}#{}", p.truth.program, e.loop.id));
    }
  std::size_t ciphers = 0, flipped = 0;
  const auto cfg = analysis_config::paper_defaults(base_seed);
  for (const auto& p : run.programs)
    for (const auto& la : p.report.loops) {
      const auto* t = p.truth.find_loop(la.head_starts);
      if (!t || t->cls != loop_class::cipher || !la.positive()) continue;
      auto snap = build_snapshot(la.loop, p.trace);
      rng g(derive_seed(cfg.seed ^ 0x5a5a5a5aull, la.loop.first));
      randomize_memory(snap, 0.05, g);
      ++ciphers;
      flipped += !analyze_loop(la.loop, p.trace, snap, la.io, cfg).verdict;
    }
  report(4, total >= 24 && agree == total && ciphers > 0 && flipped == ciphers,
         fmt::format("fidelity {}/{} loop instances agree{}; 5% snapshot randomization turns {}/{} positive cipher "
                     "loops negative (need >=24 instances, 100%, all flipped)",
                     agree, total, bad.empty() ? "" : fmt::format(" (mismatch: {})", fmt::join(bad, ", ")), flipped,
                     ciphers));
}

// 5 ---------------------------------------------------------------------------

void shapiro_reference() {
  std::ifstream in(std::string(AVL_TEST_DATA_DIR) + "/shapiro_reference.csv");
  std::string line;
  std::size_t samples = 0, within = 0;
  double worst = 0.0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, ',');) f.push_back(x);
    if (f.size() != 5) continue;
    const auto n = std::stoul(f[1]);
    if (n < 10 || n > 50) continue;
    std::vector<double> xs;
    std::stringstream vs(f[4]);
    for (std::string x; std::getline(vs, x, ';');) xs.push_back(std::stod(x));
    const double dp = std::abs(shapiro_wilk(xs).p_value - std::stod(f[3]));
    worst = std::max(worst, dp);
    ++samples;
    within += dp <= 1e-3;
  }
  const auto b = iqr_bounds(30);
  report(5, samples >= 100 && within == samples && b == std::pair<std::size_t, std::size_t>{7, 23},
         fmt::format("shapiro-wilk vs scipy: {}/{} samples (n 10..50) within 1e-3, max |dp| {:.2e}; "
                     "iqr_bounds(30) = ({}, {})",
                     within, samples, worst, b.first, b.second));
}

// 6 ---------------------------------------------------------------------------

bool in_buffer(const truth_map& t, std::uint32_t addr, std::initializer_list<const char*> names) {
  for (const auto* n : names)
    if (const auto* b = t.find_buffer(n); b && addr >= b->address && addr - b->address < b->length) return true;
  return false;
}

void binomial_property(const corpus_run& run) {
  bool ok = true;
  std::size_t loops = 0;
  std::vector<std::string> notes;
  for (const auto& p : run.programs)
    for (const auto& la : p.report.loops) {
      const auto* t = p.truth.find_loop(la.head_starts);
      if (!t || t->cls != loop_class::cipher || !la.avalanche) continue;
      // Plaintext bits: inputs inside the plaintext buffer or the working
      // state block the plaintext is copied into.
      std::vector<std::uint32_t> pt_bytes;
      for (auto a : la.io.inputs)
        if (in_buffer(p.truth, a, {"plaintext", "state"})) pt_bytes.push_back(a);
      if (pt_bytes.empty()) {
        notes.push_back(fmt::format("{}:{}#{} has no plaintext input bits", p.truth.program, t->label, la.loop.id));
        continue;
      }
      const auto snap = build_snapshot(la.loop, p.trace);
      const auto m = run_trials(snap, la.io, 30, loop_seed(base_seed, la.loop), 64 * snap.span_length);
      const double n_out = static_cast<double>(m.output_bits()), sigma = std::sqrt(n_out / 4.0);
      const std::vector<bool> all(m.output_bits(), true);
      double worst = 0.0;
      for (std::size_t k = 0; k < 10; ++k) {
        const auto byte = pt_bytes[(k * pt_bytes.size()) / 10];
        const auto idx = static_cast<std::size_t>(
            std::lower_bound(m.input_bytes.begin(), m.input_bytes.end(), byte) - m.input_bytes.begin());
        const std::size_t bit = 8 * idx + (3 * k) % 8;
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t tr = 0; tr < m.n_trials; ++tr)
          if (m.baseline[tr] && m.flipped[bit][tr]) {
            sum += count_flipped(*m.baseline[tr], *m.flipped[bit][tr], all);
            ++n;
          }
        const double dev = n ? std::abs(sum / static_cast<double>(n) - n_out / 2.0) / sigma : 1e9;
        worst = std::max(worst, dev);
      }
      ++loops;
      ok = ok && worst <= 3.0;
      notes.push_back(fmt::format("{}:{}#{} max {:.2f} sigma", p.truth.program, t->label, la.loop.id, worst));
    }
  report(6, ok && loops > 0,
         fmt::format("mean flips of 10 plaintext bits within 3 sigma of n_out/2 over {} cipher loops: {}", loops,
                     fmt::join(notes, "; ")));
}

// 7 ---------------------------------------------------------------------------

void determinism(const corpus_run& first) {
  const auto again = run_corpus(corpus_dir() / "manifest.txt", analysis_config::paper_defaults(base_seed));
  const auto a = to_json(first).dump(2), b = to_json(again).dump(2);
  report(7, a == b, fmt::format("two corpus runs with seed {}: {} bytes vs {} bytes, {}", base_seed, a.size(), b.size(),
                                a == b ? "identical" : "DIFFERENT"));
}

// 8 ---------------------------------------------------------------------------

struct replay_view {
  const snapshot& snap;
  const overrides& o;
  std::uint8_t byte(std::uint32_t a) const {
    auto it = o.find(a);
    return it != o.end() ? it->second : snap.mem.byte(a).value();
  }
  std::uint32_t word(std::uint32_t a) const {
    return byte(a) | (byte(a + 1) << 8) | (byte(a + 2) << 16) | (static_cast<std::uint32_t>(byte(a + 3)) << 24);
  }
  std::uint16_t half(std::uint32_t a) const { return static_cast<std::uint16_t>(byte(a) | (byte(a + 1) << 8)); }
};

// Host reference for one loop: writes the expected bytes for the given input
// view into `expect` (address -> value).
using host_model = std::function<void(const replay_view&, std::map<std::uint32_t, std::uint8_t>&)>;

void put32(std::map<std::uint32_t, std::uint8_t>& m, std::uint32_t a, std::uint32_t v) {
  for (unsigned k = 0; k < 4; ++k) m[a + k] = static_cast<std::uint8_t>(v >> (8 * k));
}

host_model model_for(const corpus_program& prog, const std::string& label, const snapshot& snap) {
  const auto& name = prog.name;
  if (name == "xtea" || name == "tea") {
    const auto base = snap.regs.gpr[1], key = prog.sym("key");
    const bool x = name == "xtea";
    return [=](const replay_view& v, auto& e) {
      const std::array<std::uint32_t, 4> k = {v.word(key), v.word(key + 4), v.word(key + 8), v.word(key + 12)};
      const std::array<std::uint32_t, 2> in = {v.word(base), v.word(base + 4)};
      const auto out = x ? oracle::xtea_encrypt(in, k) : oracle::tea_encrypt(in, k);
      put32(e, base, out[0]);
      put32(e, base + 4, out[1]);
    };
  }
  if (name == "speck") {
    const auto base = snap.regs.gpr[1], rk = prog.sym("rk");
    return [=](const replay_view& v, auto& e) {
      std::vector<std::uint16_t> keys;
      for (std::uint32_t i = 0; i < 22; ++i) keys.push_back(v.half(rk + 2 * i));
      const auto out = oracle::speck_encrypt({v.half(base), v.half(base + 2)}, keys);
      for (unsigned i = 0; i < 2; ++i) {
        e[base + 2 * i] = static_cast<std::uint8_t>(out[i]);
        e[base + 2 * i + 1] = static_cast<std::uint8_t>(out[i] >> 8);
      }
    };
  }
  if (name == "aes") {
    const auto st = prog.sym("state"), rk = prog.sym("rk");
    return [=](const replay_view& v, auto& e) {
      oracle::aes_block in;
      std::array<std::uint8_t, 176> keys;
      for (std::uint32_t i = 0; i < 16; ++i) in[i] = v.byte(st + i);
      for (std::uint32_t i = 0; i < 176; ++i) keys[i] = v.byte(rk + i);
      const auto out = oracle::aes_rounds(in, keys);
      for (std::uint32_t i = 0; i < 16; ++i) e[st + i] = out[i];
    };
  }
  if (name == "rc4") {
    const auto s = prog.sym("S"), key = prog.sym("key"), msg = prog.sym("msg");
    const bool ksa = label == "ksa";
    return [=](const replay_view& v, auto& e) {
      std::array<std::uint8_t, 256> perm;
      for (std::uint32_t i = 0; i < 256; ++i) perm[i] = v.byte(s + i);
      if (ksa) {
        std::vector<std::uint8_t> k;
        for (std::uint32_t i = 0; i < 16; ++i) k.push_back(v.byte(key + i));
        perm = oracle::rc4_ksa_from(perm, k);
      } else {
        std::vector<std::uint8_t> m;
        for (std::uint32_t i = 0; i < 64; ++i) m.push_back(v.byte(msg + i));
        oracle::rc4_prga(perm, m);
        for (std::uint32_t i = 0; i < 64; ++i) e[msg + i] = m[i];
      }
      for (std::uint32_t i = 0; i < 256; ++i) e[s + i] = perm[i];
    };
  }
  if (name == "arx_hash") {
    const auto vv = prog.sym("v"), block = snap.regs.gpr[13];
    return [=](const replay_view& v, auto& e) {
      std::array<std::uint32_t, 16> st;
      std::uint32_t m[16];
      for (std::uint32_t i = 0; i < 16; ++i) st[i] = v.word(vv + 4 * i), m[i] = v.word(block + 4 * i);
      oracle::blake2s_rounds(st, m);
      for (std::uint32_t i = 0; i < 16; ++i) put32(e, vv + 4 * i, st[i]);
    };
  }
  return {};
}

std::size_t oracle_cases(const corpus_program& prog, const std::string& label, const loop_analysis& la,
                         const trace_file& trace, std::size_t cases) {
  const auto snap = build_snapshot(la.loop, trace);
  const auto model = model_for(prog, label, snap);
  if (!model) return 0;
  const std::vector<std::uint32_t> in(la.io.inputs.begin(), la.io.inputs.end());
  rng g(derive_seed(base_seed ^ 0x0dac1e5ull, la.loop.first));
  std::size_t good = 0;
  for (std::size_t c = 0; c < cases; ++c) {
    overrides o;
    for (auto a : in) o[a] = g.byte();
    const auto bit = g.below(in.size() * 8);
    o[in[bit / 8]] ^= static_cast<std::uint8_t>(1u << (bit % 8));
    const auto r = replay(snap, o, la.io.outputs, 64 * snap.span_length);
    std::map<std::uint32_t, std::uint8_t> expect;
    model(replay_view{snap, o}, expect);
    bool same = r.status == replay_status::completed;
    for (const auto& [a, val] : expect) same = same && r.final_state.mem.byte(a) == val;
    good += same;
  }
  return good;
}

void replay_oracle(const corpus_run& run) {
  constexpr std::size_t cases = 16;
  bool ok = true;
  std::vector<std::string> parts;
  for (const auto& p : run.programs) {
    const auto prog = load_corpus_program(p.truth.program);
    std::set<std::string> seen;
    for (const auto& la : p.report.loops) {
      const auto* t = p.truth.find_loop(la.head_starts);
      if (!t || t->expect != expectation::positive || !la.avalanche || la.io.inputs.empty()) continue;
      if (!seen.insert(t->label).second) continue; // first analyzed instance of each loop
      const auto good = oracle_cases(prog, t->label, la, p.trace, cases);
      ok = ok && good == cases;
      parts.push_back(fmt::format("{}:{}#{} {}/{}", p.truth.program, t->label, la.loop.id, good, cases));
    }
  }
  report(8, ok && parts.size() >= 7,
         fmt::format("flipped-input replays equal the host reference: {}", fmt::join(parts, ", ")));
}

} // namespace

int main() {
  try {
    const auto run = run_corpus(corpus_dir() / "manifest.txt", analysis_config::paper_defaults(base_seed));
    corpus_classification(run);
    aes_per_bit(run);
    matmul_divergence();
    fidelity(run);
    shapiro_reference();
    binomial_property(run);
    determinism(run);
    replay_oracle(run);
  } catch (const std::exception& e) {
    fmt::print("[FAIL] acceptance aborted: {}\n", e.what());
    return 1;
  }
  return failures ? 1 : 0;
}
