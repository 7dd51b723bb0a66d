// avl: trace, detect and check loops of micro32 programs for the avalanche effect.
#include "avl/assembler.hpp"
#include "avl/corpus.hpp"
#include "avl/machine.hpp"
#include "avl/pipeline.hpp"
#include "avl/stats.hpp"
#include "avl/taint.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace avl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t env_seed() {
  if (const char* s = std::getenv("AVL_SEED")) {
    try {
      return std::stoull(s, nullptr, 0);
    } catch (const std::exception&) {
      throw usage_error(fmt::format("AVL_SEED is not a number: '{}'", s));
    }
  }
  return 0;
}

bool has_ext(const std::string& p, const char* ext) { return fs::path(p).extension() == ext; }

program_image load_program(const std::string& path) {
  if (!fs::exists(path)) throw usage_error(fmt::format("no such file: {}", path));
  if (has_ext(path, ".asm")) return assemble(read_file(path));
  std::ifstream in(path, std::ios::binary);
  return read_image(in);
}

trace_file load_trace(const std::string& path, std::uint64_t max_steps) {
  if (!fs::exists(path)) throw usage_error(fmt::format("no such file: {}", path));
  if (has_ext(path, ".asm") || has_ext(path, ".avim")) return run_and_trace(load_program(path), {}, max_steps).trace;
  std::ifstream in(path, std::ios::binary);
  const int c = in.peek();
  if (c == '#') return read_trace_text(in);
  return read_trace(in);
}

std::map<std::uint32_t, std::uint8_t> parse_overrides(const std::vector<std::string>& sets) {
  std::map<std::uint32_t, std::uint8_t> ov;
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw usage_error(fmt::format("--set expects ADDR=HEXBYTES, got '{}'", s));
    const auto addr = static_cast<std::uint32_t>(std::stoul(s.substr(0, eq), nullptr, 0));
    const auto hex = s.substr(eq + 1);
    if (hex.size() % 2) throw usage_error(fmt::format("odd number of hex digits in '{}'", s));
    for (std::size_t i = 0; i < hex.size(); i += 2)
      ov[addr + static_cast<std::uint32_t>(i / 2)] = static_cast<std::uint8_t>(std::stoul(hex.substr(i, 2), nullptr, 16));
  }
  return ov;
}

// NAME=ADDR:LEN
taint_source parse_range(const std::string& s) {
  const auto eq = s.find('=');
  const auto colon = s.find(':', eq == std::string::npos ? 0 : eq);
  if (colon == std::string::npos) throw usage_error(fmt::format("expected [NAME=]ADDR:LEN, got '{}'", s));
  taint_source r;
  r.name = eq == std::string::npos ? "" : s.substr(0, eq);
  const auto from = eq == std::string::npos ? 0 : eq + 1;
  r.address = static_cast<std::uint32_t>(std::stoul(s.substr(from, colon - from), nullptr, 0));
  r.length = static_cast<std::uint32_t>(std::stoul(s.substr(colon + 1), nullptr, 0));
  return r;
}

void emit(const json& j, const std::string& out) {
  const auto text = j.dump(2) + "\n";
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    std::ofstream f(out, std::ios::binary);
    if (!f) throw usage_error(fmt::format("cannot write {}", out));
    f << text;
  }
}

struct config_flags {
  analysis_config cfg;
  bool paper = false;
  std::string pointer = "strict";
  std::vector<std::size_t> iqr;

  void attach(CLI::App* app) {
    app->add_option("--trials", cfg.n_trials, "Randomized trials per loop")->check(CLI::Range(4, 5000));
    app->add_option("--theta", cfg.theta, "Avalanche input bits needed for a positive verdict")->check(CLI::PositiveNumber);
    app->add_option("--p-threshold", cfg.p_threshold, "Normality p-value threshold")->check(CLI::Range(0.0, 1.0));
    app->add_option("--seed", cfg.seed, "Base seed (default: $AVL_SEED or 0)");
    app->add_option("--pointer-filter", pointer, "Pointer heuristic: strict or paper")->check(CLI::IsMember({"strict", "paper"}));
    app->add_option("--hash-threshold", cfg.hash_threshold, "Max mean and/or per iteration before a loop counts as a hash");
    app->add_option("--library", cfg.known_library_globs, "Section-name glob of known library code (repeatable; default lib*)");
    app->add_option("--max-step-multiplier", cfg.max_step_multiplier, "Replay budget as a multiple of the span length");
    app->add_option("--min-retained", cfg.min_retained, "Trials a bit needs after discarding failed replays");
    app->add_option("--iqr", iqr, "Fixed flip-count band LOW HIGH instead of quartiles")->expected(2);
    app->add_flag("--paper-defaults", paper, "Pin every parameter to the published values");
  }

  analysis_config resolve() const {
    analysis_config c = cfg;
    if (paper) {
      c = analysis_config::paper_defaults(cfg.seed);
      c.known_library_globs = cfg.known_library_globs;
      return c;
    }
    c.pointers = *pointer_filter_from_string(pointer);
    if (iqr.size() == 2) c.iqr = std::pair{iqr[0], iqr[1]};
    return c;
  }
};

void summary_line(const analysis_report& r) {
  for (const auto& la : r.loops) {
    std::cerr << fmt::format("loop {:3} head {:#010x} span {}..{} iters {:4}  ", la.loop.id, la.head_address,
                             la.loop.first, la.loop.last, la.loop.iterations());
    if (la.skipped_reason)
      std::cerr << "skipped: " << *la.skipped_reason << "\n";
    else
      std::cerr << fmt::format("in {:5} out {:5} bits {:5} andor {:.2f} -> {}\n", la.io.inputs.size() * 8,
                               la.io.outputs.size() * 8, la.avalanche->avalanche_bit_count, la.hash.and_or_per_iteration,
                               la.positive() ? "POSITIVE" : "negative");
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Avalanche-effect detector for micro32 execution traces"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string out;
  bool verbose = false;
  std::uint64_t max_steps = 50'000'000;
  app.add_option("--out,-o", out, "Write the result here instead of stdout");
  app.add_flag("--verbose,-v", verbose, "Human-readable summary on stderr");
  app.add_option("--max-steps", max_steps, "Step budget when tracing a program");

  // assemble / disasm
  auto* c_asm = app.add_subcommand("assemble", "Assemble a source file into an image");
  std::string asm_in;
  c_asm->add_option("source", asm_in)->required();
  auto* c_dis = app.add_subcommand("disasm", "Print an image (or source) as assembly");
  std::string dis_in;
  c_dis->add_option("image", dis_in)->required();

  // trace
  auto* c_trace = app.add_subcommand("trace", "Run a program and record its trace");
  std::string trace_in;
  std::vector<std::string> sets;
  bool text = false;
  c_trace->add_option("program", trace_in, ".asm source or image")->required();
  c_trace->add_option("--set", sets, "Byte overrides ADDR=HEXBYTES (repeatable)");
  c_trace->add_flag("--text", text, "Write the text trace format");

  // loops
  auto* c_loops = app.add_subcommand("loops", "List detected loops");
  std::string loops_in;
  c_loops->add_option("trace", loops_in, "trace, .asm or image")->required();

  // analyze
  auto* c_an = app.add_subcommand("analyze", "Full detection pipeline");
  std::string an_in;
  config_flags an_cfg;
  c_an->add_option("trace", an_in, "trace, .asm or image")->required();
  an_cfg.attach(c_an);

  // fidelity
  auto* c_fid = app.add_subcommand("fidelity", "Compare override-free replays with the trace");
  std::string fid_in;
  double randomize = 0.0;
  config_flags fid_cfg;
  c_fid->add_option("trace", fid_in, "trace, .asm or image")->required();
  c_fid->add_option("--randomize", randomize, "Randomize this share of snapshot memory and re-run the avalanche check")
      ->check(CLI::Range(0.0, 1.0));
  fid_cfg.attach(c_fid);

  // ripple
  auto* c_rip = app.add_subcommand("ripple", "Byte-level taint ripple check next to the avalanche verdicts");
  std::string rip_in;
  std::vector<std::string> rip_sources;
  std::string rip_output;
  config_flags rip_cfg;
  c_rip->add_option("trace", rip_in, "trace, .asm or image")->required();
  c_rip->add_option("--source", rip_sources, "Taint source NAME=ADDR:LEN (repeatable)")->required();
  c_rip->add_option("--output", rip_output, "Candidate output ADDR:LEN")->required();
  rip_cfg.attach(c_rip);

  // corpus
  auto* c_corpus = app.add_subcommand("corpus", "Ground-truth corpus");
  c_corpus->require_subcommand(1);
  c_corpus->fallthrough();
  std::string manifest = "corpus/manifest.txt";
  auto* c_all = c_corpus->add_subcommand("run-all", "Analyze every corpus program and score it");
  config_flags all_cfg;
  c_all->add_option("--manifest", manifest, "Manifest path");
  all_cfg.attach(c_all);
  auto* c_man = c_corpus->add_subcommand("manifest", "Regenerate the manifest from the sources");
  std::string corpus_dir = "corpus";
  bool check_only = false;
  c_man->add_option("--dir", corpus_dir, "Corpus directory");
  c_man->add_flag("--check", check_only, "Only verify the shipped manifest");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const std::uint64_t default_seed = env_seed();
    for (auto* f : {&an_cfg, &fid_cfg, &rip_cfg, &all_cfg})
      if (f->cfg.seed == 0) f->cfg.seed = default_seed;

    if (*c_asm) {
      const auto img = assemble(read_file(asm_in));
      const auto path = out.empty() ? fs::path(asm_in).replace_extension(".avim").string() : out;
      std::ofstream f(path, std::ios::binary);
      write_image(img, f);
      if (verbose) std::cerr << fmt::format("wrote {}\n", path);
    } else if (*c_dis) {
      const auto s = disassemble_image(load_program(dis_in));
      if (out.empty()) std::cout << s; else std::ofstream(out) << s;
    } else if (*c_trace) {
      const auto run = run_and_trace(load_program(trace_in), parse_overrides(sets), max_steps);
      const auto path = out.empty() ? fs::path(trace_in).replace_extension(text ? ".avtr.txt" : ".avtr").string() : out;
      std::ofstream f(path, std::ios::binary);
      if (text)
        write_trace_text(run.trace, f);
      else
        write_trace(run.trace, f);
      if (verbose) std::cerr << fmt::format("{} records -> {}\n", run.trace.records.size(), path);
      if (run.truncated) {
        std::cerr << fmt::format("step budget of {} exhausted; trace is partial\n", max_steps);
        return 3;
      }
    } else if (*c_loops) {
      const auto t = load_trace(loops_in, max_steps);
      const auto part = partition_blocks(t);
      const auto det = detect_loops(part);
      json loops = json::array();
      for (const auto& l : det.loops)
        loops.push_back({{"id", l.id},
                         {"head_address", part.blocks[l.head].end_address},
                         {"head_starts", part.blocks[l.head].start_addresses},
                         {"first", l.first},
                         {"last", l.last},
                         {"iterations", l.iterations()},
                         {"frame_depth", l.frame_depth}});
      emit({{"tool_version", tool_version}, {"loops", loops}, {"diagnostics", det.diagnostics}}, out);
    } else if (*c_an) {
      const auto t = load_trace(an_in, max_steps);
      const auto rep = analyze(t, an_cfg.resolve());
      if (verbose) summary_line(rep);
      emit(to_json(rep), out);
    } else if (*c_fid) {
      const auto t = load_trace(fid_in, max_steps);
      const auto entries = fidelity_all(t);
      auto j = to_json(entries);
      bool all_ok = true;
      for (const auto& e : entries) all_ok = all_ok && e.report.ok();
      if (randomize > 0.0) {
        const auto cfg = fid_cfg.resolve();
        json verdicts = json::array();
        for (const auto& e : entries) {
          const auto io = identify_io(e.loop, t, cfg.pointers);
          auto snap = build_snapshot(e.loop, t);
          const bool clean = analyze_loop(e.loop, t, snap, io, cfg).verdict;
          rng g(derive_seed(cfg.seed ^ 0x5a5a5a5aull, e.loop.first));
          randomize_memory(snap, randomize, g);
          const auto noisy = analyze_loop(e.loop, t, snap, io, cfg);
          verdicts.push_back({{"id", e.loop.id},
                              {"verdict", clean},
                              {"randomized_verdict", noisy.verdict},
                              {"randomized_baseline_failures", noisy.baseline_failures}});
        }
        j["randomized_fraction"] = randomize;
        j["randomized"] = verdicts;
      }
      if (verbose)
        for (const auto& e : entries)
          std::cerr << fmt::format("loop {:3} {} {}\n", e.loop.id, e.report.ok() ? "agree" : "MISMATCH",
                                   fmt::join(e.report.mismatches, "; "));
      emit(j, out);
      // Randomized snapshots are not expected to agree with the trace.
      if (!all_ok) return 2;
    } else if (*c_rip) {
      const auto t = load_trace(rip_in, max_steps);
      std::vector<taint_source> sources;
      for (const auto& s : rip_sources) sources.push_back(parse_range(s));
      const auto target = parse_range(rip_output);
      auto row = [&](const taint_state& st) {
        json r = json::object();
        for (std::size_t i = 0; i < sources.size(); ++i) {
          std::size_t covered = 0;
          for (std::uint32_t k = 0; k < target.length; ++k) covered += (st.at(target.address + k) >> i) & 1u;
          r[sources[i].name.empty() ? fmt::format("source{}", i) : sources[i].name] = {
              {"ripple", ripple_verdict(st, target.address, target.length, i)}, {"tainted_bytes", covered}};
        }
        return r;
      };
      const auto whole = propagate(t, 0, t.records.empty() ? 0 : t.records.size() - 1, sources);
      const auto rep = analyze(t, rip_cfg.resolve());
      json loops = json::array();
      for (const auto& la : rep.loops)
        loops.push_back({{"id", la.loop.id},
                         {"span", {{"first", la.loop.first}, {"last", la.loop.last}}},
                         {"ripple", row(propagate(t, la.loop.first, la.loop.last, sources))},
                         {"avalanche_verdict", la.positive()},
                         {"skipped_reason", la.skipped_reason ? json(*la.skipped_reason) : json(nullptr)}});
      bool any_positive = false;
      for (const auto& la : rep.loops) any_positive = any_positive || la.positive();
      emit({{"tool_version", tool_version},
            {"config", to_json(rep.config)},
            {"output", {{"address", target.address}, {"length", target.length}}},
            {"whole_trace", row(whole)},
            {"any_avalanche_positive", any_positive},
            {"loops", loops}},
           out);
    } else if (*c_all) {
      const auto cfg = all_cfg.resolve();
      const auto run = run_corpus(manifest, cfg, max_steps);
      if (verbose) {
        for (const auto& p : run.programs) {
          std::cerr << fmt::format("== {} ({} records)\n", p.truth.program, p.trace.records.size());
          summary_line(p.report);
        }
        const auto& sum = run.summary;
        std::cerr << fmt::format("TP {} TN {} FP {} FN {} unlisted {} in {:.1f}s\n", sum.true_positives,
                                 sum.true_negatives, sum.false_positives, sum.false_negatives, sum.unlisted,
                                 run.seconds);
      }
      emit(to_json(run), out);
    } else if (*c_man) {
      const auto fresh = write_manifest(scan_corpus(corpus_dir));
      const auto path = fs::path(corpus_dir) / "manifest.txt";
      if (check_only) {
        load_truth(path);
        if (!fs::exists(path) || read_file(path) != fresh) {
          std::cerr << "manifest is out of date\n";
          return 1;
        }
        if (verbose) std::cerr << "manifest is current\n";
      } else {
        std::ofstream(path, std::ios::binary) << fresh;
        if (verbose) std::cerr << fmt::format("wrote {}\n", path.string());
      }
    }
  } catch (const usage_error& e) {
    std::cerr << "avl: " << e.what() << "\n";
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "avl: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
