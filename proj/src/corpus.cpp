#include "avl/corpus.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

namespace avl {

namespace {

constexpr const char* class_names[] = {"cipher", "hash", "crc", "compression", "copy", "matmul", "other"};

std::vector<std::string> words(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::string trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return std::string(s.substr(a, b - a + 1));
}

std::uint32_t parse_u32(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used, 0);
    if (used != s.size() || v > 0xffffffffull) throw std::invalid_argument(s);
    return static_cast<std::uint32_t>(v);
  } catch (const std::exception&) {
    throw corpus_error(fmt::format("manifest line {}: bad number '{}'", line, s));
  }
}

expectation parse_expect(const std::string& s, const std::string& where) {
  if (s == "positive") return expectation::positive;
  if (s == "negative") return expectation::negative;
  throw corpus_error(fmt::format("{}: expected positive|negative, got '{}'", where, s));
}

} // namespace

std::string to_string(loop_class c) { return class_names[static_cast<int>(c)]; }

std::optional<loop_class> loop_class_from_string(std::string_view s) {
  for (int i = 0; i < 7; ++i)
    if (s == class_names[i]) return static_cast<loop_class>(i);
  return std::nullopt;
}

std::string to_string(expectation e) { return e == expectation::positive ? "positive" : "negative"; }

const loop_truth* truth_map::find_loop(const std::vector<std::uint32_t>& head_starts) const {
  for (const auto& l : loops)
    if (std::find(head_starts.begin(), head_starts.end(), l.head) != head_starts.end()) return &l;
  return nullptr;
}

const buffer_truth* truth_map::find_buffer(std::string_view name) const {
  for (const auto& b : buffers)
    if (b.name == name) return &b;
  return nullptr;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw corpus_error(fmt::format("cannot open '{}'", p.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

truth_map annotations_from_source(const std::string& program, const std::string& source_name, std::string_view text,
                                  const assembly& assembled) {
  truth_map t;
  t.program = program;
  t.source = source_name;
  auto symbol = [&](const std::string& label, std::size_t line) {
    auto it = assembled.symbols.find(label);
    if (it == assembled.symbols.end())
      throw corpus_error(fmt::format("{}:{}: unknown label '{}' in annotation", source_name, line, label));
    return it->second;
  };
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.rfind(";@", 0) != 0) continue;
    const auto w = words(std::string_view(line).substr(2));
    const auto where = fmt::format("{}:{}", source_name, line_no);
    if (w.size() == 4 && w[0] == "loop") {
      const auto cls = loop_class_from_string(w[2]);
      if (!cls) throw corpus_error(fmt::format("{}: unknown loop class '{}'", where, w[2]));
      t.loops.push_back({w[1], symbol(w[1], line_no), *cls, parse_expect(w[3], where)});
    } else if (w.size() == 4 && w[0] == "buffer") {
      t.buffers.push_back({w[1], symbol(w[2], line_no), parse_u32(w[3], line_no)});
    } else {
      throw corpus_error(fmt::format("{}: malformed annotation", where));
    }
  }
  const bool has_positive =
      std::any_of(t.loops.begin(), t.loops.end(), [](const loop_truth& l) { return l.expect == expectation::positive; });
  if (has_positive && t.buffers.empty())
    throw corpus_error(fmt::format("{}: expected-positive loops need a buffer map", source_name));
  return t;
}

std::string write_manifest(const std::vector<truth_map>& truths) {
  std::string out = "# avl corpus manifest 1\n# generated by `avl corpus manifest`; edit the ;@ annotations in the sources instead\n";
  for (const auto& t : truths) {
    out += fmt::format("\n[program {}]\nsource = {}\n", t.program, t.source);
    for (const auto& l : t.loops)
      out += fmt::format("loop = {} {:#010x} {} {}\n", l.label, l.head, to_string(l.cls), to_string(l.expect));
    for (const auto& b : t.buffers) out += fmt::format("buffer = {} {:#010x} {}\n", b.name, b.address, b.length);
  }
  return out;
}

std::vector<truth_map> parse_manifest(std::string_view text) {
  std::vector<truth_map> out;
  std::size_t line_no = 0, pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      const auto w = words(std::string_view(line).substr(1, line.size() - 2));
      if (line.back() != ']' || w.size() != 2 || w[0] != "program")
        throw corpus_error(fmt::format("manifest line {}: bad section header", line_no));
      out.push_back({});
      out.back().program = w[1];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos || out.empty())
      throw corpus_error(fmt::format("manifest line {}: expected key = value inside a [program] section", line_no));
    const auto key = trim(std::string_view(line).substr(0, eq));
    const auto w = words(std::string_view(line).substr(eq + 1));
    auto& t = out.back();
    const auto where = fmt::format("manifest line {}", line_no);
    if (key == "source" && w.size() == 1) {
      t.source = w[0];
    } else if (key == "loop" && w.size() == 4) {
      const auto cls = loop_class_from_string(w[2]);
      if (!cls) throw corpus_error(fmt::format("{}: unknown loop class '{}'", where, w[2]));
      t.loops.push_back({w[0], parse_u32(w[1], line_no), *cls, parse_expect(w[3], where)});
    } else if (key == "buffer" && w.size() == 3) {
      t.buffers.push_back({w[0], parse_u32(w[1], line_no), parse_u32(w[2], line_no)});
    } else {
      throw corpus_error(fmt::format("{}: unknown or malformed key '{}'", where, key));
    }
  }
  for (const auto& t : out)
    if (t.source.empty()) throw corpus_error(fmt::format("manifest: program '{}' has no source", t.program));
  return out;
}

std::vector<truth_map> scan_corpus(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".asm") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<truth_map> out;
  for (const auto& f : files) {
    const auto text = read_file(f);
    out.push_back(annotations_from_source(f.stem().string(), f.filename().string(), text, assemble_program(text)));
  }
  return out;
}

std::vector<truth_map> load_truth(const std::filesystem::path& manifest) {
  const auto listed = parse_manifest(read_file(manifest));
  const auto dir = manifest.parent_path();
  for (const auto& t : listed) {
    const auto path = dir / t.source;
    if (!std::filesystem::exists(path))
      throw corpus_error(fmt::format("manifest names program '{}' but '{}' does not exist", t.program, path.string()));
    const auto text = read_file(path);
    const auto fresh = annotations_from_source(t.program, t.source, text, assemble_program(text));
    if (!(fresh == t))
      throw corpus_error(fmt::format("manifest entry for '{}' is stale (addresses or annotations drifted); "
                                     "regenerate with `avl corpus manifest`",
                                     t.program));
  }
  return listed;
}

loop_outcome score_loop(const truth_map& truth, const loop_analysis& la) {
  loop_outcome o;
  o.program = truth.program;
  o.loop_id = la.loop.id;
  o.verdict = la.positive();
  o.skipped_reason = la.skipped_reason;
  if (const auto* t = truth.find_loop(la.head_starts)) {
    o.label = t->label;
    o.cls = t->cls;
    o.expect = t->expect;
  }
  const bool found = o.verdict || (la.skipped_reason && *la.skipped_reason == "contains-positive-loop");
  o.correct = o.expect == expectation::positive ? found : !o.verdict;
  return o;
}

void tally(corpus_summary& s, const loop_outcome& o) {
  if (o.label.empty()) ++s.unlisted;
  if (o.expect == expectation::positive)
    (o.correct ? s.true_positives : s.false_negatives)++;
  else
    (o.correct ? s.true_negatives : s.false_positives)++;
  s.outcomes.push_back(o);
}

nlohmann::json to_json(const corpus_summary& s) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& o : s.outcomes)
    rows.push_back({{"program", o.program},
                    {"loop_id", o.loop_id},
                    {"label", o.label.empty() ? nlohmann::json(nullptr) : nlohmann::json(o.label)},
                    {"class", to_string(o.cls)},
                    {"expected", to_string(o.expect)},
                    {"verdict", o.verdict},
                    {"skipped_reason", o.skipped_reason ? nlohmann::json(*o.skipped_reason) : nlohmann::json(nullptr)},
                    {"correct", o.correct}});
  return {{"true_positives", s.true_positives},
          {"true_negatives", s.true_negatives},
          {"false_positives", s.false_positives},
          {"false_negatives", s.false_negatives},
          {"unlisted_loops", s.unlisted},
          {"loops", rows}};
}

corpus_run run_corpus(const std::filesystem::path& manifest, const analysis_config& config, std::uint64_t max_steps) {
  const auto t0 = std::chrono::steady_clock::now();
  corpus_run out;
  const auto dir = manifest.parent_path();
  for (auto& truth : load_truth(manifest)) {
    auto run = run_and_trace(assemble(read_file(dir / truth.source)), {}, max_steps);
    if (run.truncated) throw corpus_error(fmt::format("{}: step budget exhausted while tracing", truth.program));
    auto rep = analyze(run.trace, config);
    for (const auto& la : rep.loops) tally(out.summary, score_loop(truth, la));
    out.programs.push_back({std::move(truth), std::move(run.trace), std::move(rep)});
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

nlohmann::json to_json(const corpus_run& r) {
  nlohmann::json programs = nlohmann::json::array();
  for (const auto& p : r.programs)
    programs.push_back({{"program", p.truth.program}, {"records", p.trace.records.size()}, {"report", to_json(p.report)}});
  const auto config = r.programs.empty() ? nlohmann::json(nullptr) : to_json(r.programs.front().report.config);
  return {{"tool_version", tool_version}, {"config", config}, {"summary", to_json(r.summary)}, {"programs", programs}};
}

} // namespace avl
