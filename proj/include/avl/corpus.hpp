#pragma once

#include "avl/assembler.hpp"
#include "avl/machine.hpp"
#include "avl/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace avl {

enum class loop_class { cipher, hash, crc, compression, copy, matmul, other };
std::string to_string(loop_class c);
std::optional<loop_class> loop_class_from_string(std::string_view s);

enum class expectation { positive, negative };
std::string to_string(expectation e);

struct loop_truth {
  std::string label;      // asm label at the start of the head block
  std::uint32_t head = 0; // its address
  loop_class cls = loop_class::other;
  expectation expect = expectation::negative;
  friend bool operator==(const loop_truth&, const loop_truth&) = default;
};

struct buffer_truth {
  std::string name; // plaintext, key, ciphertext, table, ...
  std::uint32_t address = 0;
  std::uint32_t length = 0;
  friend bool operator==(const buffer_truth&, const buffer_truth&) = default;
};

struct truth_map {
  std::string program;
  std::string source; // file name relative to the manifest
  std::vector<loop_truth> loops;
  std::vector<buffer_truth> buffers;

  const loop_truth* find_loop(const std::vector<std::uint32_t>& head_starts) const;
  const buffer_truth* find_buffer(std::string_view name) const;
  friend bool operator==(const truth_map&, const truth_map&) = default;
};

class corpus_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Truth annotations embedded in a corpus source as comments:
///   ;@loop <label> <class> <positive|negative>
///   ;@buffer <name> <label> <length>
/// Labels are resolved against the assembled symbol table.
truth_map annotations_from_source(const std::string& program, const std::string& source_name, std::string_view text,
                                  const assembly& assembled);

std::string write_manifest(const std::vector<truth_map>& truths);
std::vector<truth_map> parse_manifest(std::string_view text);

/// Regenerates truth maps for every `*.asm` in `dir`, sorted by name.
std::vector<truth_map> scan_corpus(const std::filesystem::path& dir);

/// Parses the manifest, re-assembles every listed program and fails on any
/// difference (missing program, moved head or buffer).
std::vector<truth_map> load_truth(const std::filesystem::path& manifest);

std::string read_file(const std::filesystem::path& p);

struct loop_outcome {
  std::string program;
  std::uint32_t loop_id = 0;
  std::string label; // empty when no truth entry matched
  loop_class cls = loop_class::other;
  expectation expect = expectation::negative;
  bool verdict = false;
  std::optional<std::string> skipped_reason;
  bool correct = false;
};

struct corpus_summary {
  std::vector<loop_outcome> outcomes;
  std::size_t true_positives = 0, true_negatives = 0, false_positives = 0, false_negatives = 0;
  std::size_t unlisted = 0; // loops without a truth entry
};

/// A positive loop counts as found when its verdict is positive or when it
/// was skipped because it contains a positive loop.
loop_outcome score_loop(const truth_map& truth, const loop_analysis& la);
void tally(corpus_summary& s, const loop_outcome& o);

nlohmann::json to_json(const corpus_summary& s);

struct program_run {
  truth_map truth;
  trace_file trace;
  analysis_report report;
};

struct corpus_run {
  std::vector<program_run> programs;
  corpus_summary summary;
  double seconds = 0.0; // wall time of tracing plus analysis
};

/// Traces every program in the manifest (after load_truth's drift check),
/// analyzes it with `config` and scores each loop.
corpus_run run_corpus(const std::filesystem::path& manifest, const analysis_config& config,
                      std::uint64_t max_steps = 50'000'000);

/// Summary plus the per-program reports; the wall time is left out so that
/// equal seeds give byte-identical output.
nlohmann::json to_json(const corpus_run& r);

} // namespace avl
