#pragma once

#include "avl/assembler.hpp"
#include "avl/corpus.hpp"
#include "avl/machine.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace avl::testing {

inline std::filesystem::path corpus_dir() { return AVL_CORPUS_DIR; }

struct corpus_program {
  std::string name;
  assembly assembled;

  std::uint32_t sym(const std::string& label) const {
    auto it = assembled.symbols.find(label);
    if (it == assembled.symbols.end()) throw std::out_of_range("no symbol " + label + " in " + name);
    return it->second;
  }
};

inline corpus_program load_corpus_program(const std::string& name) {
  return {name, assemble_program(read_file(corpus_dir() / (name + ".asm")))};
}

using overrides = std::map<std::uint32_t, std::uint8_t>;

inline void put_bytes(overrides& o, std::uint32_t addr, const std::vector<std::uint8_t>& bytes) {
  for (std::size_t i = 0; i < bytes.size(); ++i) o[addr + static_cast<std::uint32_t>(i)] = bytes[i];
}

inline void put_words(overrides& o, std::uint32_t addr, const std::vector<std::uint32_t>& words) {
  for (std::size_t i = 0; i < words.size(); ++i)
    for (unsigned k = 0; k < 4; ++k) o[addr + static_cast<std::uint32_t>(4 * i + k)] = static_cast<std::uint8_t>(words[i] >> (8 * k));
}

/// Runs a corpus program to completion; throws unless it halts cleanly.
inline run_result run_corpus(const corpus_program& p, const overrides& o = {}, std::uint64_t max_steps = 5'000'000) {
  auto r = run_and_trace(p.assembled.image, o, max_steps);
  if (r.truncated || r.final_state.trap != trap_kind::none || !r.final_state.halted)
    throw std::runtime_error(p.name + " did not halt cleanly");
  return r;
}

inline std::vector<std::uint8_t> read_bytes(const machine_state& s, std::uint32_t addr, std::uint32_t n) {
  std::vector<std::uint8_t> out;
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(s.mem.byte(addr + i).value());
  return out;
}

inline std::uint32_t read_word(const machine_state& s, std::uint32_t addr) { return s.mem.read(addr, 4).value(); }

inline std::vector<std::uint8_t> random_bytes(std::mt19937_64& rng, std::size_t n) {
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(rng());
  return out;
}

} // namespace avl::testing
