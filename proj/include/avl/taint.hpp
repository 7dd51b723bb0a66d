#pragma once

#include "avl/isa.hpp"
#include "avl/trace.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace avl {

/// Bit i set = carries the label of source i. At most 64 sources.
using label_set = std::uint64_t;

inline constexpr std::size_t max_taint_sources = 64;

struct taint_source {
  std::string name;
  std::uint32_t address = 0;
  std::uint32_t length = 0;
};

struct taint_state {
  std::unordered_map<std::uint32_t, label_set> memory;
  std::array<std::array<label_set, 4>, register_count> registers{};
  std::vector<taint_source> sources;

  label_set at(std::uint32_t address) const {
    auto it = memory.find(address);
    return it == memory.end() ? 0 : it->second;
  }
};

/// Byte-granular union propagation over records [first, last]. Moves,
/// loads and stores keep byte positions; bitwise ops merge per byte; the
/// other arithmetic spreads the union of all operand bytes over the result.
/// Address operands and flags carry no taint.
taint_state propagate(const trace_file& trace, std::size_t first, std::size_t last,
                      const std::vector<taint_source>& sources);

/// True when every byte of [address, address + length) carries `label`.
bool ripple_verdict(const taint_state& state, std::uint32_t address, std::uint32_t length, std::size_t label);

} // namespace avl
