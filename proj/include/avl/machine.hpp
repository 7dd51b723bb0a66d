#pragma once

#include "avl/image.hpp"
#include "avl/isa.hpp"
#include "avl/trace.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace avl {

/// Byte-addressable memory made of disjoint mapped regions. Mapped bytes
/// that were never written read as zero; accesses outside every region fail.
class memory {
public:
  struct region {
    std::string name;
    std::uint32_t base = 0;
    std::vector<std::uint8_t> bytes;
    bool writable = false;
    bool executable = false;

    bool contains(std::uint32_t addr, std::uint32_t size) const {
      return addr >= base && static_cast<std::uint64_t>(addr - base) + size <= bytes.size();
    }
  };

  memory() = default;
  explicit memory(const program_image& image);

  void map(region r);

  std::optional<std::uint32_t> read(std::uint32_t addr, unsigned size) const;
  /// Fails for unmapped or read-only targets.
  bool write(std::uint32_t addr, unsigned size, std::uint32_t value);

  std::optional<std::uint8_t> byte(std::uint32_t addr) const;
  /// Unconditional store to any mapped byte (ignores write protection).
  bool poke(std::uint32_t addr, std::uint8_t value);

  bool is_mapped(std::uint32_t addr) const { return find(addr, 1) != nullptr; }

  /// Instruction fetch; only executable regions qualify.
  std::optional<encoded_instruction> fetch(std::uint32_t addr) const;

  const std::vector<region>& regions() const { return regions_; }
  std::vector<region>& regions() { return regions_; }

  friend bool operator==(const memory& a, const memory& b);

private:
  const region* find(std::uint32_t addr, std::uint32_t size) const;
  region* find(std::uint32_t addr, std::uint32_t size);

  std::vector<region> regions_;
  mutable std::size_t last_ = 0;
};

enum class trap_kind { none, unmapped_fetch, decode_failure, unmapped_access, write_protect };

std::string to_string(trap_kind k);

struct machine_state {
  register_file regs;
  memory mem;
  bool halted = false;
  trap_kind trap = trap_kind::none;
  std::uint32_t trap_address = 0;
};

/// Initial state for an image: memory loaded from sections, pc at the entry
/// point, stack pointer at the top of the "stack" section when present.
machine_state load(const program_image& image);

enum class step_status { ok, halted, trap };

/// Executes one instruction. When `record` is non-null it receives the
/// pre-execution register file and every memory access. A trap halts the
/// machine and is recorded in the state.
step_status step(machine_state& state, trace_record* record = nullptr);

struct run_result {
  trace_file trace;
  machine_state final_state;
  bool truncated = false; // step budget exhausted
};

/// Loads `image` with `overrides` applied and runs until halt, trap, or
/// `max_steps` instructions. The trace's section dump is the image as
/// loaded (overrides included).
run_result run_and_trace(const program_image& image,
                         const std::map<std::uint32_t, std::uint8_t>& overrides,
                         std::uint64_t max_steps);

} // namespace avl
