#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace avl {

/// Width of every encoded instruction in bytes.
inline constexpr std::uint32_t instruction_size = 8;

/// Register conventionally used as the stack pointer by call/ret.
inline constexpr unsigned stack_register = 15;

inline constexpr unsigned register_count = 16;

namespace flag {
inline constexpr std::uint8_t zero = 1u << 0;
inline constexpr std::uint8_t carry = 1u << 1;
inline constexpr std::uint8_t sign = 1u << 2;
} // namespace flag

enum class opcode : std::uint8_t {
  halt = 0x00,
  li = 0x01,
  mov = 0x02,
  add = 0x10,
  sub = 0x11,
  mul = 0x12,
  xor_ = 0x13,
  and_ = 0x14,
  or_ = 0x15,
  shl = 0x16,
  shr = 0x17,
  rol = 0x18,
  cmp = 0x19,
  ld1 = 0x20,
  ld2 = 0x21,
  ld4 = 0x22,
  st1 = 0x28,
  st2 = 0x29,
  st4 = 0x2a,
  jmp = 0x30,
  jz = 0x31,
  jnz = 0x32,
  jc = 0x33,
  jnc = 0x34,
  js = 0x35,
  jns = 0x36,
  call = 0x38,
  ret = 0x39,
};

/// Operand layout of an opcode; decides which instruction fields are meaningful.
enum class operand_shape {
  none,        // halt, ret
  reg_imm,     // li rd, imm
  reg_reg,     // mov rd, rs
  alu,         // op rd, rs, (rt | imm)
  compare,     // cmp rs, (rt | imm)
  load,        // ldN rd, [rs + disp]
  store,       // stN [rs + disp], rt
  target,      // jcc imm
  jump_target, // jmp/call (imm | rs)
};

/// Decoded instruction. Unused fields are always zero so that equality is
/// structural and encode/decode are exact inverses.
struct instruction {
  opcode op = opcode::halt;
  std::uint8_t rd = 0;
  std::uint8_t rs = 0;
  std::uint8_t rt = 0;
  bool immediate = false; // second source / jump target taken from imm
  std::uint32_t imm = 0;

  friend bool operator==(const instruction&, const instruction&) = default;
};

using encoded_instruction = std::array<std::uint8_t, instruction_size>;

operand_shape shape_of(opcode op);
std::string_view mnemonic(opcode op);
std::optional<opcode> opcode_from_mnemonic(std::string_view name);

/// Memory access width of a load/store opcode, 0 for everything else.
unsigned access_width(opcode op);

bool is_branch(opcode op);      // any control transfer, including call/ret
bool is_conditional(opcode op); // jz .. jns

encoded_instruction encode(const instruction& insn);

/// Strict decode: unknown opcodes, out-of-shape fields and reserved bits are
/// rejected.
std::optional<instruction> decode(const encoded_instruction& bytes);

/// Canonical assembly text; assemble(disassemble(i)) == i.
std::string disassemble(const instruction& insn);

/// Register written by the instruction (loads, moves, ALU), if any.
std::optional<unsigned> destination_register(const instruction& insn);

} // namespace avl
