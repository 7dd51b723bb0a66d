#pragma once

#include "avl/isa.hpp"

#include <cstdint>
#include <random>

namespace avl::testing {

// Fixed seed so property failures reproduce.
inline std::mt19937_64 make_rng(std::uint64_t salt = 0) { return std::mt19937_64(0x5eed0000ull + salt); }

inline std::uint32_t pick(std::mt19937_64& rng, std::uint32_t n) {
  return static_cast<std::uint32_t>(rng() % n);
}

/// A random instruction that is valid for its shape (unused fields zero).
inline instruction random_instruction(std::mt19937_64& rng) {
  static constexpr opcode ops[] = {
      opcode::halt, opcode::li,  opcode::mov, opcode::add, opcode::sub, opcode::mul, opcode::xor_,
      opcode::and_, opcode::or_, opcode::shl, opcode::shr, opcode::rol, opcode::cmp, opcode::ld1,
      opcode::ld2,  opcode::ld4, opcode::st1, opcode::st2, opcode::st4, opcode::jmp, opcode::jz,
      opcode::jnz,  opcode::jc,  opcode::jnc, opcode::js,  opcode::jns, opcode::call, opcode::ret};
  instruction in;
  in.op = ops[pick(rng, std::size(ops))];
  auto r = [&] { return static_cast<std::uint8_t>(pick(rng, 16)); };
  auto imm = [&] { return static_cast<std::uint32_t>(rng()); };
  switch (shape_of(in.op)) {
  case operand_shape::none: break;
  case operand_shape::reg_imm: in.rd = r(); in.imm = imm(); break;
  case operand_shape::reg_reg: in.rd = r(); in.rs = r(); break;
  case operand_shape::alu:
  case operand_shape::compare:
    if (shape_of(in.op) == operand_shape::alu) in.rd = r();
    in.rs = r();
    if (rng() & 1) { in.immediate = true; in.imm = imm(); } else { in.rt = r(); }
    break;
  case operand_shape::load: in.rd = r(); in.rs = r(); in.imm = imm(); break;
  case operand_shape::store: in.rs = r(); in.rt = r(); in.imm = imm(); break;
  case operand_shape::target: in.imm = imm(); break;
  case operand_shape::jump_target:
    if (rng() & 1) { in.immediate = true; in.imm = imm(); } else { in.rs = r(); }
    break;
  }
  return in;
}

} // namespace avl::testing
