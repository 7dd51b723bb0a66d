#include "avl/isa.hpp"

#include <fmt/format.h>

#include <array>
#include <utility>

namespace avl {

namespace {

struct opcode_info {
  opcode op;
  std::string_view name;
  operand_shape shape;
};

constexpr std::array<opcode_info, 28> opcode_table{{
    {opcode::halt, "halt", operand_shape::none},
    {opcode::li, "li", operand_shape::reg_imm},
    {opcode::mov, "mov", operand_shape::reg_reg},
    {opcode::add, "add", operand_shape::alu},
    {opcode::sub, "sub", operand_shape::alu},
    {opcode::mul, "mul", operand_shape::alu},
    {opcode::xor_, "xor", operand_shape::alu},
    {opcode::and_, "and", operand_shape::alu},
    {opcode::or_, "or", operand_shape::alu},
    {opcode::shl, "shl", operand_shape::alu},
    {opcode::shr, "shr", operand_shape::alu},
    {opcode::rol, "rol", operand_shape::alu},
    {opcode::cmp, "cmp", operand_shape::compare},
    {opcode::ld1, "ld1", operand_shape::load},
    {opcode::ld2, "ld2", operand_shape::load},
    {opcode::ld4, "ld4", operand_shape::load},
    {opcode::st1, "st1", operand_shape::store},
    {opcode::st2, "st2", operand_shape::store},
    {opcode::st4, "st4", operand_shape::store},
    {opcode::jmp, "jmp", operand_shape::jump_target},
    {opcode::jz, "jz", operand_shape::target},
    {opcode::jnz, "jnz", operand_shape::target},
    {opcode::jc, "jc", operand_shape::target},
    {opcode::jnc, "jnc", operand_shape::target},
    {opcode::js, "js", operand_shape::target},
    {opcode::jns, "jns", operand_shape::target},
    {opcode::call, "call", operand_shape::jump_target},
    {opcode::ret, "ret", operand_shape::none},
}};

// Dense lookup by raw opcode byte.
struct lookup_table {
  std::array<const opcode_info*, 256> by_byte{};
  constexpr lookup_table() {
    for (const auto& info : opcode_table) {
      by_byte[static_cast<std::uint8_t>(info.op)] = &info;
    }
  }
};

constexpr lookup_table lookup{};

const opcode_info* info_for(std::uint8_t byte) { return lookup.by_byte[byte]; }

std::string hex_imm(std::uint32_t v) { return fmt::format("{:#x}", v); }

std::string memory_operand(std::uint8_t base, std::uint32_t disp) {
  auto signed_disp = static_cast<std::int32_t>(disp);
  if (signed_disp == 0) return fmt::format("[r{}]", base);
  if (signed_disp < 0)
    return fmt::format("[r{}-{:#x}]", base, 0u - disp);
  return fmt::format("[r{}+{:#x}]", base, disp);
}

} // namespace

operand_shape shape_of(opcode op) {
  return info_for(static_cast<std::uint8_t>(op))->shape;
}

std::string_view mnemonic(opcode op) {
  return info_for(static_cast<std::uint8_t>(op))->name;
}

std::optional<opcode> opcode_from_mnemonic(std::string_view name) {
  for (const auto& info : opcode_table)
    if (info.name == name) return info.op;
  return std::nullopt;
}

unsigned access_width(opcode op) {
  switch (op) {
  case opcode::ld1:
  case opcode::st1: return 1;
  case opcode::ld2:
  case opcode::st2: return 2;
  case opcode::ld4:
  case opcode::st4: return 4;
  default: return 0;
  }
}

bool is_conditional(opcode op) {
  auto v = static_cast<std::uint8_t>(op);
  return v >= static_cast<std::uint8_t>(opcode::jz) &&
         v <= static_cast<std::uint8_t>(opcode::jns);
}

bool is_branch(opcode op) {
  return op == opcode::jmp || op == opcode::call || op == opcode::ret ||
         is_conditional(op);
}

encoded_instruction encode(const instruction& insn) {
  encoded_instruction out{};
  out[0] = static_cast<std::uint8_t>(insn.op);
  out[1] = static_cast<std::uint8_t>((insn.rd & 0xf) | ((insn.rs & 0xf) << 4));
  out[2] = static_cast<std::uint8_t>((insn.rt & 0xf) | (insn.immediate ? 0x10 : 0));
  out[3] = 0;
  for (unsigned i = 0; i < 4; ++i)
    out[4 + i] = static_cast<std::uint8_t>(insn.imm >> (8 * i));
  return out;
}

std::optional<instruction> decode(const encoded_instruction& bytes) {
  const auto* info = info_for(bytes[0]);
  if (info == nullptr) return std::nullopt;
  if ((bytes[2] & 0xe0) != 0 || bytes[3] != 0) return std::nullopt;

  instruction insn;
  insn.op = info->op;
  insn.rd = bytes[1] & 0xf;
  insn.rs = bytes[1] >> 4;
  insn.rt = bytes[2] & 0xf;
  insn.immediate = (bytes[2] & 0x10) != 0;
  insn.imm = static_cast<std::uint32_t>(bytes[4]) |
             (static_cast<std::uint32_t>(bytes[5]) << 8) |
             (static_cast<std::uint32_t>(bytes[6]) << 16) |
             (static_cast<std::uint32_t>(bytes[7]) << 24);

  // Fields outside the opcode's shape must be zero.
  bool use_rd = false, use_rs = false, use_rt = false, use_imm = false;
  bool imm_flag_allowed = false;
  switch (info->shape) {
  case operand_shape::none: break;
  case operand_shape::reg_imm: use_rd = use_imm = true; break;
  case operand_shape::reg_reg: use_rd = use_rs = true; break;
  case operand_shape::alu:
    use_rd = use_rs = true;
    imm_flag_allowed = true;
    use_rt = !insn.immediate;
    use_imm = insn.immediate;
    break;
  case operand_shape::compare:
    use_rs = true;
    imm_flag_allowed = true;
    use_rt = !insn.immediate;
    use_imm = insn.immediate;
    break;
  case operand_shape::load: use_rd = use_rs = use_imm = true; break;
  case operand_shape::store: use_rs = use_rt = use_imm = true; break;
  case operand_shape::target: use_imm = true; break;
  case operand_shape::jump_target:
    imm_flag_allowed = true;
    use_imm = insn.immediate;
    use_rs = !insn.immediate;
    break;
  }
  if (insn.immediate && !imm_flag_allowed) return std::nullopt;
  if ((!use_rd && insn.rd != 0) || (!use_rs && insn.rs != 0) ||
      (!use_rt && insn.rt != 0) || (!use_imm && insn.imm != 0))
    return std::nullopt;
  return insn;
}

std::string disassemble(const instruction& insn) {
  const auto name = mnemonic(insn.op);
  switch (shape_of(insn.op)) {
  case operand_shape::none: return std::string(name);
  case operand_shape::reg_imm:
    return fmt::format("{} r{}, {}", name, insn.rd, hex_imm(insn.imm));
  case operand_shape::reg_reg: return fmt::format("{} r{}, r{}", name, insn.rd, insn.rs);
  case operand_shape::alu:
    if (insn.immediate)
      return fmt::format("{} r{}, r{}, {}", name, insn.rd, insn.rs, hex_imm(insn.imm));
    return fmt::format("{} r{}, r{}, r{}", name, insn.rd, insn.rs, insn.rt);
  case operand_shape::compare:
    if (insn.immediate) return fmt::format("{} r{}, {}", name, insn.rs, hex_imm(insn.imm));
    return fmt::format("{} r{}, r{}", name, insn.rs, insn.rt);
  case operand_shape::load:
    return fmt::format("{} r{}, {}", name, insn.rd, memory_operand(insn.rs, insn.imm));
  case operand_shape::store:
    return fmt::format("{} {}, r{}", name, memory_operand(insn.rs, insn.imm), insn.rt);
  case operand_shape::target: return fmt::format("{} {:#010x}", name, insn.imm);
  case operand_shape::jump_target:
    if (insn.immediate) return fmt::format("{} {:#010x}", name, insn.imm);
    return fmt::format("{} r{}", name, insn.rs);
  }
  return std::string(name);
}

std::optional<unsigned> destination_register(const instruction& insn) {
  switch (shape_of(insn.op)) {
  case operand_shape::reg_imm:
  case operand_shape::reg_reg:
  case operand_shape::alu:
  case operand_shape::load: return insn.rd;
  default: break;
  }
  if (insn.op == opcode::call || insn.op == opcode::ret) return stack_register;
  return std::nullopt;
}

} // namespace avl
