#include "avl/machine.hpp"

#include <algorithm>
#include <bit>

namespace avl {

memory::memory(const program_image& image) {
  for (const auto& s : image.sections) map({s.name, s.base, s.bytes, s.writable, s.executable});
}

void memory::map(region r) { regions_.push_back(std::move(r)); }

const memory::region* memory::find(std::uint32_t addr, std::uint32_t size) const {
  if (last_ < regions_.size() && regions_[last_].contains(addr, size)) return &regions_[last_];
  for (std::size_t i = 0; i < regions_.size(); ++i) {
    if (regions_[i].contains(addr, size)) {
      last_ = i;
      return &regions_[i];
    }
  }
  return nullptr;
}

memory::region* memory::find(std::uint32_t addr, std::uint32_t size) {
  return const_cast<region*>(std::as_const(*this).find(addr, size));
}

std::optional<std::uint32_t> memory::read(std::uint32_t addr, unsigned size) const {
  const auto* r = find(addr, size);
  if (r == nullptr) return std::nullopt;
  const auto* p = r->bytes.data() + (addr - r->base);
  std::uint32_t v = 0;
  for (unsigned i = 0; i < size; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

bool memory::write(std::uint32_t addr, unsigned size, std::uint32_t value) {
  auto* r = find(addr, size);
  if (r == nullptr || !r->writable) return false;
  auto* p = r->bytes.data() + (addr - r->base);
  for (unsigned i = 0; i < size; ++i) p[i] = static_cast<std::uint8_t>(value >> (8 * i));
  return true;
}

std::optional<std::uint8_t> memory::byte(std::uint32_t addr) const {
  const auto* r = find(addr, 1);
  if (r == nullptr) return std::nullopt;
  return r->bytes[addr - r->base];
}

bool memory::poke(std::uint32_t addr, std::uint8_t value) {
  auto* r = find(addr, 1);
  if (r == nullptr) return false;
  r->bytes[addr - r->base] = value;
  return true;
}

std::optional<encoded_instruction> memory::fetch(std::uint32_t addr) const {
  const auto* r = find(addr, instruction_size);
  if (r == nullptr || !r->executable) return std::nullopt;
  encoded_instruction out;
  std::copy_n(r->bytes.data() + (addr - r->base), instruction_size, out.begin());
  return out;
}

bool operator==(const memory& a, const memory& b) {
  if (a.regions_.size() != b.regions_.size()) return false;
  for (std::size_t i = 0; i < a.regions_.size(); ++i) {
    const auto& x = a.regions_[i];
    const auto& y = b.regions_[i];
    if (x.name != y.name || x.base != y.base || x.bytes != y.bytes || x.writable != y.writable ||
        x.executable != y.executable)
      return false;
  }
  return true;
}

std::string to_string(trap_kind k) {
  switch (k) {
  case trap_kind::none: return "none";
  case trap_kind::unmapped_fetch: return "unmapped-fetch";
  case trap_kind::decode_failure: return "decode-failure";
  case trap_kind::unmapped_access: return "unmapped-access";
  case trap_kind::write_protect: return "write-protect";
  }
  return "unknown";
}

machine_state load(const program_image& image) {
  machine_state s;
  s.mem = memory(image);
  s.regs.pc = image.entry;
  if (const auto* stack = image.find_section("stack")) s.regs.gpr[stack_register] = stack->end();
  return s;
}

namespace {

step_status raise(machine_state& s, trap_kind kind, std::uint32_t addr) {
  s.halted = true;
  s.trap = kind;
  s.trap_address = addr;
  return step_status::trap;
}

std::uint8_t result_flags(std::uint32_t r, bool carry) {
  std::uint8_t f = 0;
  if (r == 0) f |= flag::zero;
  if (carry) f |= flag::carry;
  if (r >> 31) f |= flag::sign;
  return f;
}

bool condition_holds(opcode op, std::uint8_t flags) {
  switch (op) {
  case opcode::jz: return (flags & flag::zero) != 0;
  case opcode::jnz: return (flags & flag::zero) == 0;
  case opcode::jc: return (flags & flag::carry) != 0;
  case opcode::jnc: return (flags & flag::carry) == 0;
  case opcode::js: return (flags & flag::sign) != 0;
  case opcode::jns: return (flags & flag::sign) == 0;
  default: return false;
  }
}

} // namespace

step_status step(machine_state& s, trace_record* rec) {
  if (s.halted) return s.trap == trap_kind::none ? step_status::halted : step_status::trap;

  const std::uint32_t pc = s.regs.pc;
  const auto raw = s.mem.fetch(pc);
  if (!raw) return raise(s, trap_kind::unmapped_fetch, pc);
  const auto decoded = decode(*raw);
  if (!decoded) return raise(s, trap_kind::decode_failure, pc);
  const instruction& in = *decoded;

  if (rec != nullptr) {
    rec->address = pc;
    rec->raw = *raw;
    rec->text = disassemble(in);
    rec->regs_before = s.regs;
    rec->reads.clear();
    rec->writes.clear();
  }

  auto& r = s.regs.gpr;
  std::uint32_t next = pc + instruction_size;
  const std::uint32_t src2 = in.immediate ? in.imm : r[in.rt];

  switch (in.op) {
  case opcode::halt:
    s.halted = true;
    s.regs.pc = next;
    return step_status::halted;
  case opcode::li: r[in.rd] = in.imm; break;
  case opcode::mov: r[in.rd] = r[in.rs]; break;
  case opcode::add: {
    const std::uint32_t a = r[in.rs];
    const std::uint32_t v = a + src2;
    s.regs.flags = result_flags(v, v < a);
    r[in.rd] = v;
    break;
  }
  case opcode::sub: {
    const std::uint32_t a = r[in.rs];
    const std::uint32_t v = a - src2;
    s.regs.flags = result_flags(v, a < src2);
    r[in.rd] = v;
    break;
  }
  case opcode::cmp: {
    const std::uint32_t a = r[in.rs];
    s.regs.flags = result_flags(a - src2, a < src2);
    break;
  }
  case opcode::mul:
  case opcode::xor_:
  case opcode::and_:
  case opcode::or_:
  case opcode::shl:
  case opcode::shr:
  case opcode::rol: {
    const std::uint32_t a = r[in.rs];
    std::uint32_t v = 0;
    switch (in.op) {
    case opcode::mul: v = a * src2; break;
    case opcode::xor_: v = a ^ src2; break;
    case opcode::and_: v = a & src2; break;
    case opcode::or_: v = a | src2; break;
    case opcode::shl: v = a << (src2 & 31); break;
    case opcode::shr: v = a >> (src2 & 31); break;
    default: v = std::rotl(a, static_cast<int>(src2 & 31)); break;
    }
    s.regs.flags = result_flags(v, false);
    r[in.rd] = v;
    break;
  }
  case opcode::ld1:
  case opcode::ld2:
  case opcode::ld4: {
    const unsigned width = access_width(in.op);
    const std::uint32_t addr = r[in.rs] + in.imm;
    const auto v = s.mem.read(addr, width);
    if (!v) return raise(s, trap_kind::unmapped_access, addr);
    if (rec) rec->reads.push_back({addr, static_cast<std::uint8_t>(width), *v});
    r[in.rd] = *v;
    break;
  }
  case opcode::st1:
  case opcode::st2:
  case opcode::st4: {
    const unsigned width = access_width(in.op);
    const std::uint32_t addr = r[in.rs] + in.imm;
    std::uint32_t v = r[in.rt];
    if (width < 4) v &= (1u << (8 * width)) - 1;
    if (!s.mem.write(addr, width, v))
      return raise(s, s.mem.is_mapped(addr) ? trap_kind::write_protect : trap_kind::unmapped_access, addr);
    if (rec) rec->writes.push_back({addr, static_cast<std::uint8_t>(width), v});
    break;
  }
  case opcode::jmp: next = in.immediate ? in.imm : r[in.rs]; break;
  case opcode::jz:
  case opcode::jnz:
  case opcode::jc:
  case opcode::jnc:
  case opcode::js:
  case opcode::jns:
    if (condition_holds(in.op, s.regs.flags)) next = in.imm;
    break;
  case opcode::call: {
    const std::uint32_t target = in.immediate ? in.imm : r[in.rs];
    const std::uint32_t sp = r[stack_register] - 4;
    if (!s.mem.write(sp, 4, next))
      return raise(s, s.mem.is_mapped(sp) ? trap_kind::write_protect : trap_kind::unmapped_access, sp);
    if (rec) rec->writes.push_back({sp, 4, next});
    r[stack_register] = sp;
    next = target;
    break;
  }
  case opcode::ret: {
    const std::uint32_t sp = r[stack_register];
    const auto v = s.mem.read(sp, 4);
    if (!v) return raise(s, trap_kind::unmapped_access, sp);
    if (rec) rec->reads.push_back({sp, 4, *v});
    r[stack_register] = sp + 4;
    next = *v;
    break;
  }
  }
  s.regs.pc = next;
  return step_status::ok;
}

run_result run_and_trace(const program_image& image,
                         const std::map<std::uint32_t, std::uint8_t>& overrides,
                         std::uint64_t max_steps) {
  run_result out;
  out.trace.section_dump = image;
  apply_overrides(out.trace.section_dump, overrides);
  out.final_state = load(out.trace.section_dump);

  auto& records = out.trace.records;
  std::uint64_t steps = 0;
  while (!out.final_state.halted) {
    if (steps == max_steps) {
      out.truncated = true;
      break;
    }
    trace_record rec;
    const auto status = step(out.final_state, &rec);
    ++steps;
    // Fetch/decode traps leave no instruction to record.
    const bool data_trap = status == step_status::trap &&
                           out.final_state.trap != trap_kind::unmapped_fetch &&
                           out.final_state.trap != trap_kind::decode_failure;
    if (status != step_status::trap || data_trap) records.push_back(std::move(rec));
  }
  if (out.truncated) out.trace.metadata["truncated"] = "true";
  if (out.final_state.trap != trap_kind::none) {
    out.trace.metadata["trap"] = to_string(out.final_state.trap);
    out.trace.metadata["trap_address"] = std::to_string(out.final_state.trap_address);
  }
  return out;
}

} // namespace avl
