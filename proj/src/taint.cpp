#include "avl/taint.hpp"

#include <stdexcept>

namespace avl {

namespace {

using reg_taint = std::array<label_set, 4>;

label_set all_of(const reg_taint& r) { return r[0] | r[1] | r[2] | r[3]; }

void set_mem(taint_state& st, std::uint32_t a, label_set l) {
  if (l)
    st.memory[a] = l;
  else
    st.memory.erase(a);
}

} // namespace

taint_state propagate(const trace_file& trace, std::size_t first, std::size_t last,
                      const std::vector<taint_source>& sources) {
  if (sources.empty()) throw std::invalid_argument("propagate: no taint sources");
  if (sources.size() > max_taint_sources) throw std::invalid_argument("propagate: too many taint sources");
  taint_state st;
  st.sources = sources;
  for (std::size_t s = 0; s < sources.size(); ++s)
    for (std::uint32_t k = 0; k < sources[s].length; ++k) st.memory[sources[s].address + k] |= label_set{1} << s;

  for (std::size_t i = first; i <= last && i < trace.records.size(); ++i) {
    const auto& rec = trace.records[i];
    const auto in = decode(rec.raw);
    if (!in) continue;
    auto& R = st.registers;
    const reg_taint clean{};
    switch (shape_of(in->op)) {
    case operand_shape::reg_imm: R[in->rd] = clean; break;
    case operand_shape::reg_reg: R[in->rd] = R[in->rs]; break;
    case operand_shape::alu: {
      const reg_taint a = R[in->rs];
      const reg_taint b = in->immediate ? clean : R[in->rt];
      reg_taint out;
      if (in->op == opcode::xor_ || in->op == opcode::and_ || in->op == opcode::or_) {
        for (int k = 0; k < 4; ++k) out[k] = a[k] | b[k];
      } else {
        const label_set u = all_of(a) | all_of(b);
        out = {u, u, u, u};
      }
      R[in->rd] = out;
      break;
    }
    case operand_shape::load: {
      const std::uint32_t addr = rec.regs_before.gpr[in->rs] + in->imm;
      const unsigned w = access_width(in->op);
      reg_taint out{};
      for (unsigned k = 0; k < w; ++k) out[k] = st.at(addr + k);
      R[in->rd] = out;
      break;
    }
    case operand_shape::store: {
      const std::uint32_t addr = rec.regs_before.gpr[in->rs] + in->imm;
      const unsigned w = access_width(in->op);
      for (unsigned k = 0; k < w; ++k) set_mem(st, addr + k, R[in->rt][k]);
      break;
    }
    case operand_shape::jump_target:
      if (in->op == opcode::call) {
        // Return address pushed below sp is clean data.
        const std::uint32_t sp = rec.regs_before.gpr[stack_register] - 4;
        for (unsigned k = 0; k < 4; ++k) set_mem(st, sp + k, 0);
      }
      break;
    case operand_shape::none:
    case operand_shape::compare:
    case operand_shape::target: break;
    }
  }
  return st;
}

bool ripple_verdict(const taint_state& state, std::uint32_t address, std::uint32_t length, std::size_t label) {
  if (length == 0 || label >= max_taint_sources) return false;
  const label_set bit = label_set{1} << label;
  for (std::uint32_t k = 0; k < length; ++k)
    if (!(state.at(address + k) & bit)) return false;
  return true;
}

} // namespace avl
