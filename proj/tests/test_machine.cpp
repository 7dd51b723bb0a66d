#include "avl/assembler.hpp"
#include "avl/machine.hpp"

#include <doctest.h>

using namespace avl;

namespace {

run_result run(const char* src, std::uint64_t budget = 10000) {
  return run_and_trace(assemble(src), {}, budget);
}

} // namespace

TEST_SUITE("machine") {

TEST_CASE("halt-only program traces one record") {
  const auto r = run("halt");
  CHECK(r.trace.records.size() == 1);
  CHECK(r.final_state.halted);
  CHECK_FALSE(r.truncated);
  CHECK(r.trace.records[0].text == "halt");
}

TEST_CASE("add records pre-execution registers") {
  const auto r = run("li r1, 2\nli r2, 3\nadd r1, r1, r2\nhalt");
  REQUIRE(r.trace.records.size() == 4);
  const auto& rec = r.trace.records[2];
  CHECK(rec.regs_before.gpr[1] == 2);
  CHECK(rec.regs_before.gpr[2] == 3);
  CHECK(rec.reads.empty());
  CHECK(rec.writes.empty());
  CHECK(r.final_state.regs.gpr[1] == 5);
}

TEST_CASE("store records address, size and value") {
  const auto r = run(".data\nbuf: .space 8\n.text\nli r1, buf\nli r2, 0xdeadbeef\nst4 [r1+4], r2\nld1 r3, [r1+5]\nhalt");
  const auto& st = r.trace.records[2];
  REQUIRE(st.writes.size() == 1);
  CHECK(st.writes[0] == mem_access{default_data_base + 4, 4, 0xdeadbeef});
  const auto& ld = r.trace.records[3];
  REQUIRE(ld.reads.size() == 1);
  CHECK(ld.reads[0] == mem_access{default_data_base + 5, 1, 0xbe});
  CHECK(r.final_state.regs.gpr[3] == 0xbe);
}

TEST_CASE("flags: carry, borrow, zero, sign") {
  auto st = load(assemble("li r1, 0xffffffff\nadd r2, r1, 1\nhalt"));
  step(st);
  step(st);
  CHECK(st.regs.gpr[2] == 0);
  CHECK(st.regs.flags == (flag::zero | flag::carry));

  st = load(assemble("li r1, 1\ncmp r1, 2\nhalt"));
  step(st);
  step(st);
  CHECK(st.regs.flags == (flag::carry | flag::sign));

  st = load(assemble("li r1, 5\nli r2, 7\nxor r3, r1, r2\nli r4, 9\nhalt"));
  for (int i = 0; i < 3; ++i) step(st);
  CHECK(st.regs.flags == 0);
  step(st); // li leaves flags alone
  CHECK(st.regs.flags == 0);
}

TEST_CASE("rol and shifts mask the count") {
  auto st = load(assemble("li r1, 0x80000001\nrol r2, r1, 33\nshl r3, r1, 32\nshr r4, r1, 31\nhalt"));
  for (int i = 0; i < 4; ++i) step(st);
  CHECK(st.regs.gpr[2] == 0x00000003);
  CHECK(st.regs.gpr[3] == 0x80000001);
  CHECK(st.regs.gpr[4] == 1);
}

TEST_CASE("call and ret use the stack") {
  const auto r = run(".stack 256\ncall f\nhalt\nf: li r1, 7\nret");
  CHECK(r.final_state.regs.gpr[1] == 7);
  CHECK(r.final_state.regs.gpr[stack_register] == default_stack_base + 256);
  CHECK(r.trace.records.size() == 4);
  CHECK(r.trace.records[0].writes.size() == 1);
  CHECK(r.trace.records[0].writes[0].value == default_text_base + 8);
}

TEST_CASE("traps halt the machine") {
  SUBCASE("unmapped data access is recorded") {
    const auto r = run("li r1, 0x7fff0000\nld4 r2, [r1]\nhalt");
    CHECK(r.final_state.trap == trap_kind::unmapped_access);
    CHECK(r.final_state.trap_address == 0x7fff0000);
    CHECK(r.trace.records.size() == 2);
    CHECK(r.trace.metadata.at("trap") == "unmapped-access");
  }
  SUBCASE("write to read-only section") {
    const auto r = run(".rodata\nk: .word 1\n.text\nli r1, k\nst4 [r1], r1\nhalt");
    CHECK(r.final_state.trap == trap_kind::write_protect);
  }
  SUBCASE("fetch outside code") {
    const auto r = run("jmp 0x500000");
    CHECK(r.final_state.trap == trap_kind::unmapped_fetch);
    CHECK(r.trace.records.size() == 1);
  }
  SUBCASE("decode failure") {
    const auto r = run(".byte 0xff, 0, 0, 0, 0, 0, 0, 0");
    CHECK(r.final_state.trap == trap_kind::decode_failure);
    CHECK(r.trace.records.empty());
  }
}

TEST_CASE("step budget exhaustion flags truncation") {
  const auto r = run("top: jmp top", 50);
  CHECK(r.truncated);
  CHECK(r.trace.records.size() == 50);
  CHECK(r.trace.metadata.at("truncated") == "true");
}

TEST_CASE("runs are deterministic and overrides apply") {
  const char* src = ".data\nx: .word 0\n.text\nli r1, x\nld4 r2, [r1]\nmul r2, r2, 3\nst4 [r1], r2\nhalt";
  const auto img = assemble(src);
  const std::map<std::uint32_t, std::uint8_t> ov{{default_data_base, 5}};
  const auto a = run_and_trace(img, ov, 100);
  const auto b = run_and_trace(img, ov, 100);
  CHECK(a.trace == b.trace);
  CHECK(a.final_state.mem == b.final_state.mem);
  CHECK(a.final_state.regs.gpr[2] == 15);
  CHECK(a.trace.section_dump.find_section("data")->bytes[0] == 5);
}

}
