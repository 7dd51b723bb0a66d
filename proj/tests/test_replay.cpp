#include "avl/assembler.hpp"
#include "avl/loops.hpp"
#include "avl/machine.hpp"
#include "avl/replay.hpp"
#include "avl/stats.hpp"

#include <doctest.h>

using namespace avl;

namespace {

struct fixture {
  program_image image;
  trace_file trace;
  std::vector<loop_instance> loops;
};

fixture prepare(const char* src) {
  fixture f;
  f.image = assemble(src);
  f.trace = run_and_trace(f.image, {}, 100000).trace;
  f.loops = detect_loops(partition_blocks(f.trace)).loops;
  return f;
}

constexpr std::uint32_t D = default_data_base;

// Mixes a 4-byte state with a counter held in memory at `n`.
const char* mixer = R"(
.data
state: .word 0x01234567
n: .word 8
.text
  li r1, state
  li r2, 0
  ld4 r5, [r1+4]
top:
  ld4 r3, [r1]
  rol r3, r3, 5
  xor r3, r3, 0x9e3779b9
  add r3, r3, r2
  st4 [r1], r3
  add r2, r2, 1
  cmp r2, r5
  jnz top
  li r7, 1
  halt
)";

} // namespace

TEST_SUITE("replay") {

TEST_CASE("loop at trace start: snapshot memory equals the section dump") {
  const auto f = prepare(".data\nx: .byte 3\n.text\ntop: li r1, x\nld1 r2, [r1]\nsub r2, r2, 1\nst1 [r1], r2\njnz top\nhalt");
  REQUIRE(f.loops.size() == 1);
  REQUIRE(f.loops[0].first == 0);
  const auto snap = build_snapshot(f.loops[0], f.trace);
  CHECK(snap.mem == memory(f.trace.section_dump));
  CHECK(snap.regs == f.trace.records[0].regs_before);
}

TEST_CASE("prior writes are applied") {
  const auto f = prepare(mixer);
  REQUIRE(f.loops.size() == 1);
  // The pre-loop code wrote nothing, so patch a write in front of the loop.
  auto t = f.trace;
  t.records[0].writes.push_back({D + 6, 1, 0xab});
  auto l = f.loops[0];
  l.first = 1;
  const auto snap = build_snapshot(l, t);
  CHECK(snap.mem.byte(D + 6) == std::uint8_t{0xab});
}

TEST_CASE("override-free replay reproduces the trace") {
  const auto f = prepare(mixer);
  REQUIRE(f.loops.size() == 1);
  const auto snap = build_snapshot(f.loops[0], f.trace);
  CHECK(snap.exit_set.count(f.trace.records[f.loops[0].last + 1].address) == 1);
  const auto rep = check_fidelity(f.loops[0], f.trace, snap);
  CHECK(rep.status == replay_status::completed);
  CHECK(rep.registers_compared);
  CHECK(rep.registers_match);
  CHECK(rep.outputs_match);
  CHECK(rep.outputs_compared == 4);
}

TEST_CASE("replay with a flipped input changes the output") {
  const auto f = prepare(mixer);
  const auto snap = build_snapshot(f.loops[0], f.trace);
  const std::set<std::uint32_t> outs{D, D + 1, D + 2, D + 3};
  const auto base = replay(snap, {}, outs, default_step_budget(snap));
  const auto flipped = replay(snap, {{D, static_cast<std::uint8_t>(0x67 ^ 0x01)}}, outs, default_step_budget(snap));
  CHECK(base.status == replay_status::completed);
  CHECK(flipped.status == replay_status::completed);
  CHECK(base.output_values != flipped.output_values);
}

TEST_CASE("corrupted loop bound exhausts the budget") {
  const auto f = prepare(mixer);
  const auto snap = build_snapshot(f.loops[0], f.trace);
  // Bound 0: the counter starts at 1 and never wraps within the budget.
  const auto r = replay(snap, {{D + 4, 0}}, {}, 1000);
  CHECK(r.status == replay_status::step_budget_exhausted);
  CHECK(r.steps == 1000);
}

TEST_CASE("leaving the loop code elsewhere is a divergent exit") {
  const auto f = prepare(R"(
.data
flag: .byte 0
.text
  li r1, flag
  li r2, 0
top:
  add r2, r2, 1
  jmp check
check:
  ld1 r3, [r1]
  cmp r3, 1
  jz rare
back:
  cmp r2, 4
  jnz top
  halt
rare:
  li r4, 7
  jmp back
)");
  REQUIRE(f.loops.size() == 1);
  const auto snap = build_snapshot(f.loops[0], f.trace);
  const auto r = replay(snap, {{D, 1}}, {}, default_step_budget(snap));
  CHECK(r.status == replay_status::divergent_exit);
}

TEST_CASE("traps are reported") {
  const auto f = prepare(mixer);
  const auto snap = build_snapshot(f.loops[0], f.trace);
  // Code comes from snapshot memory: patch the immediate of `li r1, state`.
  const auto r = replay(snap, {{default_text_base + 6, 0x70}}, {}, 1000);
  CHECK(r.status == replay_status::trap);
  CHECK(r.final_state.trap == trap_kind::unmapped_access);
}

TEST_CASE("replay does not mutate the snapshot") {
  const auto f = prepare(mixer);
  const auto snap = build_snapshot(f.loops[0], f.trace);
  const auto copy = snap.mem;
  const auto a = replay(snap, {{D, 0x55}}, {D}, 1000);
  CHECK(snap.mem == copy);
  const auto b = replay(snap, {{D, 0x55}}, {D}, 1000);
  CHECK(a.output_values == b.output_values);
}

TEST_CASE("randomizing memory touches the requested share of bytes") {
  const auto f = prepare(mixer);
  auto snap = build_snapshot(f.loops[0], f.trace);
  const auto before = snap.mem;
  rng g(3);
  randomize_memory(snap, 0.5, g);
  std::size_t total = 0, changed = 0;
  for (std::size_t r = 0; r < before.regions().size(); ++r) {
    const auto& x = before.regions()[r].bytes;
    const auto& y = snap.mem.regions()[r].bytes;
    total += x.size();
    for (std::size_t i = 0; i < x.size(); ++i) changed += x[i] != y[i];
  }
  // A random byte equals the old one 1 time in 256.
  CHECK(changed <= total / 2);
  CHECK(changed >= total / 2 - total / 40);
}

}
