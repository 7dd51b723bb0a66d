#include "avl/assembler.hpp"
#include "avl/machine.hpp"
#include "avl/taint.hpp"

#include <doctest.h>

using namespace avl;

namespace {

trace_file trace_of(const char* src) { return run_and_trace(assemble(src), {}, 200000).trace; }

taint_state whole(const trace_file& t, const std::vector<taint_source>& src) {
  return propagate(t, 0, t.records.size() - 1, src);
}

constexpr std::uint32_t D = default_data_base;

// The three-deep int matrix product, A 3x2, B 2x4, res 3x4.
const char* matmul = R"(
.data
A: .word 1, 2, 3, 4, 5, 6
B: .word 7, 8, 9, 10, 11, 12, 13, 14
res: .space 48
.text
  li r1, 0
i_loop:
  li r2, 0
j_loop:
  shl r4, r1, 4
  shl r5, r2, 2
  add r4, r4, r5
  add r4, r4, res
  li r6, 0
  st4 [r4], r6
  li r3, 0
k_loop:
  shl r7, r1, 3
  shl r8, r3, 2
  add r7, r7, r8
  ld4 r9, [r7+A]
  shl r10, r3, 4
  shl r11, r2, 2
  add r10, r10, r11
  ld4 r11, [r10+B]
  mul r9, r9, r11
  ld4 r6, [r4]
  add r6, r6, r9
  st4 [r4], r6
  add r3, r3, 1
  cmp r3, 2
  jnz k_loop
  add r2, r2, 1
  cmp r2, 4
  jnz j_loop
  add r1, r1, 1
  cmp r1, 3
  jnz i_loop
  halt
)";

} // namespace

TEST_SUITE("taint") {

TEST_CASE("copy loop carries labels byte for byte") {
  const auto t = trace_of(R"(
.data
src: .byte 1, 2, 3, 4, 5, 6, 7, 8
dst: .space 8
.text
  li r1, 0
top:
  ld1 r2, [r1+src]
  st1 [r1+dst], r2
  add r1, r1, 1
  cmp r1, 8
  jnz top
  halt
)");
  const auto st = whole(t, {{"src", D, 8}});
  CHECK(ripple_verdict(st, D + 8, 8, 0));
  for (std::uint32_t k = 0; k < 8; ++k) CHECK(st.at(D + 8 + k) == 1);
}

TEST_CASE("xor with a clean constant keeps the taint") {
  const auto t = trace_of(R"(
.data
x: .word 0x11223344
y: .space 4
.text
  li r1, x
  ld4 r2, [r1]
  xor r2, r2, 0x5a5a5a5a
  st4 [r1+4], r2
  halt
)");
  const auto st = whole(t, {{"x", D, 4}});
  CHECK(ripple_verdict(st, D + 4, 4, 0));
}

TEST_CASE("address operands do not taint") {
  const auto t = trace_of(R"(
.data
idx: .byte 2
tbl: .byte 9, 8, 7, 6
out: .space 1
.text
  li r1, idx
  ld1 r2, [r1]
  ld1 r3, [r2+tbl]
  st1 [r1+5], r3
  halt
)");
  const auto st = whole(t, {{"idx", D, 1}});
  CHECK_FALSE(ripple_verdict(st, D + 5, 1, 0));
  CHECK(st.at(D + 5) == 0);
}

TEST_CASE("untouched output is not rippled") {
  const auto t = trace_of(".data\na: .word 1\nb: .word 2\n.text\nli r1, a\nld4 r2, [r1]\nst4 [r1], r2\nhalt");
  const auto st = whole(t, {{"a", D, 4}});
  CHECK_FALSE(ripple_verdict(st, D + 4, 4, 0));
  CHECK(ripple_verdict(st, D, 4, 0));
  CHECK_FALSE(ripple_verdict(st, D, 0, 0));
}

TEST_CASE("matrix product taints all 48 result bytes from either factor") {
  const auto t = trace_of(matmul);
  const std::uint32_t res = D + 24 + 32;
  const auto st = whole(t, {{"A", D, 24}, {"B", D + 24, 32}});
  CHECK(ripple_verdict(st, res, 48, 0));
  CHECK(ripple_verdict(st, res, 48, 1));
}

TEST_CASE("widening the sources never shrinks a label set") {
  const auto t = trace_of(matmul);
  const auto narrow = whole(t, {{"A", D, 4}});
  const auto wide = whole(t, {{"A", D, 24}});
  for (const auto& [a, l] : narrow.memory) CHECK((wide.at(a) & l) == l);
  for (unsigned r = 0; r < register_count; ++r)
    for (int k = 0; k < 4; ++k) CHECK((wide.registers[r][k] & narrow.registers[r][k]) == narrow.registers[r][k]);
}

TEST_CASE("no sources is an error") {
  const auto t = trace_of("halt");
  CHECK_THROWS(propagate(t, 0, 0, {}));
}

}
