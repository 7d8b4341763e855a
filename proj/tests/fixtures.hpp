#pragma once
// Shared test fixtures: a small age-summing program whose loop bound is off
// by one (writes a 33rd element into a 32-slot buffer, silently clobbering
// the neighboring variable in a plain run), plus input-encoding helpers.
#include <cstdint>
#include <string>
#include <vector>

namespace bofspot::testfix {

// Instruction indices:
//   0 sub r7, 148        (frame-pointer-style adjustment; def read by nothing,
//                         but reads+redefines r7 in one step)
//   1 store [i], 0
//   2 store [total], 0
//   3 jmp check
//   4 input [age], 4     (loop:)
//   5 cmp [age], -1
//   6 jcc eq, done
//   7 load r1, [i]
//   8 load r0, [age]
//   9 store [ages+r1*4], r0   <- out-of-bounds when i == 32
//  10 add [total], r0
//  11 add [i], 1
//  12 cmp [i], 32       (check:)
//  13 jcc le, loop
//  done: (== insns.size(), jumping here ends the run)
inline const char* kAgesProgram = R"(.var ages stack 128
.var total stack 4
.var i stack 4
.var age stack 4
  sub r7, 148
  store [i], 0
  store [total], 0
  jmp check
loop:
  input [age], 4
  cmp [age], -1
  jcc eq, done
  load r1, [i]
  load r0, [age]
  store [ages+r1*4], r0
  add [total], r0
  add [i], 1
check:
  cmp [i], 32
  jcc le, loop
done:
)";

inline constexpr uint64_t kAgesOverflowInsn = 9;

inline std::vector<uint8_t> encode_ints(const std::vector<int32_t>& vals) {
  std::vector<uint8_t> out;
  out.reserve(vals.size() * 4);
  for (int32_t v : vals)
    for (int b = 0; b < 4; b++) out.push_back(static_cast<uint8_t>(static_cast<uint32_t>(v) >> (8 * b)));
  return out;
}

// 33 positive values (none is the -1 terminator), so the fill loop runs its
// full off-by-one course and the 33rd store lands out of bounds.
inline std::vector<int32_t> ages_inputs() {
  std::vector<int32_t> v;
  for (int i = 0; i < 33; i++) v.push_back(20 + i);
  return v;
}

}  // namespace bofspot::testfix
