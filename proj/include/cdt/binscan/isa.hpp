#pragma once

// The MV instruction set: one IL, two fixed-width encodings.
//
// MV32 word (8 bytes): opcode u8, rd u8, rs1 u8, rs2 u8, imm i32 LE.
// MV16 word (4 bytes): opcode u8, rd << 4 | rs1 u8, imm i16 LE; rs2 is 0.
//
// Operand conventions:
//   LOADI rd, imm            rd = imm
//   MOV   rd, rs1            rd = rs1
//   ADD   rd, rs1, rs2, imm  rd = rs1 + rs2 + imm   (rs2 == 0 means no register term)
//   SUB   rd, rs1, rs2, imm  rd = rs1 - rs2 - imm
//   LOAD  rd, [rs1 + imm]
//   STORE [rs1 + imm], rd
//   ALLOC rd, imm            imm cells
//   FREE  rs1
//   CALL  imm                target ordinal; result in r0
//   JMP   imm
//   BEQ   rd, rs1, imm       branch when rd == rs1
//   RAND  rd
// Branch and call targets are instruction ordinals in both encodings.

#include <cstdint>
#include <string>
#include <vector>

#include "cdt/core/bytes.hpp"
#include "cdt/core/enum_names.hpp"
#include "cdt/core/error.hpp"
#include "cdt/model/cdt.hpp"

namespace cdt::binscan {

using model::CpuArch;

enum class Op : std::uint8_t { NOP, LOADI, MOV, ADD, SUB, LOAD, STORE, ALLOC, FREE, CALL, RET, JMP, BEQ, RAND, HALT };

}  // namespace cdt::binscan

namespace cdt {

template <>
struct EnumNames<binscan::Op> {
  using O = binscan::Op;
  static constexpr std::array values{
      CDT_ENUM_NAME(O, NOP),   CDT_ENUM_NAME(O, LOADI), CDT_ENUM_NAME(O, MOV),  CDT_ENUM_NAME(O, ADD),
      CDT_ENUM_NAME(O, SUB),   CDT_ENUM_NAME(O, LOAD),  CDT_ENUM_NAME(O, STORE), CDT_ENUM_NAME(O, ALLOC),
      CDT_ENUM_NAME(O, FREE),  CDT_ENUM_NAME(O, CALL),  CDT_ENUM_NAME(O, RET),  CDT_ENUM_NAME(O, JMP),
      CDT_ENUM_NAME(O, BEQ),   CDT_ENUM_NAME(O, RAND),  CDT_ENUM_NAME(O, HALT)};
};

}  // namespace cdt

namespace cdt::binscan {

inline constexpr int kRegisters = 16;
inline constexpr int kArgRegisters = 4;

struct Instruction {
  int index = 0;
  Op op = Op::NOP;
  int rd = 0, rs1 = 0, rs2 = 0;
  std::int32_t imm = 0;
  friend bool operator==(const Instruction&, const Instruction&) = default;
};

using Program = std::vector<Instruction>;

inline std::size_t word_size(CpuArch arch) {
  switch (arch) {
    case CpuArch::MV32: return 8;
    case CpuArch::MV16: return 4;
    default: throw Error(ErrorKind::unknown_arch, "arch", "no encoding for this architecture");
  }
}

inline bool is_branch(Op op) { return op == Op::JMP || op == Op::BEQ; }
inline bool ends_path(Op op) { return op == Op::RET || op == Op::HALT; }

/// Registers an instruction reads. CALL and RET count as no reads.
inline std::vector<int> reads(const Instruction& in) {
  switch (in.op) {
    case Op::MOV:
    case Op::LOAD:
    case Op::FREE: return {in.rs1};
    case Op::ADD:
    case Op::SUB: return in.rs2 != 0 ? std::vector<int>{in.rs1, in.rs2} : std::vector<int>{in.rs1};
    case Op::STORE:
    case Op::BEQ: return {in.rd, in.rs1};
    default: return {};
  }
}

/// Register an instruction writes, or -1.
inline int writes(const Instruction& in) {
  switch (in.op) {
    case Op::LOADI:
    case Op::MOV:
    case Op::ADD:
    case Op::SUB:
    case Op::LOAD:
    case Op::ALLOC:
    case Op::RAND: return in.rd;
    case Op::CALL: return 0;
    default: return -1;
  }
}

inline std::string format_instruction(const Instruction& in) {
  auto r = [](int n) { return "r" + std::to_string(n); };
  auto off = [&](int base, std::int32_t imm) {
    return "[" + r(base) + (imm < 0 ? "" : "+") + std::to_string(imm) + "]";
  };
  std::string name(name_of(in.op));
  switch (in.op) {
    case Op::LOADI: return name + " " + r(in.rd) + ", " + std::to_string(in.imm);
    case Op::MOV: return name + " " + r(in.rd) + ", " + r(in.rs1);
    case Op::ADD:
    case Op::SUB: return name + " " + r(in.rd) + ", " + r(in.rs1) + ", " + r(in.rs2) + ", " + std::to_string(in.imm);
    case Op::LOAD: return name + " " + r(in.rd) + ", " + off(in.rs1, in.imm);
    case Op::STORE: return name + " " + off(in.rs1, in.imm) + ", " + r(in.rd);
    case Op::ALLOC: return name + " " + r(in.rd) + ", " + std::to_string(in.imm);
    case Op::FREE: return name + " " + r(in.rs1);
    case Op::CALL:
    case Op::JMP: return name + " " + std::to_string(in.imm);
    case Op::BEQ: return name + " " + r(in.rd) + ", " + r(in.rs1) + ", " + std::to_string(in.imm);
    case Op::RAND: return name + " " + r(in.rd);
    default: return name;
  }
}

/// Encodes one instruction. Throws `assembler` when an operand does not
/// fit the chosen encoding.
inline void encode(const Instruction& in, CpuArch arch, ByteWriter& out) {
  auto where = "ordinal " + std::to_string(in.index);
  for (int reg : {in.rd, in.rs1, in.rs2})
    if (reg < 0 || reg >= kRegisters) throw Error(ErrorKind::assembler, where, "register out of range");
  if (arch == CpuArch::MV32) {
    out.le<std::uint8_t>(static_cast<std::uint8_t>(in.op))
        .le<std::uint8_t>(static_cast<std::uint8_t>(in.rd))
        .le<std::uint8_t>(static_cast<std::uint8_t>(in.rs1))
        .le<std::uint8_t>(static_cast<std::uint8_t>(in.rs2))
        .le<std::int32_t>(in.imm);
    return;
  }
  if (arch != CpuArch::MV16) throw Error(ErrorKind::unknown_arch, where, "no encoding for this architecture");
  if (in.rs2 != 0) throw Error(ErrorKind::assembler, where, "MV16 has no rs2 field");
  if (in.imm < INT16_MIN || in.imm > INT16_MAX) throw Error(ErrorKind::assembler, where, "immediate exceeds 16 bits");
  out.le<std::uint8_t>(static_cast<std::uint8_t>(in.op))
      .le<std::uint8_t>(static_cast<std::uint8_t>(in.rd << 4 | in.rs1))
      .le<std::int16_t>(static_cast<std::int16_t>(in.imm));
}

inline Bytes encode_program(const Program& program, CpuArch arch) {
  ByteWriter w;
  for (const auto& in : program) encode(in, arch, w);
  return w.take();
}

/// Decodes a code section into IL. Every branch and call target must be an
/// ordinal inside the section.
inline Program decode(std::span<const std::uint8_t> code, CpuArch arch) {
  auto ws = word_size(arch);
  if (code.size() % ws != 0)
    throw Error(ErrorKind::bad_code_length, "code", std::to_string(code.size()) + " bytes is not a multiple of " +
                                                        std::to_string(ws));
  Program out;
  ByteReader rd(code);
  for (int ordinal = 0; !rd.at_end(); ++ordinal) {
    auto where = "ordinal " + std::to_string(ordinal);
    Instruction in;
    in.index = ordinal;
    auto op = *rd.le<std::uint8_t>();
    if (op > static_cast<std::uint8_t>(Op::HALT))
      throw Error(ErrorKind::unknown_opcode, where, "opcode " + std::to_string(op));
    in.op = static_cast<Op>(op);
    if (arch == CpuArch::MV32) {
      in.rd = *rd.le<std::uint8_t>();
      in.rs1 = *rd.le<std::uint8_t>();
      in.rs2 = *rd.le<std::uint8_t>();
      in.imm = *rd.le<std::int32_t>();
    } else {
      auto packed = *rd.le<std::uint8_t>();
      in.rd = packed >> 4;
      in.rs1 = packed & 0x0F;
      in.imm = *rd.le<std::int16_t>();
    }
    for (int reg : {in.rd, in.rs1, in.rs2})
      if (reg >= kRegisters) throw Error(ErrorKind::bad_register, where, "register r" + std::to_string(reg));
    out.push_back(in);
  }
  for (const auto& in : out) {
    if (in.op != Op::CALL && !is_branch(in.op)) continue;
    if (in.imm < 0 || static_cast<std::size_t>(in.imm) >= out.size())
      throw Error(in.op == Op::CALL ? ErrorKind::bad_call_target : ErrorKind::bad_branch_target,
                  "ordinal " + std::to_string(in.index), "target " + std::to_string(in.imm) + " is outside the code section");
  }
  return out;
}

}  // namespace cdt::binscan
