#pragma once

// Plain-text assembler for MV programs.
//
//   ; comment (also '#')
//   .arch MV16              optional, default MV32
//   main:                   exported label (goes to the symbol table)
//   .loop:                  local label (leading '.')
//       ALLOC r1, 8
//       LOAD r2, [r1+4]
//       STORE [r1-1], r2
//       ADD r3, r1, r2, 4   also "ADD r3, r1, 4" and "ADD r3, r1, r2"
//       BEQ r0, r1, .loop
//       CALL make_key       label or ordinal
//       RET
//   .data 0a ff 10          hex bytes appended to the data section
//   .data "text"

#include <cctype>
#include <charconv>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cdt/binscan/image.hpp"
#include "cdt/core/text.hpp"

namespace cdt::binscan {

struct Assembly {
  CpuArch arch = CpuArch::MV32;
  Program program;
  Bytes data;
  std::vector<std::pair<std::string, int>> symbols;  // exported labels, definition order
};

namespace detail {

struct AsmLine {
  std::size_t lineno;
  std::string mnemonic;
  std::vector<std::string> operands;
};

inline std::vector<std::string> split_operands(std::string_view s) {
  std::vector<std::string> out;
  for (auto part : text::split(s, ','))
    if (auto t = text::trim(part); !t.empty()) out.emplace_back(t);
  return out;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  s = text::trim(s);
  bool neg = false;
  if (!s.empty() && (s.front() == '-' || s.front() == '+')) {
    neg = s.front() == '-';
    s.remove_prefix(1);
  }
  int base = 10;
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    base = 16;
    s.remove_prefix(2);
  }
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
  return neg ? -v : v;
}

}  // namespace detail

inline Assembly assemble(std::string_view source) {
  Assembly out;
  std::map<std::string, int> labels;
  std::vector<detail::AsmLine> body;
  std::size_t lineno = 0;
  auto fail = [&](std::size_t line, const std::string& what) -> void {
    throw Error(ErrorKind::assembler, "line " + std::to_string(line), what);
  };
  for (auto raw : text::lines(source)) {
    ++lineno;
    std::string line(raw);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (!quoted && (line[i] == ';' || line[i] == '#')) {
        line.resize(i);
        break;
      }
    }
    auto t = text::trim(line);
    while (!t.empty()) {
      auto colon = t.find(':');
      auto space = t.find_first_of(" \t");
      if (colon == std::string_view::npos || (space != std::string_view::npos && space < colon)) break;
      std::string label(t.substr(0, colon));
      if (label.empty() || label == ".") fail(lineno, "empty label");
      if (!labels.emplace(label, static_cast<int>(body.size())).second) fail(lineno, "label '" + label + "' defined twice");
      if (label.front() != '.') out.symbols.emplace_back(label, static_cast<int>(body.size()));
      t = text::trim(t.substr(colon + 1));
    }
    if (t.empty()) continue;
    auto space = t.find_first_of(" \t");
    std::string mnemonic(t.substr(0, space));
    std::string_view rest = space == std::string_view::npos ? std::string_view{} : text::trim(t.substr(space));
    if (mnemonic == ".arch") {
      auto a = parse_enum<CpuArch>(rest);
      if (!a || *a == CpuArch::unknown) fail(lineno, "unknown arch '" + std::string(rest) + "'");
      out.arch = *a;
      continue;
    }
    if (mnemonic == ".data") {
      if (!rest.empty() && rest.front() == '"') {
        if (rest.size() < 2 || rest.back() != '"') fail(lineno, "unterminated string");
        auto s = rest.substr(1, rest.size() - 2);
        out.data.insert(out.data.end(), s.begin(), s.end());
      } else {
        for (auto byte : text::split_ws(rest)) {
          auto v = detail::parse_int("0x" + std::string(byte));
          if (!v || *v < 0 || *v > 255) fail(lineno, "bad data byte '" + std::string(byte) + "'");
          out.data.push_back(static_cast<std::uint8_t>(*v));
        }
      }
      continue;
    }
    for (auto& c : mnemonic) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    body.push_back({lineno, mnemonic, detail::split_operands(rest)});
  }

  auto reg = [&](const detail::AsmLine& l, const std::string& s) {
    auto t = text::to_lower(text::trim(s));
    auto n = t.size() > 1 && t[0] == 'r' ? detail::parse_int(t.substr(1)) : std::nullopt;
    if (!n || *n < 0 || *n >= kRegisters) fail(l.lineno, "bad register '" + s + "'");
    return static_cast<int>(*n);
  };
  auto imm = [&](const detail::AsmLine& l, const std::string& s) {
    auto n = detail::parse_int(s);
    if (!n || *n < INT32_MIN || *n > INT32_MAX) fail(l.lineno, "bad immediate '" + s + "'");
    return static_cast<std::int32_t>(*n);
  };
  auto target = [&](const detail::AsmLine& l, const std::string& s) {
    if (auto it = labels.find(std::string(text::trim(s))); it != labels.end()) return it->second;
    auto n = detail::parse_int(s);
    if (!n) fail(l.lineno, "unknown label '" + s + "'");
    return static_cast<int>(*n);
  };
  auto mem = [&](const detail::AsmLine& l, const std::string& s, int& base, std::int32_t& off) {
    auto t = text::trim(s);
    if (t.size() < 3 || t.front() != '[' || t.back() != ']') fail(l.lineno, "expected [rN+imm], got '" + s + "'");
    t = t.substr(1, t.size() - 2);
    auto sign = t.find_first_of("+-");
    base = reg(l, std::string(t.substr(0, sign)));
    off = sign == std::string_view::npos ? 0 : imm(l, std::string(t.substr(sign)));
  };
  auto arity = [&](const detail::AsmLine& l, std::size_t lo, std::size_t hi) {
    if (l.operands.size() < lo || l.operands.size() > hi)
      fail(l.lineno, l.mnemonic + " takes " + std::to_string(lo) + (lo == hi ? "" : "-" + std::to_string(hi)) + " operands");
  };

  for (const auto& l : body) {
    Instruction in;
    in.index = static_cast<int>(out.program.size());
    auto op = parse_enum<Op>(l.mnemonic);
    if (!op) fail(l.lineno, "unknown mnemonic '" + l.mnemonic + "'");
    in.op = *op;
    const auto& o = l.operands;
    switch (in.op) {
      case Op::NOP:
      case Op::RET:
      case Op::HALT: arity(l, 0, 0); break;
      case Op::LOADI:
      case Op::ALLOC:
        arity(l, 2, 2);
        in.rd = reg(l, o[0]);
        in.imm = imm(l, o[1]);
        break;
      case Op::MOV:
        arity(l, 2, 2);
        in.rd = reg(l, o[0]);
        in.rs1 = reg(l, o[1]);
        break;
      case Op::ADD:
      case Op::SUB:
        arity(l, 3, 4);
        in.rd = reg(l, o[0]);
        in.rs1 = reg(l, o[1]);
        if (o.size() == 4) {
          in.rs2 = reg(l, o[2]);
          in.imm = imm(l, o[3]);
        } else if (detail::parse_int(o[2])) {
          in.imm = imm(l, o[2]);
        } else {
          in.rs2 = reg(l, o[2]);
        }
        break;
      case Op::LOAD:
        arity(l, 2, 2);
        in.rd = reg(l, o[0]);
        mem(l, o[1], in.rs1, in.imm);
        break;
      case Op::STORE:
        arity(l, 2, 2);
        mem(l, o[0], in.rs1, in.imm);
        in.rd = reg(l, o[1]);
        break;
      case Op::FREE:
        arity(l, 1, 1);
        in.rs1 = reg(l, o[0]);
        break;
      case Op::CALL:
      case Op::JMP:
        arity(l, 1, 1);
        in.imm = target(l, o[0]);
        break;
      case Op::BEQ:
        arity(l, 3, 3);
        in.rd = reg(l, o[0]);
        in.rs1 = reg(l, o[1]);
        in.imm = target(l, o[2]);
        break;
      case Op::RAND:
        arity(l, 1, 1);
        in.rd = reg(l, o[0]);
        break;
    }
    out.program.push_back(in);
  }
  for (const auto& in : out.program)
    if ((in.op == Op::CALL || is_branch(in.op)) &&
        (in.imm < 0 || static_cast<std::size_t>(in.imm) >= out.program.size()))
      throw Error(ErrorKind::assembler, "ordinal " + std::to_string(in.index), "target outside the program");
  return out;
}

/// Assembles and packs into an MVFW image. `arch` overrides any .arch line.
inline Bytes assemble_image(std::string_view source, std::optional<CpuArch> arch = std::nullopt) {
  auto a = assemble(source);
  return write_image(arch.value_or(a.arch), a.program, a.data, a.symbols);
}

}  // namespace cdt::binscan
