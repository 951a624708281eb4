#include <gtest/gtest.h>

#include <random>

#include "cdt/binscan/assembler.hpp"
#include "cdt/binscan/engine.hpp"
#include "support/binscan_oracle.hpp"

namespace {

using namespace cdt;
using namespace cdt::binscan;
using cdt::testing::make;

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::io;
}

Program scan_il(Bytes bytes) {
  auto img = load_binary(std::move(bytes));
  return disassemble(map_sections(img));
}

struct Analysed {
  Program il;
  std::vector<Function> fns;
  CalleeNames names;
  const Function& fn(const std::string& name) const {
    for (const auto& f : fns)
      if (f.name == name) return f;
    throw std::logic_error("no function " + name);
  }
};

Analysed analyse(std::string_view source) {
  auto a = assemble(source);
  Analysed out{a.program, reconstruct_functions(a.program, a.symbols), {}};
  for (auto& f : out.fns) f = analyze_params_stack(f, out.il);
  out.names = callee_names(out.fns);
  return out;
}

std::vector<WeaknessFinding> findings_of(const Analysed& a, const std::string& fn_name = "main") {
  const auto& fn = a.fn(fn_name);
  auto facts = dataflow_taint(fn, build_cfg(fn, a.il), a.il);
  return detect_weaknesses(fn, facts, a.il, a.names);
}

TEST(Image, ArchFromHeader) {
  auto bytes = write_image(CpuArch::MV32, {make(Op::RET)});
  EXPECT_EQ(load_binary(bytes).arch, CpuArch::MV32);
  bytes[5] = 2;
  EXPECT_EQ(load_binary(bytes).arch, CpuArch::MV16);
  bytes[5] = 7;
  EXPECT_EQ(kind_of([&] { load_binary(bytes); }), ErrorKind::unknown_arch);
}

TEST(Image, BadMagicAndTruncation) {
  EXPECT_EQ(kind_of([] { load_binary(to_bytes("\x7f" "ELF\x01\x01\x00\x00")); }), ErrorKind::bad_magic);
  auto bytes = write_image(CpuArch::MV32, {make(Op::RET)}, {}, {{"main", 0}});
  bytes.resize(kHeaderSize + 5);
  EXPECT_EQ(kind_of([&] { load_binary(bytes); }), ErrorKind::truncated);
  auto v2 = write_image(CpuArch::MV32, {make(Op::RET)});
  v2[4] = 2;
  EXPECT_EQ(kind_of([&] { load_binary(v2); }), ErrorKind::unsupported_format_version);
}

TEST(Image, SectionMapping) {
  auto img = load_binary(write_image(CpuArch::MV32, {make(Op::RET)}));
  map_sections(img);
  ASSERT_EQ(img.sections.size(), 1u);
  EXPECT_EQ(img.sections[0].kind, SectionKind::code);
  EXPECT_EQ(img.sections[0].length, 8u);

  auto with_sym = load_binary(write_image(CpuArch::MV16, {make(Op::NOP), make(Op::RET)}, {}, {{"main", 0}, {"tail", 1}}));
  map_sections(with_sym);
  ASSERT_EQ(with_sym.symbols.size(), 2u);
  EXPECT_EQ(with_sym.symbols[0], (Symbol{"main", 0}));
  EXPECT_EQ(symbol_ordinal(with_sym, with_sym.symbols[1]), 1);

  auto data = to_bytes("abcd");
  auto bytes = write_image(CpuArch::MV32, {make(Op::RET)}, data);
  // Point the data section at the code section.
  auto overlap = bytes;
  std::copy(bytes.begin() + 9, bytes.begin() + 13, overlap.begin() + 18);
  auto img2 = load_binary(overlap);
  EXPECT_EQ(kind_of([&] { map_sections(img2); }), ErrorKind::overlapping_sections);

  auto out_of_bounds = bytes;
  out_of_bounds[25] = 0x7f;
  auto img3 = load_binary(out_of_bounds);
  EXPECT_EQ(kind_of([&] { map_sections(img3); }), ErrorKind::section_out_of_bounds);

  auto no_code = bytes;
  no_code[8] = 2;
  auto img4 = load_binary(no_code);
  EXPECT_EQ(kind_of([&] { map_sections(img4); }), ErrorKind::bad_code_sections);
}

TEST(Disassemble, Mv32DirectDecode) {
  Bytes code{0x01, 0x02, 0x00, 0x00, 0x05, 0x00, 0x00, 0x00};
  auto il = decode(code, CpuArch::MV32);
  ASSERT_EQ(il.size(), 1u);
  EXPECT_EQ(il[0].op, Op::LOADI);
  EXPECT_EQ(il[0].rd, 2);
  EXPECT_EQ(il[0].imm, 5);
  EXPECT_EQ(format_instruction(il[0]), "LOADI r2, 5");
}

TEST(Disassemble, Mv16Decode) {
  Bytes code{0x05, 0x21, 0xFE, 0xFF};
  auto il = decode(code, CpuArch::MV16);
  ASSERT_EQ(il.size(), 1u);
  EXPECT_EQ(il[0].op, Op::LOAD);
  EXPECT_EQ(il[0].rd, 2);
  EXPECT_EQ(il[0].rs1, 1);
  EXPECT_EQ(il[0].imm, -2);
}

TEST(Disassemble, Errors) {
  Bytes bad_op{0xFF, 0, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(kind_of([&] { decode(bad_op, CpuArch::MV32); }), ErrorKind::unknown_opcode);
  try {
    Bytes second{0x00, 0, 0, 0, 0, 0, 0, 0, 0xFF, 0, 0, 0, 0, 0, 0, 0};
    decode(second, CpuArch::MV32);
  } catch (const Error& e) {
    EXPECT_EQ(e.where(), "ordinal 1");
  }
  Bytes ragged{0x00, 0, 0};
  EXPECT_EQ(kind_of([&] { decode(ragged, CpuArch::MV16); }), ErrorKind::bad_code_length);
  Bytes bad_reg{0x01, 0x20, 0, 0, 0, 0, 0, 0};
  EXPECT_EQ(kind_of([&] { decode(bad_reg, CpuArch::MV32); }), ErrorKind::bad_register);
  Bytes far_jump{0x0B, 0, 0, 0, 0x09, 0, 0, 0};
  EXPECT_EQ(kind_of([&] { decode(far_jump, CpuArch::MV32); }), ErrorKind::bad_branch_target);
}

TEST(Disassemble, SameProgramBothEncodings) {
  auto src = R"(
main:
    ALLOC r1, 8
    LOADI r2, -3
    BEQ r2, r0, .out
    LOAD r3, [r1+7]
    CALL helper
.out:
    FREE r1
    RET
helper:
    RAND r0
    RET
)";
  auto il32 = scan_il(assemble_image(src, CpuArch::MV32));
  auto il16 = scan_il(assemble_image(src, CpuArch::MV16));
  EXPECT_EQ(il32, il16);
  EXPECT_EQ(il32.size(), 9u);
}

TEST(Assembler, RejectsBadInput) {
  EXPECT_EQ(kind_of([] { assemble("FROB r1"); }), ErrorKind::assembler);
  EXPECT_EQ(kind_of([] { assemble("LOADI r16, 1"); }), ErrorKind::assembler);
  EXPECT_EQ(kind_of([] { assemble("JMP nowhere"); }), ErrorKind::assembler);
  EXPECT_EQ(kind_of([] { assemble_image("ADD r1, r2, r3, 1\nRET", CpuArch::MV16); }), ErrorKind::assembler);
  EXPECT_EQ(kind_of([] { assemble_image("LOADI r1, 70000\nRET", CpuArch::MV16); }), ErrorKind::assembler);
}

TEST(Functions, SingleFunction) {
  auto a = analyse("main:\n LOADI r1, 1\n MOV r2, r1\n RET\n");
  ASSERT_EQ(a.fns.size(), 1u);
  EXPECT_EQ(a.fns[0].name, "main");
  EXPECT_EQ(a.fns[0].body, (std::vector<int>{0, 1, 2}));
}

TEST(Functions, CallToUnlabelledTargetIsSynthesized) {
  std::string src = "main:\n CALL 40\n RET\n";
  for (int i = 2; i < 40; ++i) src += " NOP\n";
  src += " RAND r0\n RET\n";
  auto a = analyse(src);
  ASSERT_EQ(a.fns.size(), 2u);
  EXPECT_EQ(a.fns[1].name, "fn_40");
  EXPECT_EQ(a.fns[1].entry, 40);
  EXPECT_EQ(a.fns[1].body, (std::vector<int>{40, 41}));
  EXPECT_EQ(a.fns[0].body, (std::vector<int>{0, 1}));
}

TEST(Functions, EmptyCodeSection) { EXPECT_TRUE(reconstruct_functions({}, {}).empty()); }

TEST(Functions, BodiesAreDisjoint) {
  std::mt19937 rng(11);
  for (int i = 0; i < 300; ++i) {
    auto g = cdt::testing::random_program(rng, 1 + i % 11);
    auto fns = reconstruct_functions(g.il, g.symbols);
    std::set<int> seen;
    for (const auto& f : fns) {
      EXPECT_TRUE(f.contains(f.entry));
      for (int o : f.body) EXPECT_TRUE(seen.insert(o).second) << "ordinal " << o << " owned twice";
    }
  }
}

TEST(ParamsStack, ReadBeforeWrite) {
  auto a = analyse("main:\n ADD r2, r0, r1, 0\n RET\n");
  EXPECT_EQ(a.fn("main").params, 2);
  auto b = analyse("main:\n LOADI r0, 1\n MOV r1, r0\n RET\n");
  EXPECT_EQ(b.fn("main").params, 0);
  auto c = analyse("main:\n ALLOC r1, 4\n ALLOC r2, 4\n RET\n");
  EXPECT_EQ(c.fn("main").stack_slots, 2);
  auto d = analyse("main:\n LOADI r5, 0\n BEQ r5, r5, .x\n MOV r4, r3\n.x:\n RET\n");
  EXPECT_EQ(d.fn("main").params, 4);
}

TEST(Cfg, StraightLine) {
  auto a = analyse("main:\n LOADI r1, 1\n MOV r2, r1\n RET\n");
  auto cfg = build_cfg(a.fn("main"), a.il);
  EXPECT_EQ(cfg.blocks.size(), 1u);
  EXPECT_EQ(cfg.internal_edges(), 0u);
}

TEST(Cfg, SingleBranch) {
  auto a = analyse("main:\n BEQ r0, r1, .t\n NOP\n.t:\n RET\n");
  auto cfg = build_cfg(a.fn("main"), a.il);
  EXPECT_EQ(cfg.out_edges(0).size(), 2u);
}

TEST(Cfg, Diamond) {
  auto a = analyse(R"(
main:
    BEQ r0, r1, .else
    LOADI r2, 1
    JMP .join
.else:
    LOADI r2, 2
.join:
    RET
)");
  auto cfg = build_cfg(a.fn("main"), a.il);
  EXPECT_EQ(cfg.blocks.size(), 4u);
  EXPECT_EQ(cfg.internal_edges(), 4u);
  for (std::size_t b = 0; b < cfg.blocks.size(); ++b) {
    auto last = a.il[static_cast<std::size_t>(cfg.blocks[b].last)].op;
    if (last != Op::HALT) {
      EXPECT_FALSE(cfg.out_edges(static_cast<int>(b)).empty());
    }
  }
}

TEST(Dataflow, FreeMakesFreed) {
  auto a = analyse("main:\n ALLOC r1, 8\n FREE r1\n RET\n");
  auto facts = dataflow_taint(a.fn("main"), build_cfg(a.fn("main"), a.il), a.il);
  EXPECT_EQ(facts.at_exit[1], (ValueSet{AbsValue::freed(0)}));
}

TEST(Dataflow, OneArmFreedJoins) {
  auto a = analyse(R"(
main:
    ALLOC r1, 8
    BEQ r0, r2, .skip
    FREE r1
.skip:
    RET
)");
  const auto& fn = a.fn("main");
  auto facts = dataflow_taint(fn, build_cfg(fn, a.il), a.il);
  EXPECT_EQ(facts.at_exit[1], (ValueSet{AbsValue::alloc(0, 8), AbsValue::freed(0)}));
  auto oracle = cdt::testing::enumerate_paths(a.il, fn, a.names, default_sensitive_sinks());
  EXPECT_EQ(cdt::testing::facts_as_strings(facts), oracle.before);
}

TEST(Dataflow, LoopsConvergeUnderCap) {
  auto a = analyse(R"(
main:
    LOADI r1, 0
    LOADI r2, 100
.top:
    ADD r1, r1, 1
    ALLOC r3, 4
    FREE r3
    BEQ r1, r2, .done
    JMP .top
.done:
    LOAD r4, [r3+0]
    RET
)");
  const auto& fn = a.fn("main");
  auto facts = dataflow_taint(fn, build_cfg(fn, a.il), a.il);
  EXPECT_LE(facts.iterations, facts.iteration_cap);
  auto fs = detect_weaknesses(fn, facts, a.il, a.names);
  ASSERT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs[0].cwe_id, "CWE-416");
}

TEST(Weakness, UseAfterFree) {
  auto a = analyse("main:\n ALLOC r1, 8\n FREE r1\n LOAD r2, [r1+0]\n RET\n");
  auto fs = findings_of(a);
  ASSERT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs[0].cwe_id, "CWE-416");
  EXPECT_EQ(fs[0].site, 2);
  EXPECT_EQ(fs[0].trace, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(fs[0].severity, Severity::high);
}

TEST(Weakness, OffByOneRead) {
  auto a = analyse("main:\n ALLOC r1, 8\n LOAD r2, [r1+8]\n LOAD r2, [r1+7]\n STORE [r1-1], r2\n RET\n");
  auto fs = findings_of(a);
  ASSERT_EQ(fs.size(), 2u);
  EXPECT_EQ(fs[0].cwe_id, "CWE-125");
  EXPECT_EQ(fs[0].site, 1);
  EXPECT_EQ(fs[1].cwe_id, "CWE-119");
  EXPECT_EQ(fs[1].site, 3);
}

TEST(Weakness, RandomnessIntoSink) {
  auto a = analyse("main:\n RAND r0\n CALL make_key\n CALL helper\n RET\nmake_key:\n RET\nhelper:\n RET\n");
  auto fs = findings_of(a);
  ASSERT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs[0].cwe_id, "CWE-338");
  EXPECT_EQ(fs[0].site, 1);
  EXPECT_EQ(fs[0].severity, Severity::low);
  auto clean = analyse("main:\n RAND r5\n CALL make_key\n RET\nmake_key:\n RET\n");
  EXPECT_TRUE(findings_of(clean).empty());
}

TEST(Remediation, Templates) {
  WeaknessFinding f;
  f.cwe_id = "CWE-416";
  f.function = "main";
  f.site = 5;
  auto text = suggest_remediation(f);
  EXPECT_NE(text.find("ordinal 5"), std::string::npos);
  EXPECT_NE(text.find("after free"), std::string::npos);
  f.cwe_id = "CWE-125";
  EXPECT_NE(suggest_remediation(f).find("bound the offset"), std::string::npos);
  f.cwe_id = "CWE-999";
  EXPECT_NE(suggest_remediation(f).find("review the flagged instruction"), std::string::npos);
  EXPECT_EQ(suggest_remediation(f), suggest_remediation(f));
}

ValidationResult validate_only(const Analysed& a, const std::string& cwe) {
  const auto& fn = a.fn("main");
  for (const auto& f : findings_of(a))
    if (f.cwe_id == cwe) return dynamic_validate(fn, f, a.il, a.names);
  ADD_FAILURE() << "no " << cwe << " finding";
  return {};
}

TEST(DynamicValidation, StraightLineConfirmed) {
  auto a = analyse("main:\n ALLOC r1, 8\n FREE r1\n LOAD r2, [r1+0]\n RET\n");
  EXPECT_EQ(validate_only(a, "CWE-416").status, Validation::confirmed);
}

TEST(DynamicValidation, ConstantGuardRefutes) {
  auto a = analyse(R"(
main:
    ALLOC r1, 8
    LOADI r2, 1
    LOADI r3, 2
    BEQ r2, r3, .bad
    RET
.bad:
    FREE r1
    LOAD r4, [r1+0]
    RET
)");
  auto v = validate_only(a, "CWE-416");
  EXPECT_EQ(v.status, Validation::unconfirmed);
  EXPECT_NE(v.reason.find("left the witness path"), std::string::npos);
}

TEST(DynamicValidation, FreeInputFollowsTrace) {
  auto a = analyse(R"(
main:
    ALLOC r1, 8
    BEQ r0, r5, .bad
    RET
.bad:
    FREE r1
    STORE [r1+2], r0
    RET
)");
  EXPECT_EQ(validate_only(a, "CWE-416").status, Validation::confirmed);
}

TEST(DynamicValidation, InfiniteLoopExhaustsBudget) {
  auto a = analyse(R"(
main:
    ALLOC r1, 2
    LOADI r2, 0
    LOADI r3, 1
.spin:
    BEQ r2, r3, .out
    JMP .spin
.out:
    LOAD r4, [r1+5]
    RET
)");
  auto v = validate_only(a, "CWE-125");
  EXPECT_EQ(v.status, Validation::unconfirmed);
  EXPECT_NE(v.reason.find("budget"), std::string::npos);
}

TEST(DynamicValidation, RandomnessSinkConfirmed) {
  auto a = analyse("main:\n RAND r1\n ADD r2, r1, 4\n MOV r0, r2\n CALL make_key\n RET\nmake_key:\n RET\n");
  EXPECT_EQ(validate_only(a, "CWE-338").status, Validation::confirmed);
}

// Every finding's trace is a real path from the entry to the site.
void expect_real_path(const Program& il, const Function& fn, const WeaknessFinding& f) {
  ASSERT_FALSE(f.trace.empty());
  EXPECT_EQ(f.trace.front(), fn.entry);
  EXPECT_EQ(f.trace.back(), f.site);
  for (std::size_t i = 1; i < f.trace.size(); ++i) {
    auto succ = successors(il, f.trace[i - 1]);
    EXPECT_NE(std::find(succ.begin(), succ.end(), f.trace[i]), succ.end());
    EXPECT_TRUE(fn.contains(f.trace[i]));
  }
}

TEST(Oracle, RandomAcyclicProgramsMatchPathEnumeration) {
  std::mt19937 rng(2024);
  for (int i = 0; i < 1500; ++i) {
    auto g = cdt::testing::random_program(rng, 1 + i % 9, false);
    auto fns = reconstruct_functions(g.il, g.symbols);
    auto names = callee_names(fns);
    const auto& main = fns.front();
    ASSERT_EQ(main.name, "main");
    auto facts = dataflow_taint(main, build_cfg(main, g.il), g.il);
    auto found = detect_weaknesses(main, facts, g.il, names);
    auto oracle = cdt::testing::enumerate_paths(g.il, main, names, default_sensitive_sinks());
    ASSERT_EQ(cdt::testing::findings_as_map(found), oracle.findings) << "program " << i;
    ASSERT_EQ(cdt::testing::facts_as_strings(facts), oracle.before) << "program " << i;
    for (const auto& f : found) {
      expect_real_path(g.il, main, f);
      auto v = dynamic_validate(main, f, g.il, names);
      if (v.status == Validation::confirmed) {
        // Soundness: a confirmed label needs a concrete run; replay must agree.
        EXPECT_EQ(dynamic_validate(main, f, g.il, names).status, Validation::confirmed);
      }
    }
  }
}

TEST(Engine, ArchIndependentFindings) {
  std::mt19937 rng(77);
  for (int i = 0; i < 100; ++i) {
    auto g = cdt::testing::random_program(rng, 3 + i % 9);
    auto r32 = scan_binary(write_image(CpuArch::MV32, g.il, {}, g.symbols), "x");
    auto r16 = scan_binary(write_image(CpuArch::MV16, g.il, {}, g.symbols), "x");
    EXPECT_EQ(r32.findings, r16.findings);
    EXPECT_EQ(r32.functions, r16.functions);
  }
}

TEST(Engine, ReportJsonRoundTrip) {
  auto bytes = assemble_image("main:\n ALLOC r1, 8\n FREE r1\n LOAD r2, [r1+0]\n RET\n");
  auto rep = scan_binary(bytes, "bin/app.mvfw");
  ASSERT_EQ(rep.findings.size(), 1u);
  EXPECT_EQ(rep.findings[0].validation, Validation::confirmed);
  EXPECT_EQ(report_from_json(to_json(rep)), rep);
}

}  // namespace
