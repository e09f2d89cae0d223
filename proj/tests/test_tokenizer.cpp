#include <doctest.h>

#include <random>
#include <sstream>

#include "binsim/error.hpp"
#include "binsim/tokenizer.hpp"

using namespace binsim;

namespace {

void check_token(const Token& t, const std::string& text, TokenRole role, OperandKind kind) {
  CHECK(t.text == text);
  CHECK(t.role == role);
  CHECK(t.operand_kind == kind);
}

}  // namespace

TEST_CASE("tokenize arm move") {
  const auto toks = tokenize({"MOV R0, R4", "arm"});
  REQUIRE(toks.size() == 3);
  check_token(toks[0], "MOV", TokenRole::kOpcode, OperandKind::kNone);
  check_token(toks[1], "R0", TokenRole::kOperand, OperandKind::kRegister);
  check_token(toks[2], "R4", TokenRole::kOperand, OperandKind::kRegister);
}

TEST_CASE("tokenize bare opcode") {
  const auto toks = tokenize({"RET", "x86"});
  REQUIRE(toks.size() == 1);
  check_token(toks[0], "RET", TokenRole::kOpcode, OperandKind::kNone);
}

TEST_CASE("tokenize mips immediate") {
  const auto toks = tokenize({"ADDIU SP, SP, -0x20", "mips"});
  REQUIRE(toks.size() == 4);
  check_token(toks[0], "ADDIU", TokenRole::kOpcode, OperandKind::kNone);
  check_token(toks[1], "SP", TokenRole::kOperand, OperandKind::kRegister);
  check_token(toks[2], "SP", TokenRole::kOperand, OperandKind::kRegister);
  check_token(toks[3], "-0", TokenRole::kOperand, OperandKind::kImmediate);
}

TEST_CASE("tokenize lowercases and memory operands") {
  const auto toks = tokenize({"mov rax, qword ptr [rbp - 0x8]", "x86_64"});
  REQUIRE(toks.size() == 3);
  check_token(toks[1], "RAX", TokenRole::kOperand, OperandKind::kRegister);
  check_token(toks[2], "QWORDPTR[RBP-0]", TokenRole::kOperand, OperandKind::kMemory);

  const auto arm = tokenize({"LDR R1, [SP, #0x10]", "arm"});
  REQUIRE(arm.size() == 3);
  check_token(arm[2], "[SP,#0]", TokenRole::kOperand, OperandKind::kMemory);

  const auto mips = tokenize({"LW $a0, 16($sp)", "mips"});
  REQUIRE(mips.size() == 3);
  check_token(mips[1], "$A0", TokenRole::kOperand, OperandKind::kRegister);
  check_token(mips[2], "0($SP)", TokenRole::kOperand, OperandKind::kMemory);
}

TEST_CASE("symbols and unknown arch") {
  const auto toks = tokenize({"BL printf", "arm"});
  check_token(toks[1], "PRINTF", TokenRole::kOperand, OperandKind::kSymbol);

  const auto seq = tokenize_snippet("s", "riscv", {"ADDI a0, a0, 4"});
  CHECK(seq.heuristic_operands);
  CHECK(seq.tokens[3].operand_kind == OperandKind::kImmediate);
  CHECK(classify_operand("A0", "riscv").heuristic_only);
  CHECK_FALSE(classify_operand("R0", "arm").heuristic_only);
}

TEST_CASE("malformed instructions") {
  CHECK_THROWS_AS(tokenize({"", "arm"}), MalformedInstruction);
  CHECK_THROWS_AS(tokenize({"   ", "arm"}), MalformedInstruction);
  CHECK_THROWS_AS(tokenize_snippet("s", "arm", {}), InputError);
}

TEST_CASE("split fields keeps bracketed commas") {
  const auto f = split_fields("STMFD SP!, {R4, R5, LR}");
  REQUIRE(f.size() == 3);
  CHECK(f[0] == "STMFD");
  CHECK(f[1] == "SP!");
  CHECK(f[2] == "{R4, R5, LR}");
  CHECK(split_fields("ldr r0, [r1, #4]").size() == 3);
}

TEST_CASE("normalize numeric") {
  CHECK(normalize_numeric("0x10") == "0");
  CHECK(normalize_numeric("-0x4") == "-0");
  CHECK(normalize_numeric("R4") == "R4");
  CHECK(normalize_numeric("#12") == "0");
  CHECK(normalize_numeric("#-0x1F") == "-0");
  CHECK(normalize_numeric("1234") == "0");
  CHECK(normalize_numeric("0xZZ") == "0xZZ");
  CHECK(normalize_memory_expr("[RBP-0x8]") == "[RBP-0]");
  CHECK(classify_operand("[RBP-0]", "x86").kind == OperandKind::kMemory);
}

TEST_CASE("normalize numeric properties") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::int64_t> value(-1000000, 1000000);
  std::uniform_int_distribution<int> style(0, 3);
  const std::vector<std::string> words{"R4", "SP", "LABEL", "FUNC_3", "0xG1", "-", "#", "X0"};
  for (int iter = 0; iter < 2000; ++iter) {
    const std::int64_t v = value(rng);
    std::ostringstream s;
    const int st = style(rng);
    if (st & 2) s << '#';
    if (v < 0) s << '-';
    if (st & 1) {
      s << "0x" << std::hex << (v < 0 ? -v : v);
    } else {
      s << (v < 0 ? -v : v);
    }
    const std::string lit = s.str();
    const std::string n = normalize_numeric(lit);
    CHECK(normalize_numeric(n) == n);
    CHECK(classify_operand(n, "arm").kind == OperandKind::kImmediate);
    CHECK(classify_operand(n, "x86").kind == OperandKind::kImmediate);
    CHECK((n == "0" || n == "-0"));
  }
  for (const auto& w : words) {
    CHECK(normalize_numeric(normalize_numeric(w)) == normalize_numeric(w));
  }
}

TEST_CASE("detokenize round trip") {
  const std::vector<std::pair<std::string, std::string>> lines{
      {"MOV R0, R4", "arm"},           {"RET", "x86"},
      {"ADDIU SP, SP, -0", "mips"},    {"LDR R1, [SP,#0]", "arm"},
      {"STMFD SP!, {R4,R5,LR}", "arm"}, {"CALL FUNC_1", "x86"}};
  for (const auto& [text, arch] : lines) {
    const auto toks = tokenize({text, arch});
    CHECK(detokenize(toks) == text);
    CHECK(tokenize({detokenize(toks), arch}) == toks);
  }
}

TEST_CASE("vocab ids") {
  const auto seq = tokenize_snippet("s", "arm", {"MOV R0, R4"});
  const Vocab v = build_vocab({seq});
  CHECK(v.token_id("<pad>") == 0);
  CHECK(v.token_id("<unk>") == 1);
  CHECK(v.token_id("MOV") == 2);
  CHECK(v.token_id("R0") == 3);
  CHECK(v.token_id("R4") == 4);
  CHECK(v.token_count() == 5);
  CHECK(v.token_id("NOPE") == kUnkId);
  CHECK(v.char_id('M') == 2);
  CHECK(v.char_id('~') == kUnkId);
  CHECK(v.char_ids("MR") == std::vector<std::int32_t>{2, v.char_id('R')});
  CHECK_THROWS_AS(build_vocab({}), InputError);
}

TEST_CASE("vocab json round trip") {
  const auto seq =
      tokenize_snippet("s", "mips", {"ADDIU SP, SP, -0x20", "SW RA, 28(SP)", "JR RA"});
  const Vocab v = build_vocab({seq});
  const Vocab back = Vocab::from_json(v.to_json());
  CHECK(back == v);
  CHECK(back.hash() == v.hash());
  CHECK_THROWS_AS(Vocab::from_json("{"), ParseError);
  CHECK_THROWS_AS(Vocab::from_json(R"({"version":2,"tokens":{},"chars":{}})"), InputError);
}

TEST_CASE("read snippets jsonl") {
  std::istringstream in(
      R"({"id":"a","arch":"arm","instructions":["MOV R0, R4","BX LR"]})"
      "\n\n"
      R"({"id":"b","arch":"mips","instructions":[["MOVE","$a0","$a1"],["JR","$ra"]]})"
      "\n");
  const SnippetStore store = read_snippets(in);
  REQUIRE(store.size() == 2);
  CHECK(store.at("a").length() == 5);
  CHECK(store.at("a").num_instructions == 2);
  CHECK(store.at("b").tokens[1].operand_kind == OperandKind::kRegister);
  CHECK(store.at("b").tokens[3].instr_index == 1);
  CHECK_THROWS_AS(store.at("c"), InputError);

  std::istringstream bad(R"({"id":"a","arch":"arm","instructions":["MOV R0, R4"]})"
                         "\n"
                         R"({"id":"a","arch":"arm","instructions":["RET"]})"
                         "\n");
  try {
    read_snippets(bad);
    FAIL("expected error");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).rfind("line 2:", 0) == 0);
  }
  std::istringstream broken("{not json\n");
  CHECK_THROWS_AS(read_snippets(broken), InputError);
}

TEST_CASE("register table file") {
  RegisterTables t;
  t.load("# custom\nriscv: a0 a1 sp\nalias rv64 riscv\n");
  CHECK(t.knows("rv64"));
  CHECK(t.is_register("rv64", "A0"));
  CHECK_FALSE(t.is_register("riscv", "T9"));
  CHECK(classify_operand("SP", "riscv", t).kind == OperandKind::kRegister);
}
