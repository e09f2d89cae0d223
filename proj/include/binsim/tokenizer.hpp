#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "binsim/registers.hpp"

namespace binsim {

enum class TokenRole { kOpcode, kOperand };

enum class OperandKind { kRegister, kImmediate, kMemory, kSymbol, kNone };

std::string_view to_string(TokenRole role);
std::string_view to_string(OperandKind kind);
TokenRole role_from_string(std::string_view s);
OperandKind kind_from_string(std::string_view s);

struct RawInstruction {
  std::string mnemonic_text;
  std::string arch;
};

struct Token {
  std::string text;
  TokenRole role = TokenRole::kOpcode;
  OperandKind operand_kind = OperandKind::kNone;
  std::size_t instr_index = 0;
  std::size_t position = 0;

  bool is_opcode() const { return role == TokenRole::kOpcode; }
  bool operator==(const Token&) const = default;
};

struct TokenSequence {
  std::string snippet_id;
  std::string arch;
  std::vector<Token> tokens;
  std::size_t num_instructions = 0;
  // Set when `arch` has no register table and operands were classified
  // heuristically.
  bool heuristic_operands = false;

  std::size_t length() const { return tokens.size(); }
};

struct OperandClass {
  OperandKind kind = OperandKind::kSymbol;
  bool heuristic_only = false;
};

// Replaces a numeric constant (decimal or 0x-hex, optional '-' and an
// optional ARM-style '#' marker) with "0", keeping a leading minus as "-0".
// Anything else is returned unchanged.
std::string normalize_numeric(std::string_view token_text);

// Normalizes every numeric run inside a memory expression, keeping the
// surrounding punctuation: "[RBP-0x8]" -> "[RBP-0]".
std::string normalize_memory_expr(std::string_view text);

bool is_numeric_literal(std::string_view text);

OperandClass classify_operand(std::string_view token_text, std::string_view arch,
                              const RegisterTables& tables = RegisterTables::builtin());

// Splits one instruction line into opcode and operand fields. Commas inside
// brackets, parentheses or braces do not split.
std::vector<std::string> split_fields(std::string_view line);

std::vector<Token> tokenize(const RawInstruction& instr,
                            const RegisterTables& tables = RegisterTables::builtin());

// Normalizes and classifies pre-split fields (first field is the opcode).
std::vector<Token> tokenize_fields(const std::vector<std::string>& fields, std::string_view arch,
                                   const RegisterTables& tables = RegisterTables::builtin());

TokenSequence tokenize_snippet(std::string snippet_id, std::string arch,
                               const std::vector<std::string>& lines,
                               const RegisterTables& tables = RegisterTables::builtin());

// Renders tokens of one instruction back to text: "OPC A, B".
std::string detokenize(const std::vector<Token>& tokens);

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnkId = 1;

class Vocab {
 public:
  static constexpr int kFormatVersion = 1;

  Vocab();

  std::int32_t token_id(std::string_view text) const;
  std::int32_t char_id(char c) const;
  std::vector<std::int32_t> char_ids(std::string_view text) const;

  std::size_t token_count() const { return tokens_.size(); }
  std::size_t char_count() const { return chars_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  void add_token(const std::string& text);

  std::string to_json() const;
  static Vocab from_json(std::string_view text);
  // Stable FNV-1a digest of the serialized form.
  std::string hash() const;

  bool operator==(const Vocab& other) const {
    return tokens_ == other.tokens_ && chars_ == other.chars_;
  }

 private:
  void add_char(char c);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> token_index_;
  std::vector<char> chars_;
  std::unordered_map<char, std::int32_t> char_index_;
};

Vocab build_vocab(const std::vector<TokenSequence>& corpus);

// Snippets keyed by id, in file order.
class SnippetStore {
 public:
  void add(TokenSequence seq);
  const TokenSequence& at(const std::string& id) const;
  bool contains(const std::string& id) const { return index_.count(id) != 0; }
  const std::vector<TokenSequence>& all() const { return snippets_; }
  std::size_t size() const { return snippets_.size(); }

 private:
  std::vector<TokenSequence> snippets_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Reads the JSON-lines disassembly format. Errors carry the 1-based line.
SnippetStore read_snippets(std::istream& in,
                           const RegisterTables& tables = RegisterTables::builtin());
SnippetStore read_snippets_file(const std::string& path,
                                const RegisterTables& tables = RegisterTables::builtin());

}  // namespace binsim
