#include "binsim/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "binsim/error.hpp"

namespace binsim {
namespace {

using nlohmann::json;

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_hex(char c) { return std::isxdigit(static_cast<unsigned char>(c)) != 0; }
bool is_word(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_' || c == '.' || c == '$';
}

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string strip_spaces(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    if (!is_space(c)) out.push_back(c);
  }
  return out;
}

bool has_memory_punct(std::string_view s) {
  return s.find_first_of("[]()") != std::string_view::npos;
}

// Unsigned decimal or 0x-hex.
bool is_unsigned_number(std::string_view s) {
  if (s.size() > 2 && s[0] == '0' && (s[1] == 'x' || s[1] == 'X')) {
    return std::all_of(s.begin() + 2, s.end(), is_hex);
  }
  return !s.empty() && std::all_of(s.begin(), s.end(), is_digit);
}

}  // namespace

std::string_view to_string(TokenRole role) {
  return role == TokenRole::kOpcode ? "opcode" : "operand";
}

std::string_view to_string(OperandKind kind) {
  switch (kind) {
    case OperandKind::kRegister: return "register";
    case OperandKind::kImmediate: return "immediate";
    case OperandKind::kMemory: return "memory";
    case OperandKind::kSymbol: return "symbol";
    case OperandKind::kNone: return "none";
  }
  return "none";
}

TokenRole role_from_string(std::string_view s) {
  if (s == "opcode") return TokenRole::kOpcode;
  if (s == "operand") return TokenRole::kOperand;
  throw InputError("unknown token role '" + std::string(s) + "'");
}

OperandKind kind_from_string(std::string_view s) {
  for (auto k : {OperandKind::kRegister, OperandKind::kImmediate, OperandKind::kMemory,
                 OperandKind::kSymbol, OperandKind::kNone}) {
    if (to_string(k) == s) return k;
  }
  throw InputError("unknown operand kind '" + std::string(s) + "'");
}

bool is_numeric_literal(std::string_view text) {
  if (!text.empty() && text.front() == '#') text.remove_prefix(1);
  if (!text.empty() && text.front() == '-') text.remove_prefix(1);
  return is_unsigned_number(text);
}

std::string normalize_numeric(std::string_view token_text) {
  if (!is_numeric_literal(token_text)) return std::string(token_text);
  std::string_view body = token_text;
  if (body.front() == '#') body.remove_prefix(1);
  return body.front() == '-' ? "-0" : "0";
}

std::string normalize_memory_expr(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word(text[i])) {
      out.push_back(text[i++]);
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_word(text[j])) ++j;
    const std::string_view run = text.substr(i, j - i);
    if (is_unsigned_number(run)) {
      out.push_back('0');
    } else {
      out.append(run);
    }
    i = j;
  }
  return out;
}

OperandClass classify_operand(std::string_view token_text, std::string_view arch,
                              const RegisterTables& tables) {
  OperandClass result;
  result.heuristic_only = !tables.knows(arch);
  if (!result.heuristic_only && tables.is_register(arch, token_text)) {
    result.kind = OperandKind::kRegister;
  } else if (has_memory_punct(token_text)) {
    result.kind = OperandKind::kMemory;
  } else if (is_numeric_literal(token_text)) {
    result.kind = OperandKind::kImmediate;
  } else {
    result.kind = OperandKind::kSymbol;
  }
  return result;
}

std::vector<std::string> split_fields(std::string_view line) {
  line = trim(line);
  if (line.empty()) throw MalformedInstruction(std::string(line));

  std::size_t op_end = 0;
  while (op_end < line.size() && !is_space(line[op_end]) && line[op_end] != ',') ++op_end;
  std::vector<std::string> fields{std::string(line.substr(0, op_end))};

  int depth = 0;
  std::size_t start = op_end;
  auto flush = [&](std::size_t end) {
    const auto field = trim(line.substr(start, end - start));
    if (!field.empty()) fields.emplace_back(field);
  };
  for (std::size_t i = op_end; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '[' || c == '(' || c == '{') {
      ++depth;
    } else if (c == ']' || c == ')' || c == '}') {
      depth = std::max(0, depth - 1);
    } else if (c == ',' && depth == 0) {
      flush(i);
      start = i + 1;
    }
  }
  flush(line.size());
  return fields;
}

std::vector<Token> tokenize_fields(const std::vector<std::string>& fields, std::string_view arch,
                                   const RegisterTables& tables) {
  if (fields.empty()) throw MalformedInstruction("");
  const std::string opcode = upper(strip_spaces(fields.front()));
  if (opcode.empty()) throw MalformedInstruction(fields.front());

  std::vector<Token> tokens;
  tokens.reserve(fields.size());
  tokens.push_back(Token{opcode, TokenRole::kOpcode, OperandKind::kNone, 0, 0});
  for (std::size_t f = 1; f < fields.size(); ++f) {
    const std::string raw = upper(strip_spaces(fields[f]));
    if (raw.empty()) continue;
    const std::string text =
        has_memory_punct(raw) ? normalize_memory_expr(raw) : normalize_numeric(raw);
    const OperandClass cls = classify_operand(text, arch, tables);
    tokens.push_back(Token{text, TokenRole::kOperand, cls.kind, 0, tokens.size()});
  }
  return tokens;
}

std::vector<Token> tokenize(const RawInstruction& instr, const RegisterTables& tables) {
  return tokenize_fields(split_fields(instr.mnemonic_text), instr.arch, tables);
}

TokenSequence tokenize_snippet(std::string snippet_id, std::string arch,
                               const std::vector<std::string>& lines,
                               const RegisterTables& tables) {
  if (lines.empty()) throw InputError("snippet '" + snippet_id + "' has no instructions");
  const bool heuristic = !tables.knows(arch);
  TokenSequence seq{std::move(snippet_id), std::move(arch), {}, lines.size(), heuristic};
  for (std::size_t i = 0; i < lines.size(); ++i) {
    for (Token& tok : tokenize(RawInstruction{lines[i], seq.arch}, tables)) {
      tok.instr_index = i;
      tok.position = seq.tokens.size();
      seq.tokens.push_back(std::move(tok));
    }
  }
  return seq;
}

std::string detokenize(const std::vector<Token>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i == 1) {
      out += ' ';
    } else if (i > 1) {
      out += ", ";
    }
    out += tokens[i].text;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Vocab

namespace {

std::string char_key(char c) {
  const auto u = static_cast<unsigned char>(c);
  if (u >= 0x21 && u < 0x7f) return std::string(1, c);
  char buf[8];
  std::snprintf(buf, sizeof buf, "<0x%02X>", u);
  return buf;
}

char char_from_key(const std::string& key) {
  if (key.size() == 1) return key[0];
  unsigned value = 0;
  if (key.size() == 6 && std::sscanf(key.c_str(), "<0x%2X>", &value) == 1) {
    return static_cast<char>(value);
  }
  throw InputError("vocab: bad char key '" + key + "'");
}

constexpr const char* kPadName = "<pad>";
constexpr const char* kUnkName = "<unk>";

}  // namespace

Vocab::Vocab()
    : tokens_{kPadName, kUnkName},
      token_index_{{kPadName, kPadId}, {kUnkName, kUnkId}},
      chars_{'\0', '\0'} {}

std::int32_t Vocab::token_id(std::string_view text) const {
  auto it = token_index_.find(std::string(text));
  return it == token_index_.end() ? kUnkId : it->second;
}

std::int32_t Vocab::char_id(char c) const {
  auto it = char_index_.find(c);
  return it == char_index_.end() ? kUnkId : it->second;
}

std::vector<std::int32_t> Vocab::char_ids(std::string_view text) const {
  std::vector<std::int32_t> ids;
  ids.reserve(text.size());
  for (char c : text) ids.push_back(char_id(c));
  return ids;
}

void Vocab::add_token(const std::string& text) {
  if (!token_index_.count(text)) {
    token_index_.emplace(text, static_cast<std::int32_t>(tokens_.size()));
    tokens_.push_back(text);
  }
  for (char c : text) add_char(c);
}

void Vocab::add_char(char c) {
  if (!char_index_.count(c)) {
    char_index_.emplace(c, static_cast<std::int32_t>(chars_.size()));
    chars_.push_back(c);
  }
}

std::string Vocab::to_json() const {
  json tokens = json::object();
  tokens[kPadName] = kPadId;
  tokens[kUnkName] = kUnkId;
  for (std::size_t i = 2; i < tokens_.size(); ++i) tokens[tokens_[i]] = i;
  json chars = json::object();
  chars[kPadName] = kPadId;
  chars[kUnkName] = kUnkId;
  for (std::size_t i = 2; i < chars_.size(); ++i) chars[char_key(chars_[i])] = i;
  json doc{{"version", kFormatVersion}, {"tokens", tokens}, {"chars", chars}};
  return doc.dump(1) + "\n";
}

Vocab Vocab::from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte, e.what());
  }
  if (!doc.is_object() || !doc.contains("tokens") || !doc.contains("chars") ||
      !doc.contains("version")) {
    throw InputError("vocab: expected object with version/tokens/chars");
  }
  if (doc["version"] != kFormatVersion) throw InputError("vocab: unsupported version");

  auto dense = [](const json& map, const char* what) {
    std::vector<std::string> by_id(map.size());
    std::vector<bool> seen(map.size(), false);
    for (const auto& [key, value] : map.items()) {
      const auto id = value.get<std::int64_t>();
      if (id < 0 || id >= static_cast<std::int64_t>(map.size()) || seen[id]) {
        throw InputError(std::string("vocab: ids in '") + what + "' are not dense");
      }
      seen[id] = true;
      by_id[id] = key;
    }
    if (by_id.size() < 2 || by_id[kPadId] != kPadName || by_id[kUnkId] != kUnkName) {
      throw InputError(std::string("vocab: '") + what + "' lacks reserved ids");
    }
    return by_id;
  };

  Vocab v;
  const auto tokens = dense(doc["tokens"], "tokens");
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    v.token_index_.emplace(tokens[i], static_cast<std::int32_t>(i));
    v.tokens_.push_back(tokens[i]);
  }
  const auto chars = dense(doc["chars"], "chars");
  for (std::size_t i = 2; i < chars.size(); ++i) {
    const char c = char_from_key(chars[i]);
    v.char_index_.emplace(c, static_cast<std::int32_t>(i));
    v.chars_.push_back(c);
  }
  return v;
}

std::string Vocab::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : to_json()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

Vocab build_vocab(const std::vector<TokenSequence>& corpus) {
  if (corpus.empty()) throw InputError("cannot build a vocabulary from an empty corpus");
  Vocab v;
  for (const auto& seq : corpus) {
    for (const auto& tok : seq.tokens) v.add_token(tok.text);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Snippet store

void SnippetStore::add(TokenSequence seq) {
  if (index_.count(seq.snippet_id)) {
    throw InputError("duplicate snippet id '" + seq.snippet_id + "'");
  }
  index_.emplace(seq.snippet_id, snippets_.size());
  snippets_.push_back(std::move(seq));
}

const TokenSequence& SnippetStore::at(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw InputError("unknown snippet id '" + id + "'");
  return snippets_[it->second];
}

SnippetStore read_snippets(std::istream& in, const RegisterTables& tables) {
  SnippetStore store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    try {
      const json obj = json::parse(line);
      if (!obj.is_object() || !obj.contains("id") || !obj.contains("arch") ||
          !obj.contains("instructions") || !obj["instructions"].is_array()) {
        throw InputError("expected {\"id\", \"arch\", \"instructions\": [...]}");
      }
      const auto id = obj["id"].get<std::string>();
      const auto arch = obj["arch"].get<std::string>();
      const auto& instrs = obj["instructions"];
      if (instrs.empty()) throw InputError("snippet '" + id + "' has no instructions");

      if (instrs.front().is_array()) {
        TokenSequence seq{id, arch, {}, instrs.size(), !tables.knows(arch)};
        for (std::size_t i = 0; i < instrs.size(); ++i) {
          auto fields = instrs[i].get<std::vector<std::string>>();
          for (Token& tok : tokenize_fields(fields, arch, tables)) {
            tok.instr_index = i;
            tok.position = seq.tokens.size();
            seq.tokens.push_back(std::move(tok));
          }
        }
        store.add(std::move(seq));
      } else {
        store.add(tokenize_snippet(id, arch, instrs.get<std::vector<std::string>>(), tables));
      }
    } catch (const json::exception& e) {
      throw InputError(where + e.what());
    } catch (const InputError& e) {
      throw InputError(where + e.what());
    }
  }
  return store;
}

SnippetStore read_snippets_file(const std::string& path, const RegisterTables& tables) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return read_snippets(in, tables);
}

}  // namespace binsim
