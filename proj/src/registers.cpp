#include "binsim/registers.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "binsim/error.hpp"

namespace binsim {
namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

void add_range(RegisterTables& t, const std::string& table, const std::string& prefix, int lo,
               int hi, const std::string& suffix = "") {
  for (int i = lo; i <= hi; ++i) t.add(table, prefix + std::to_string(i) + suffix);
}

RegisterTables make_builtin() {
  RegisterTables t;

  // x86 / x86-64
  for (const char* r :
       {"RAX", "RBX", "RCX", "RDX", "RSI", "RDI", "RBP", "RSP", "RIP", "EAX", "EBX", "ECX",
        "EDX", "ESI", "EDI", "EBP", "ESP", "EIP", "AX",  "BX",  "CX",  "DX",  "SI",  "DI",
        "BP",  "SP",  "AL",  "BL",  "CL",  "DL",  "AH",  "BH",  "CH",  "DH",  "SIL", "DIL",
        "BPL", "SPL", "CS",  "DS",  "ES",  "FS",  "GS",  "SS",  "EFLAGS", "RFLAGS"}) {
    t.add("x86", r);
  }
  add_range(t, "x86", "R", 8, 15);
  add_range(t, "x86", "R", 8, 15, "D");
  add_range(t, "x86", "R", 8, 15, "W");
  add_range(t, "x86", "R", 8, 15, "B");
  add_range(t, "x86", "XMM", 0, 15);
  add_range(t, "x86", "YMM", 0, 15);
  add_range(t, "x86", "ST", 0, 7);
  add_range(t, "x86", "MM", 0, 7);

  // ARM / AArch32
  add_range(t, "arm", "R", 0, 15);
  add_range(t, "arm", "S", 0, 31);
  add_range(t, "arm", "D", 0, 31);
  add_range(t, "arm", "Q", 0, 15);
  for (const char* r : {"SP", "LR", "PC", "FP", "IP", "SB", "SL", "CPSR", "APSR", "SPSR"}) {
    t.add("arm", r);
  }

  // MIPS32, with and without the '$' sigil.
  for (const char* r : {"ZERO", "AT", "V0", "V1", "A0", "A1", "A2", "A3", "T0", "T1", "T2",
                        "T3", "T4", "T5", "T6", "T7", "T8", "T9", "S0", "S1", "S2", "S3",
                        "S4", "S5", "S6", "S7", "K0", "K1", "GP", "SP", "FP", "RA", "HI",
                        "LO"}) {
    t.add("mips", r);
    t.add("mips", std::string("$") + r);
  }
  add_range(t, "mips", "$", 0, 31);
  add_range(t, "mips", "F", 0, 31);
  add_range(t, "mips", "$F", 0, 31);

  for (const char* a : {"x86", "x86-64", "x86_64", "amd64", "i386", "i686", "x64"}) {
    t.alias(a, "x86");
  }
  for (const char* a : {"arm", "arm32", "aarch32", "armv7", "armel", "armhf"}) t.alias(a, "arm");
  for (const char* a : {"mips", "mips32", "mipsel", "mipseb"}) t.alias(a, "mips");
  return t;
}

}  // namespace

const RegisterTables& RegisterTables::builtin() {
  static const RegisterTables tables = make_builtin();
  return tables;
}

std::string RegisterTables::resolve(std::string_view arch) const {
  std::string key(arch);
  for (char& c : key) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (auto it = aliases_.find(key); it != aliases_.end()) return it->second;
  if (tables_.count(key)) return key;
  return {};
}

bool RegisterTables::is_register(std::string_view arch, std::string_view name) const {
  const std::string table = resolve(arch);
  if (table.empty()) return false;
  const auto& regs = tables_.at(table);
  return regs.find(upper(name)) != regs.end();
}

void RegisterTables::add(const std::string& table, std::string_view reg) {
  tables_[table].insert(upper(reg));
}

void RegisterTables::alias(const std::string& arch_tag, const std::string& table) {
  aliases_[arch_tag] = table;
}

void RegisterTables::load(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string head;
    if (!(fields >> head)) continue;
    if (head == "alias") {
      std::string tag, table;
      if (!(fields >> tag >> table)) {
        throw InputError("register table line " + std::to_string(lineno) +
                         ": alias needs <tag> <arch>");
      }
      alias(tag, table);
      continue;
    }
    if (head.back() != ':') {
      throw InputError("register table line " + std::to_string(lineno) +
                       ": expected '<arch>: REG ...'");
    }
    head.pop_back();
    for (char& c : head) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    std::string reg;
    while (fields >> reg) add(head, reg);
    if (!aliases_.count(head)) alias(head, head);
  }
}

void RegisterTables::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open register table " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  load(buf.str());
}

}  // namespace binsim
