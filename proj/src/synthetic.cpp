#include "binsim/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "binsim/error.hpp"

namespace binsim::synthetic {
namespace {

constexpr int kNumGeneralRegs = 8;
constexpr int kStackReg = 8;
constexpr int kFrameReg = 9;

const char* const kArmRegs[] = {"R0", "R1", "R2", "R3", "R4", "R5", "R6", "R7", "SP", "R11"};
const char* const kMipsRegs[] = {"V0", "V1", "A0", "A1", "A2", "A3", "T0", "T1", "SP", "FP"};

std::string reg(Dialect d, int index) {
  return d == Dialect::kArm ? kArmRegs[index] : kMipsRegs[index];
}

std::string number(std::int64_t v) {
  const std::uint64_t mag = v < 0 ? static_cast<std::uint64_t>(-v) : static_cast<std::uint64_t>(v);
  char buf[32];
  if (mag >= 256) {
    std::snprintf(buf, sizeof buf, "%s0x%llx", v < 0 ? "-" : "", static_cast<unsigned long long>(mag));
  } else {
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
  }
  return buf;
}

bool fits_imm16(std::int64_t v) { return v >= -32768 && v <= 32767; }

void render_arm(const Instr& in, std::vector<std::string>& out) {
  const auto r = [](int i) { return reg(Dialect::kArm, i); };
  auto alu = [&](const char* opc) {
    out.push_back(std::string(opc) + " " + r(in.dst) + ", " + r(in.src1) + ", " + r(in.src2));
  };
  switch (in.op) {
    case Op::kLoadImm: out.push_back("MOV " + r(in.dst) + ", #" + number(in.imm)); break;
    case Op::kAdd: alu("ADD"); break;
    case Op::kSub: alu("SUB"); break;
    case Op::kAnd: alu("AND"); break;
    case Op::kOr: alu("ORR"); break;
    case Op::kXor: alu("EOR"); break;
    case Op::kMul: alu("MUL"); break;
    case Op::kAddImm:
      out.push_back("ADD " + r(in.dst) + ", " + r(in.src1) + ", #" + number(in.imm));
      break;
    case Op::kLoad:
      out.push_back("LDR " + r(in.dst) + ", [" + r(in.src1) + ", #" + number(in.imm) + "]");
      break;
    case Op::kStore:
      out.push_back("STR " + r(in.dst) + ", [" + r(in.src1) + ", #" + number(in.imm) + "]");
      break;
    case Op::kMove: out.push_back("MOV " + r(in.dst) + ", " + r(in.src1)); break;
    case Op::kCall: out.push_back("BL " + in.symbol); break;
    case Op::kBranchEq:
    case Op::kBranchNe:
    case Op::kBranchLt: {
      out.push_back("CMP " + r(in.src1) + ", " + r(in.src2));
      const char* b = in.op == Op::kBranchEq ? "BEQ " : in.op == Op::kBranchNe ? "BNE " : "BLT ";
      out.push_back(b + in.symbol);
      break;
    }
    case Op::kJump: out.push_back("B " + in.symbol); break;
    case Op::kLoadAddr: out.push_back("ADR " + r(in.dst) + ", " + in.symbol); break;
    case Op::kReturn: out.push_back("BX LR"); break;
  }
}

void render_mips(const Instr& in, std::vector<std::string>& out) {
  const auto r = [](int i) { return reg(Dialect::kMips, i); };
  // Commutative ops list their sources in reverse order.
  auto alu = [&](const char* opc, bool swap) {
    const int a = swap ? in.src2 : in.src1;
    const int b = swap ? in.src1 : in.src2;
    out.push_back(std::string(opc) + " " + r(in.dst) + ", " + r(a) + ", " + r(b));
  };
  switch (in.op) {
    case Op::kLoadImm:
      if (fits_imm16(in.imm)) {
        out.push_back("LI " + r(in.dst) + ", " + number(in.imm));
      } else {
        const std::uint64_t bits = static_cast<std::uint32_t>(in.imm);
        out.push_back("LUI " + r(in.dst) + ", " + number(static_cast<std::int64_t>(bits >> 16)));
        out.push_back("ORI " + r(in.dst) + ", " + r(in.dst) + ", " +
                      number(static_cast<std::int64_t>(bits & 0xffff)));
      }
      break;
    case Op::kAdd: alu("ADDU", true); break;
    case Op::kSub: alu("SUBU", false); break;
    case Op::kAnd: alu("AND", true); break;
    case Op::kOr: alu("OR", true); break;
    case Op::kXor: alu("XOR", true); break;
    case Op::kMul: alu("MUL", true); break;
    case Op::kAddImm:
      out.push_back("ADDIU " + r(in.dst) + ", " + r(in.src1) + ", " + number(in.imm));
      break;
    case Op::kLoad:
      out.push_back("LW " + r(in.dst) + ", " + number(in.imm) + "(" + r(in.src1) + ")");
      break;
    case Op::kStore:
      out.push_back("SW " + r(in.dst) + ", " + number(in.imm) + "(" + r(in.src1) + ")");
      break;
    case Op::kMove: out.push_back("MOVE " + r(in.dst) + ", " + r(in.src1)); break;
    case Op::kCall:
      out.push_back("JAL " + in.symbol);
      out.push_back("NOP");
      break;
    case Op::kBranchEq:
      out.push_back("BEQ " + r(in.src1) + ", " + r(in.src2) + ", " + in.symbol);
      break;
    case Op::kBranchNe:
      out.push_back("BNE " + r(in.src1) + ", " + r(in.src2) + ", " + in.symbol);
      break;
    case Op::kBranchLt:
      out.push_back("SLT AT, " + r(in.src1) + ", " + r(in.src2));
      out.push_back("BNE AT, ZERO, " + in.symbol);
      break;
    case Op::kJump: out.push_back("J " + in.symbol); break;
    case Op::kLoadAddr: out.push_back("LA " + r(in.dst) + ", " + in.symbol); break;
    case Op::kReturn:
      out.push_back("JR RA");
      out.push_back("NOP");
      break;
  }
}

std::string opcode_of(const std::string& line) {
  const auto end = line.find(' ');
  return line.substr(0, end);
}

bool has_immediate_operand(const std::string& line) { return line.find('#') != std::string::npos; }

}  // namespace

std::string dialect_arch(Dialect d) { return d == Dialect::kArm ? "arm" : "mips"; }

std::string snippet_id(std::size_t function, Dialect d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "f%05zu.%s", function, d == Dialect::kArm ? "arm" : "mips");
  return buf;
}

std::vector<std::string> render(const Function& f, Dialect d) {
  std::vector<std::string> out;
  for (const Instr& in : f) {
    if (d == Dialect::kArm) {
      render_arm(in, out);
    } else {
      render_mips(in, out);
    }
  }
  return out;
}

std::vector<Op> skeleton(const Function& f) {
  std::vector<Op> out;
  out.reserve(f.size());
  for (const Instr& in : f) out.push_back(in.op);
  return out;
}

std::vector<Op> recover_skeleton(const std::vector<std::string>& lines, Dialect d) {
  std::vector<Op> out;
  auto fail = [](const std::string& line) {
    throw InputError("cannot lift '" + line + "'");
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const std::string opc = opcode_of(line);
    if (d == Dialect::kArm) {
      if (opc == "MOV") {
        out.push_back(has_immediate_operand(line) ? Op::kLoadImm : Op::kMove);
      } else if (opc == "ADD") {
        out.push_back(has_immediate_operand(line) ? Op::kAddImm : Op::kAdd);
      } else if (opc == "SUB") {
        out.push_back(Op::kSub);
      } else if (opc == "AND") {
        out.push_back(Op::kAnd);
      } else if (opc == "ORR") {
        out.push_back(Op::kOr);
      } else if (opc == "EOR") {
        out.push_back(Op::kXor);
      } else if (opc == "MUL") {
        out.push_back(Op::kMul);
      } else if (opc == "LDR") {
        out.push_back(Op::kLoad);
      } else if (opc == "STR") {
        out.push_back(Op::kStore);
      } else if (opc == "BL") {
        out.push_back(Op::kCall);
      } else if (opc == "CMP") {
        if (i + 1 >= lines.size()) fail(line);
        const std::string next = opcode_of(lines[++i]);
        if (next == "BEQ") {
          out.push_back(Op::kBranchEq);
        } else if (next == "BNE") {
          out.push_back(Op::kBranchNe);
        } else if (next == "BLT") {
          out.push_back(Op::kBranchLt);
        } else {
          fail(lines[i]);
        }
      } else if (opc == "B") {
        out.push_back(Op::kJump);
      } else if (opc == "ADR") {
        out.push_back(Op::kLoadAddr);
      } else if (opc == "BX") {
        out.push_back(Op::kReturn);
      } else {
        fail(line);
      }
    } else {
      auto skip_next = [&](const char* expected) {
        if (i + 1 >= lines.size() || opcode_of(lines[i + 1]) != expected) fail(line);
        ++i;
      };
      if (opc == "LI") {
        out.push_back(Op::kLoadImm);
      } else if (opc == "LUI") {
        skip_next("ORI");
        out.push_back(Op::kLoadImm);
      } else if (opc == "ADDU") {
        out.push_back(Op::kAdd);
      } else if (opc == "SUBU") {
        out.push_back(Op::kSub);
      } else if (opc == "AND") {
        out.push_back(Op::kAnd);
      } else if (opc == "OR") {
        out.push_back(Op::kOr);
      } else if (opc == "XOR") {
        out.push_back(Op::kXor);
      } else if (opc == "MUL") {
        out.push_back(Op::kMul);
      } else if (opc == "ADDIU") {
        out.push_back(Op::kAddImm);
      } else if (opc == "LW") {
        out.push_back(Op::kLoad);
      } else if (opc == "SW") {
        out.push_back(Op::kStore);
      } else if (opc == "MOVE") {
        out.push_back(Op::kMove);
      } else if (opc == "JAL") {
        skip_next("NOP");
        out.push_back(Op::kCall);
      } else if (opc == "BEQ") {
        out.push_back(Op::kBranchEq);
      } else if (opc == "BNE") {
        out.push_back(Op::kBranchNe);
      } else if (opc == "SLT") {
        skip_next("BNE");
        out.push_back(Op::kBranchLt);
      } else if (opc == "J") {
        out.push_back(Op::kJump);
      } else if (opc == "LA") {
        out.push_back(Op::kLoadAddr);
      } else if (opc == "JR") {
        skip_next("NOP");
        out.push_back(Op::kReturn);
      } else {
        fail(line);
      }
    }
  }
  return out;
}

void CorpusSpec::validate() const {
  if (num_functions < 2) throw InputError("synthetic corpus needs at least 2 functions");
  if (min_ops < 1 || max_ops < min_ops) throw InputError("synthetic corpus: bad op range");
  if (symbol_pool < 1) throw InputError("synthetic corpus: symbol pool must be positive");
  if (num_negatives > num_functions - 1) {
    throw InputError("synthetic corpus: " + std::to_string(num_negatives) +
                     " negatives requested but only " + std::to_string(num_functions - 1) +
                     " other functions exist");
  }
  if (family_size < 1) throw InputError("synthetic corpus: family size must be positive");
  if (mutation_rate < 0.0 || mutation_rate > 1.0) {
    throw InputError("synthetic corpus: mutation rate must be in [0, 1]");
  }
  if (train_fraction < 0.0 || dev_fraction < 0.0 || train_fraction + dev_fraction > 1.0) {
    throw InputError("synthetic corpus: bad split fractions");
  }
}

namespace {

class InstrSampler {
 public:
  explicit InstrSampler(const CorpusSpec& spec) : spec_(spec) {}

  Instr instr(std::mt19937_64& rng) const;
  void fill_operands(Instr& in, std::mt19937_64& rng) const;

 private:
  const CorpusSpec& spec_;
};

void InstrSampler::fill_operands(Instr& in, std::mt19937_64& rng) const {
  const CorpusSpec& spec = spec_;
  std::uniform_int_distribution<int> reg_dist(0, kNumGeneralRegs - 1);
  std::uniform_int_distribution<std::size_t> sym_dist(0, spec.symbol_pool - 1);
  std::uniform_int_distribution<int> label_dist(0, 5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto immediate = [&] {
    const double u = unit(rng);
    std::int64_t v;
    if (u < 0.7) {
      v = std::uniform_int_distribution<std::int64_t>(0, 255)(rng);
    } else if (u < 0.9) {
      v = std::uniform_int_distribution<std::int64_t>(256, 4095)(rng);
    } else {
      v = std::uniform_int_distribution<std::int64_t>(0x10000, 0x7fffffff)(rng);
    }
    return unit(rng) < 0.15 ? -v : v;
  };
  auto offset = [&] {
    const std::int64_t v = 4 * std::uniform_int_distribution<std::int64_t>(0, 16)(rng);
    return unit(rng) < 0.3 ? -v : v;
  };
  auto base = [&] {
    const double u = unit(rng);
    return u < 0.4 ? kStackReg : u < 0.6 ? kFrameReg : reg_dist(rng);
  };

  in.symbol.clear();
  in.imm = 0;
  in.dst = reg_dist(rng);
  in.src1 = reg_dist(rng);
  in.src2 = reg_dist(rng);
  switch (in.op) {
    case Op::kLoadImm:
    case Op::kAddImm: in.imm = immediate(); break;
    case Op::kLoad:
    case Op::kStore:
      in.src1 = base();
      in.imm = offset();
      break;
    case Op::kCall: in.symbol = "FUNC_" + std::to_string(sym_dist(rng)); break;
    case Op::kLoadAddr: in.symbol = "STR_" + std::to_string(sym_dist(rng)); break;
    case Op::kBranchEq:
    case Op::kBranchNe:
    case Op::kBranchLt:
    case Op::kJump: in.symbol = "LBL_" + std::to_string(label_dist(rng)); break;
    default: break;
  }
}

Instr InstrSampler::instr(std::mt19937_64& rng) const {
  // Relative frequencies of each op, indexed by Op (kReturn only at the end).
  static const std::vector<double> weights{6, 5, 3, 2, 2, 2, 2, 5, 6, 5, 4, 4, 2, 2, 2, 1, 2};
  std::discrete_distribution<int> op_dist(weights.begin(), weights.end());
  Instr in;
  in.op = static_cast<Op>(op_dist(rng));
  fill_operands(in, rng);
  return in;
}

Function random_function(const CorpusSpec& spec, std::mt19937_64& rng) {
  const InstrSampler sampler(spec);
  std::uniform_int_distribution<std::size_t> len_dist(spec.min_ops, spec.max_ops);
  Function f;
  const std::size_t n = len_dist(rng);
  for (std::size_t k = 0; k + 1 < n; ++k) f.push_back(sampler.instr(rng));
  f.push_back(Instr{Op::kReturn, 0, 0, 0, 0, {}});
  return f;
}

Function mutate(const Function& base, const CorpusSpec& spec, std::mt19937_64& rng) {
  const InstrSampler sampler(spec);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Function f = base;
  for (std::size_t k = 0; k + 1 < f.size(); ++k) {
    if (unit(rng) >= spec.mutation_rate) continue;
    if (unit(rng) < 0.25) {
      f[k] = sampler.instr(rng);
    } else {
      sampler.fill_operands(f[k], rng);
    }
  }
  return f;
}

void add_split_pairs(const std::vector<std::size_t>& ids, std::size_t family_size,
                     std::mt19937_64& rng, std::vector<PairExample>& out) {
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const std::size_t f = ids[k];
    out.push_back({snippet_id(f, Dialect::kArm), snippet_id(f, Dialect::kMips), 1});
    if (ids.size() < 2) continue;
    std::vector<std::size_t> siblings;
    if (family_size > 1) {
      for (std::size_t g : ids) {
        if (g != f && g / family_size == f / family_size) siblings.push_back(g);
      }
    }
    if (!siblings.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, siblings.size() - 1);
      out.push_back({snippet_id(f, Dialect::kArm), snippet_id(siblings[pick(rng)], Dialect::kMips), 0});
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 2);
    std::size_t other = pick(rng);
    if (other >= k) ++other;
    out.push_back({snippet_id(f, Dialect::kArm), snippet_id(ids[other], Dialect::kMips), 0});
  }
}

std::vector<SearchQuery> make_queries(const std::vector<std::size_t>& pool, std::size_t n_neg,
                                      std::mt19937_64& rng) {
  std::vector<SearchQuery> out;
  for (std::size_t f : pool) {
    std::vector<std::size_t> others;
    for (std::size_t g : pool) {
      if (g != f) others.push_back(g);
    }
    // Partial Fisher-Yates for the first n_neg picks.
    for (std::size_t k = 0; k < n_neg; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, others.size() - 1);
      std::swap(others[k], others[pick(rng)]);
    }
    SearchQuery q{snippet_id(f, Dialect::kArm), snippet_id(f, Dialect::kMips), {}};
    for (std::size_t k = 0; k < n_neg; ++k) q.negative_ids.push_back(snippet_id(others[k], Dialect::kMips));
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace

Corpus generate(const CorpusSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  Corpus c;
  for (std::size_t f = 0; f < spec.num_functions; ++f) {
    if (f % spec.family_size == 0) {
      c.functions.push_back(random_function(spec, rng));
    } else {
      c.functions.push_back(mutate(c.functions[f - f % spec.family_size], spec, rng));
    }
    for (Dialect d : {Dialect::kArm, Dialect::kMips}) {
      c.snippets.push_back({snippet_id(f, d), dialect_arch(d), render(c.functions.back(), d)});
    }
  }

  // Whole families are shuffled so siblings share a split.
  const std::size_t n_families = (spec.num_functions + spec.family_size - 1) / spec.family_size;
  std::vector<std::size_t> families(n_families);
  std::iota(families.begin(), families.end(), 0);
  std::shuffle(families.begin(), families.end(), rng);
  std::vector<std::size_t> order;
  for (std::size_t fam : families) {
    for (std::size_t f = fam * spec.family_size;
         f < std::min(spec.num_functions, (fam + 1) * spec.family_size); ++f) {
      order.push_back(f);
    }
  }
  const auto n = static_cast<double>(spec.num_functions);
  const auto n_train = static_cast<std::size_t>(std::llround(n * spec.train_fraction));
  const auto n_dev = std::min(spec.num_functions - n_train,
                              static_cast<std::size_t>(std::llround(n * spec.dev_fraction)));
  c.train_ids.assign(order.begin(), order.begin() + n_train);
  c.dev_ids.assign(order.begin() + n_train, order.begin() + n_train + n_dev);
  c.test_ids.assign(order.begin() + n_train + n_dev, order.end());
  for (auto* ids : {&c.train_ids, &c.dev_ids, &c.test_ids}) std::sort(ids->begin(), ids->end());

  add_split_pairs(c.train_ids, spec.family_size, rng, c.train);
  add_split_pairs(c.dev_ids, spec.family_size, rng, c.dev);
  add_split_pairs(c.test_ids, spec.family_size, rng, c.test);

  std::vector<std::size_t> all(spec.num_functions);
  std::iota(all.begin(), all.end(), 0);
  c.queries = make_queries(all, spec.num_negatives, rng);
  if (c.test_ids.size() >= spec.num_negatives + 1) {
    c.test_queries = make_queries(c.test_ids, spec.num_negatives, rng);
  }
  return c;
}

void write_corpus(const Corpus& corpus, const CorpusSpec& spec, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream out(fs::path(dir) / name);
    if (!out) throw InputError("cannot write " + (fs::path(dir) / name).string());
    return out;
  };
  {
    auto out = open("snippets.jsonl");
    for (const Snippet& s : corpus.snippets) write_snippet(out, s.id, s.arch, s.instructions);
  }
  {
    auto out = open("train.jsonl");
    write_pairs(out, corpus.train);
  }
  {
    auto out = open("dev.jsonl");
    write_pairs(out, corpus.dev);
  }
  {
    auto out = open("test.jsonl");
    write_pairs(out, corpus.test);
  }
  {
    auto out = open("search.jsonl");
    write_queries(out, corpus.queries);
  }
  {
    auto out = open("test_search.jsonl");
    write_queries(out, corpus.test_queries);
  }
  {
    auto out = open("corpus.json");
    nlohmann::json meta{{"num_functions", spec.num_functions},
                        {"min_ops", spec.min_ops},
                        {"max_ops", spec.max_ops},
                        {"symbol_pool", spec.symbol_pool},
                        {"num_negatives", spec.num_negatives},
                        {"train_fraction", spec.train_fraction},
                        {"dev_fraction", spec.dev_fraction},
                        {"seed", spec.seed},
                        {"family_size", spec.family_size},
                        {"mutation_rate", spec.mutation_rate},
                        {"train_functions", corpus.train_ids.size()},
                        {"dev_functions", corpus.dev_ids.size()},
                        {"test_functions", corpus.test_ids.size()}};
    out << meta.dump(2) << '\n';
  }
}

SnippetStore to_store(const Corpus& corpus) {
  SnippetStore store;
  for (const Snippet& s : corpus.snippets) store.add(tokenize_snippet(s.id, s.arch, s.instructions));
  return store;
}

}  // namespace binsim::synthetic
