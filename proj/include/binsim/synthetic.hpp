#pragma once

// Synthetic two-dialect corpus. Each function is generated once as a
// dialect-neutral op list and rendered in an ARM-like and a MIPS-like
// dialect. The renderings differ by opcode renaming (some renames keep a
// common prefix, e.g. ADD -> ADDU), operand reordering and instruction
// splitting, so ground truth is the function identity.

#include <cstdint>
#include <string>
#include <vector>

#include "binsim/dataset.hpp"

namespace binsim::synthetic {

enum class Op {
  kLoadImm,
  kAdd,
  kSub,
  kAnd,
  kOr,
  kXor,
  kMul,
  kAddImm,
  kLoad,
  kStore,
  kMove,
  kCall,
  kBranchEq,
  kBranchNe,
  kBranchLt,
  kJump,
  kLoadAddr,
  kReturn,
};

struct Instr {
  Op op = Op::kReturn;
  int dst = 0;   // register index
  int src1 = 0;  // register index (base register for memory ops)
  int src2 = 0;
  std::int64_t imm = 0;
  std::string symbol;  // call target, string label or branch label

  bool operator==(const Instr&) const = default;
};

using Function = std::vector<Instr>;

enum class Dialect { kArm, kMips };

std::string dialect_arch(Dialect d);

std::vector<std::string> render(const Function& f, Dialect d);
// Inverts `render`: recovers the op skeleton from rendered lines.
std::vector<Op> recover_skeleton(const std::vector<std::string>& lines, Dialect d);
std::vector<Op> skeleton(const Function& f);

struct CorpusSpec {
  std::size_t num_functions = 100;
  std::size_t min_ops = 8;
  std::size_t max_ops = 24;
  std::size_t symbol_pool = 64;
  std::size_t num_negatives = 20;
  double train_fraction = 0.8;
  double dev_fraction = 0.1;
  std::uint64_t seed = 7;
  // Functions come in families of this size: every member is a copy of the
  // family's first function with each instruction mutated (constants,
  // symbols, registers, occasionally the whole instruction) with probability
  // `mutation_rate`. Families stay within one split and negative pairs are
  // drawn from the same family when it has another member there.
  std::size_t family_size = 1;
  double mutation_rate = 0.0;

  void validate() const;
};

struct Snippet {
  std::string id;
  std::string arch;
  std::vector<std::string> instructions;
};

struct Corpus {
  std::vector<Function> functions;
  std::vector<Snippet> snippets;  // two per function, dialect A first
  std::vector<std::size_t> train_ids, dev_ids, test_ids;  // function indices
  std::vector<PairExample> train, dev, test;
  std::vector<SearchQuery> queries;       // one per function, whole corpus
  std::vector<SearchQuery> test_queries;  // test split only (when large enough)
};

std::string snippet_id(std::size_t function, Dialect d);

Corpus generate(const CorpusSpec& spec);

// Writes snippets.jsonl, {train,dev,test}.jsonl, search.jsonl,
// test_search.jsonl and spec.json under `dir`.
void write_corpus(const Corpus& corpus, const CorpusSpec& spec, const std::string& dir);

SnippetStore to_store(const Corpus& corpus);

}  // namespace binsim::synthetic
