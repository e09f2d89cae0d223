#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "binsim/tokenizer.hpp"

namespace binsim {

// Six relation types of the instruction association graph.
//   e0  opcode -> operand inside one instruction (directed)
//   e1  operand pair inside one instruction
//   e2  cross-side opcodes sharing an n-character prefix
//   e3  cross-side operands with identical normalized text
//   e4  cross-side operands of the same register/immediate/memory kind
//   e5  cross-side tokens at heuristically aligned positions
enum class EdgeType : std::uint8_t {
  kOpcodeOperand = 0,
  kOperandCooccur = 1,
  kOpcodePrefix = 2,
  kOperandValue = 3,
  kOperandType = 4,
  kPositionAlign = 5,
};

inline constexpr std::size_t kNumEdgeTypes = 6;
inline constexpr std::array<EdgeType, kNumEdgeTypes> kAllEdgeTypes{
    EdgeType::kOpcodeOperand, EdgeType::kOperandCooccur, EdgeType::kOpcodePrefix,
    EdgeType::kOperandValue,  EdgeType::kOperandType,    EdgeType::kPositionAlign};

constexpr std::size_t index_of(EdgeType t) { return static_cast<std::size_t>(t); }
constexpr bool is_directed(EdgeType t) { return t == EdgeType::kOpcodeOperand; }
constexpr bool is_mono_arch(EdgeType t) {
  return t == EdgeType::kOpcodeOperand || t == EdgeType::kOperandCooccur;
}

std::string edge_type_name(EdgeType t);  // "e0".."e5"
EdgeType edge_type_from_name(std::string_view name);

enum class Side : std::uint8_t { kA, kB };

enum class AlignFormula { kAsWritten, kRescaled };

using EdgeTypeSet = std::bitset<kNumEdgeTypes>;

inline EdgeTypeSet all_edge_types() { return EdgeTypeSet{}.set(); }
inline EdgeTypeSet mono_arch_types() { return EdgeTypeSet{0b000011}; }
inline EdgeTypeSet cross_arch_types() { return EdgeTypeSet{0b111100}; }
// Parses "e2,e3" style lists.
EdgeTypeSet parse_edge_types(std::string_view list);

struct GraphConfig {
  std::size_t prefix_len = 3;
  double align_threshold = 2.0;
  AlignFormula align_formula = AlignFormula::kAsWritten;
  EdgeTypeSet enabled_types = all_edge_types();

  void validate() const;
  bool operator==(const GraphConfig&) const = default;
};

struct GraphNode {
  std::size_t id = 0;
  Side side = Side::kA;
  std::size_t position = 0;
  Token token;

  bool operator==(const GraphNode&) const = default;
};

struct TypedEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  EdgeType type = EdgeType::kOpcodeOperand;
  std::uint32_t weight = 1;

  bool operator==(const TypedEdge&) const = default;
};

// Nodes are token occurrences: side-A tokens take ids [0, l_a), side-B
// tokens [l_a, l_a + l_b). Undirected edges are stored once with src < dst.
struct AssocGraph {
  std::vector<GraphNode> nodes;
  std::vector<TypedEdge> edges;
  GraphConfig config;
  std::size_t len_a = 0;
  std::size_t len_b = 0;

  std::size_t node_count() const { return nodes.size(); }
  // Throws std::logic_error when an edge breaks the side restrictions.
  void check_invariants() const;
  bool operator==(const AssocGraph&) const = default;
};

// Per-rule edge generators. Node ids follow the AssocGraph convention;
// `offset` shifts ids of the given sequence (0 for side A, l_a for side B).
std::vector<TypedEdge> edges_e0_e1(const TokenSequence& seq, std::size_t offset = 0);
std::vector<TypedEdge> edges_e2(const TokenSequence& a, const TokenSequence& b,
                                std::size_t prefix_len);
std::vector<TypedEdge> edges_e3(const TokenSequence& a, const TokenSequence& b);
std::vector<TypedEdge> edges_e4(const TokenSequence& a, const TokenSequence& b);
std::vector<TypedEdge> edges_e5(const TokenSequence& a, const TokenSequence& b,
                                double threshold, AlignFormula formula);

// The alignment predicate for 0-based positions i (side A) and j (side B).
bool positions_aligned(std::size_t i, std::size_t j, std::size_t len_a, std::size_t len_b,
                       double threshold, AlignFormula formula);

AssocGraph build_graph(const TokenSequence& a, const TokenSequence& b,
                       const GraphConfig& cfg = {});

std::string serialize_graph(const AssocGraph& g);
AssocGraph deserialize_graph(std::string_view text);

}  // namespace binsim
