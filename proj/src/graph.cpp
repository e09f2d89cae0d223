#include "binsim/graph.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "binsim/config_json.hpp"
#include "binsim/error.hpp"

namespace binsim {

using nlohmann::json;

std::string edge_type_name(EdgeType t) { return "e" + std::to_string(index_of(t)); }

EdgeType edge_type_from_name(std::string_view name) {
  if (name.size() == 2 && (name[0] == 'e' || name[0] == 'E') && name[1] >= '0' &&
      name[1] < static_cast<char>('0' + kNumEdgeTypes)) {
    return static_cast<EdgeType>(name[1] - '0');
  }
  throw InputError("unknown edge type '" + std::string(name) + "'");
}

EdgeTypeSet parse_edge_types(std::string_view list) {
  EdgeTypeSet set;
  while (!list.empty()) {
    const auto comma = list.find(',');
    std::string_view item = list.substr(0, comma);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item == "all") {
      set |= all_edge_types();
    } else if (item == "mono") {
      set |= mono_arch_types();
    } else if (item == "cross") {
      set |= cross_arch_types();
    } else if (!item.empty()) {
      set.set(index_of(edge_type_from_name(item)));
    }
    if (comma == std::string_view::npos) break;
    list.remove_prefix(comma + 1);
  }
  return set;
}

void GraphConfig::validate() const {
  if (prefix_len < 1) throw InputError("graph config: prefix length must be >= 1");
  if (!(align_threshold > 0.0) || !std::isfinite(align_threshold)) {
    throw InputError("graph config: alignment threshold must be positive");
  }
}

void AssocGraph::check_invariants() const {
  if (nodes.size() != len_a + len_b) throw std::logic_error("graph: node count != l_a + l_b");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Side expected = i < len_a ? Side::kA : Side::kB;
    if (nodes[i].id != i || nodes[i].side != expected) {
      throw std::logic_error("graph: node ids not dense or sides out of order");
    }
  }
  for (const TypedEdge& e : edges) {
    if (e.src >= nodes.size() || e.dst >= nodes.size()) {
      throw std::logic_error("graph: edge endpoint out of range");
    }
    if (e.src == e.dst) throw std::logic_error("graph: self-loop");
    if (e.weight < 1) throw std::logic_error("graph: zero edge weight");
    if (!is_directed(e.type) && e.src > e.dst) {
      throw std::logic_error("graph: undirected edge not stored with src < dst");
    }
    const bool same_side = nodes[e.src].side == nodes[e.dst].side;
    if (is_mono_arch(e.type) != same_side) {
      throw std::logic_error("graph: " + edge_type_name(e.type) + " edge violates side rule");
    }
  }
}

// ---------------------------------------------------------------------------
// Rules

std::vector<TypedEdge> edges_e0_e1(const TokenSequence& seq, std::size_t offset) {
  std::vector<TypedEdge> out;
  std::size_t i = 0;
  const auto& toks = seq.tokens;
  while (i < toks.size()) {
    std::size_t end = i + 1;
    while (end < toks.size() && toks[end].instr_index == toks[i].instr_index) ++end;
    // [i, end) is one instruction; its opcode comes first.
    std::size_t opcode = toks.size();
    std::vector<std::size_t> operands;
    for (std::size_t k = i; k < end; ++k) {
      if (toks[k].is_opcode()) {
        opcode = k;
      } else {
        operands.push_back(k);
      }
    }
    if (opcode != toks.size()) {
      for (std::size_t p : operands) {
        out.push_back({offset + opcode, offset + p, EdgeType::kOpcodeOperand, 1});
      }
    }
    for (std::size_t x = 0; x < operands.size(); ++x) {
      for (std::size_t y = x + 1; y < operands.size(); ++y) {
        out.push_back({offset + operands[x], offset + operands[y], EdgeType::kOperandCooccur, 1});
      }
    }
    i = end;
  }
  return out;
}

namespace {

template <typename Pred>
std::vector<TypedEdge> cross_edges(const TokenSequence& a, const TokenSequence& b, EdgeType type,
                                   Pred pred) {
  std::vector<TypedEdge> out;
  const std::size_t la = a.length();
  for (std::size_t i = 0; i < la; ++i) {
    for (std::size_t j = 0; j < b.length(); ++j) {
      if (pred(i, j)) out.push_back({i, la + j, type, 1});
    }
  }
  return out;
}

bool typed_kind(OperandKind k) {
  return k == OperandKind::kRegister || k == OperandKind::kImmediate || k == OperandKind::kMemory;
}

}  // namespace

std::vector<TypedEdge> edges_e2(const TokenSequence& a, const TokenSequence& b,
                                std::size_t prefix_len) {
  if (prefix_len < 1) throw InputError("edges_e2: prefix length must be >= 1");
  return cross_edges(a, b, EdgeType::kOpcodePrefix, [&](std::size_t i, std::size_t j) {
    const Token& x = a.tokens[i];
    const Token& y = b.tokens[j];
    return x.is_opcode() && y.is_opcode() && x.text.size() >= prefix_len &&
           y.text.size() >= prefix_len && x.text.compare(0, prefix_len, y.text, 0, prefix_len) == 0;
  });
}

std::vector<TypedEdge> edges_e3(const TokenSequence& a, const TokenSequence& b) {
  return cross_edges(a, b, EdgeType::kOperandValue, [&](std::size_t i, std::size_t j) {
    const Token& x = a.tokens[i];
    const Token& y = b.tokens[j];
    return !x.is_opcode() && !y.is_opcode() && x.text == y.text;
  });
}

std::vector<TypedEdge> edges_e4(const TokenSequence& a, const TokenSequence& b) {
  return cross_edges(a, b, EdgeType::kOperandType, [&](std::size_t i, std::size_t j) {
    const Token& x = a.tokens[i];
    const Token& y = b.tokens[j];
    return !x.is_opcode() && !y.is_opcode() && typed_kind(x.operand_kind) &&
           x.operand_kind == y.operand_kind;
  });
}

bool positions_aligned(std::size_t i, std::size_t j, std::size_t len_a, std::size_t len_b,
                       double threshold, AlignFormula formula) {
  // |i * p / q - j| < t  <=>  |i * p - j * q| < t * q, with q > 0.
  const auto p = static_cast<long double>(formula == AlignFormula::kAsWritten ? len_a : len_b);
  const auto q = static_cast<long double>(formula == AlignFormula::kAsWritten ? len_b : len_a);
  const long double diff = static_cast<long double>(i) * p - static_cast<long double>(j) * q;
  return std::fabs(diff) < static_cast<long double>(threshold) * q;
}

std::vector<TypedEdge> edges_e5(const TokenSequence& a, const TokenSequence& b,
                                double threshold, AlignFormula formula) {
  if (!(threshold > 0.0)) throw InputError("edges_e5: threshold must be positive");
  const std::size_t la = a.length();
  const std::size_t lb = b.length();
  return cross_edges(a, b, EdgeType::kPositionAlign, [&](std::size_t i, std::size_t j) {
    return positions_aligned(i, j, la, lb, threshold, formula);
  });
}

AssocGraph build_graph(const TokenSequence& a, const TokenSequence& b, const GraphConfig& cfg) {
  cfg.validate();
  if (a.length() == 0 || b.length() == 0) {
    throw InputError("build_graph: both sequences must be non-empty");
  }
  AssocGraph g;
  g.config = cfg;
  g.len_a = a.length();
  g.len_b = b.length();
  g.nodes.reserve(g.len_a + g.len_b);
  for (const Token& t : a.tokens) g.nodes.push_back({g.nodes.size(), Side::kA, t.position, t});
  for (const Token& t : b.tokens) g.nodes.push_back({g.nodes.size(), Side::kB, t.position, t});

  std::map<std::tuple<std::size_t, std::size_t, EdgeType>, std::uint32_t> fired;
  auto collect = [&](const std::vector<TypedEdge>& edges) {
    for (const TypedEdge& e : edges) {
      if (cfg.enabled_types.test(index_of(e.type))) fired[{e.src, e.dst, e.type}] += e.weight;
    }
  };
  const auto& on = cfg.enabled_types;
  if (on.test(0) || on.test(1)) {
    collect(edges_e0_e1(a, 0));
    collect(edges_e0_e1(b, g.len_a));
  }
  if (on.test(index_of(EdgeType::kOpcodePrefix))) collect(edges_e2(a, b, cfg.prefix_len));
  if (on.test(index_of(EdgeType::kOperandValue))) collect(edges_e3(a, b));
  if (on.test(index_of(EdgeType::kOperandType))) collect(edges_e4(a, b));
  if (on.test(index_of(EdgeType::kPositionAlign))) {
    collect(edges_e5(a, b, cfg.align_threshold, cfg.align_formula));
  }

  g.edges.reserve(fired.size());
  for (const auto& [key, weight] : fired) {
    const auto& [src, dst, type] = key;
    g.edges.push_back({src, dst, type, weight});
  }
  return g;
}

// ---------------------------------------------------------------------------
// JSON dump

std::string serialize_graph(const AssocGraph& g) {
  json nodes = json::array();
  for (const GraphNode& n : g.nodes) {
    nodes.push_back({{"id", n.id},
                     {"side", n.side == Side::kA ? "a" : "b"},
                     {"pos", n.position},
                     {"instr", n.token.instr_index},
                     {"token", n.token.text},
                     {"role", to_string(n.token.role)},
                     {"kind", to_string(n.token.operand_kind)}});
  }
  json edges = json::array();
  for (const TypedEdge& e : g.edges) {
    edges.push_back({{"src", e.src}, {"dst", e.dst}, {"type", edge_type_name(e.type)}, {"w", e.weight}});
  }
  json doc{{"nodes", nodes}, {"edges", edges}, {"config", g.config}};
  return doc.dump() + "\n";
}

AssocGraph deserialize_graph(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(e.byte, e.what());
  }
  AssocGraph g;
  try {
    g.config = doc.at("config").get<GraphConfig>();
    for (const json& n : doc.at("nodes")) {
      GraphNode node;
      node.id = n.at("id").get<std::size_t>();
      const auto side = n.at("side").get<std::string>();
      if (side != "a" && side != "b") throw InputError("node side must be 'a' or 'b'");
      node.side = side == "a" ? Side::kA : Side::kB;
      node.position = n.at("pos").get<std::size_t>();
      node.token.text = n.at("token").get<std::string>();
      node.token.role = role_from_string(n.at("role").get<std::string>());
      node.token.operand_kind = kind_from_string(n.at("kind").get<std::string>());
      node.token.instr_index = n.value("instr", std::size_t{0});
      node.token.position = node.position;
      (node.side == Side::kA ? g.len_a : g.len_b) += 1;
      g.nodes.push_back(std::move(node));
    }
    for (const json& e : doc.at("edges")) {
      g.edges.push_back({e.at("src").get<std::size_t>(), e.at("dst").get<std::size_t>(),
                         edge_type_from_name(e.at("type").get<std::string>()),
                         e.at("w").get<std::uint32_t>()});
    }
    g.check_invariants();
  } catch (const json::exception& e) {
    throw ParseError(0, std::string("graph schema: ") + e.what());
  } catch (const InputError& e) {
    throw ParseError(0, std::string("graph schema: ") + e.what());
  } catch (const std::logic_error& e) {
    throw ParseError(0, std::string("graph schema: ") + e.what());
  }
  return g;
}

}  // namespace binsim
