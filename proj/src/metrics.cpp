#include "binsim/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "binsim/error.hpp"

namespace binsim {

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw InputError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return scores[x] < scores[y]; });

  // Mann-Whitney U with average ranks for tied groups.
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      const int label = labels[order[k]];
      if (label == 1) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      } else if (label == 0) {
        ++n_neg;
      } else {
        throw InputError("auc: labels must be 0 or 1");
      }
    }
    i = j;
  }
  if (n_pos == 0 || n_neg == 0) throw InputError("auc: both classes are required");
  const double u = pos_rank_sum - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::size_t positive_rank(const QueryScores& q) {
  std::size_t rank = 1;
  for (const CandidateScore& c : q.negatives) {
    if (c.score > q.positive.score || (c.score == q.positive.score && c.id < q.positive.id)) {
      ++rank;
    }
  }
  return rank;
}

SearchMetrics search_metrics(const std::vector<QueryScores>& queries) {
  SearchMetrics m;
  if (queries.empty()) return m;
  for (const QueryScores& q : queries) {
    const std::size_t r = positive_rank(q);
    m.ranks.push_back(r);
    m.precision_at_1 += r == 1 ? 1.0 : 0.0;
    m.mrr += 1.0 / static_cast<double>(r);
  }
  m.precision_at_1 /= static_cast<double>(queries.size());
  m.mrr /= static_cast<double>(queries.size());
  return m;
}

std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::string join_tokens(const TokenSequence& seq) {
  std::string out;
  for (const Token& t : seq.tokens) {
    if (!out.empty()) out += ' ';
    out += t.text;
  }
  return out;
}

double edit_similarity(std::string_view a, std::string_view b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

}  // namespace binsim
