#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "binsim/tokenizer.hpp"

namespace binsim {

// Area under the ROC curve via the rank statistic (ties count one half).
// Throws InputError unless both labels are present.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct CandidateScore {
  std::string id;
  double score = 0.0;
};

struct QueryScores {
  std::string query_id;
  CandidateScore positive;
  std::vector<CandidateScore> negatives;
};

// 1-based rank of the positive among all candidates, descending by score;
// equal scores are ordered by candidate id.
std::size_t positive_rank(const QueryScores& q);

struct SearchMetrics {
  double precision_at_1 = 0.0;
  double mrr = 0.0;
  std::vector<std::size_t> ranks;
};

SearchMetrics search_metrics(const std::vector<QueryScores>& queries);

std::size_t levenshtein(std::string_view a, std::string_view b);

// Token texts joined by single spaces.
std::string join_tokens(const TokenSequence& seq);

// 1 - levenshtein / max(len); 1 for two empty strings.
double edit_similarity(std::string_view a, std::string_view b);

}  // namespace binsim
