#pragma once

#include <functional>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "seqrank/core.hpp"

namespace seqrank::edurank {

/// The memory_size students most similar to the target, descending
/// similarity, ties broken by ascending StudentId.
struct NeighborSet {
  StudentId target;
  std::vector<std::pair<StudentId, double>> neighbors;
  int memory_size = 0;
};

/// Net pairwise-win count per candidate question.
struct CopelandTable {
  std::map<QuestionId, int> scores;
};

/// One neighbor's verdict on a pair: +1 if q is harder than other in the
/// order, -1 if easier, 0 for ties, incomparable, or absent items.
int gamma(const QuestionId& q, const QuestionId& other, const PartialOrder& order);

/// AP rank correlation between the two orders on their common items, with
/// the target's order as reference. 0 when fewer than two comparable items
/// overlap, so such neighbors cast no weighted votes.
double similarity(const PartialOrder& target_order, const PartialOrder& neighbor_order);

NeighborSet select_neighbors(const StudentId& target,
                             const std::map<StudentId, PartialOrder>& orders,
                             int memory_size);

/// sign(sum_j similarity_j * gamma(q, other, order_j)) over the neighbor set.
int relative_vote(const QuestionId& q, const QuestionId& other, const NeighborSet& neighbors,
                  const std::map<StudentId, PartialOrder>& orders);

/// Copeland scores from an antisymmetric pairwise vote function; each
/// unordered pair is voted once and credited to both sides.
CopelandTable tally_votes(const std::set<QuestionId>& candidates,
                          const std::function<int(const QuestionId&, const QuestionId&)>& vote);

/// Candidates ordered by descending Copeland score, equal scores tied.
PartialOrder order_from_copeland(const StudentId& owner, const CopelandTable& table);

/// Ranks the candidate questions for the target student by similarity-
/// weighted pairwise voting over the memory_size most similar neighbors.
/// A target with no usable order yields a single all-tied group.
PartialOrder rank(const StudentId& target, const std::set<QuestionId>& candidates,
                  const std::map<StudentId, PartialOrder>& orders, int memory_size);

}  // namespace seqrank::edurank
