#include "seqrank/edurank.hpp"

#include <algorithm>

#include "seqrank/metrics.hpp"

namespace seqrank::edurank {

int gamma(const QuestionId& q, const QuestionId& other, const PartialOrder& order) {
  switch (order.compare(q, other)) {
    case Ordering::MoreDifficult: return 1;
    case Ordering::LessDifficult: return -1;
    case Ordering::TiedOrIncomparable: return 0;
  }
  return 0;
}

double similarity(const PartialOrder& target_order, const PartialOrder& neighbor_order) {
  return try_ap_correlation(target_order, neighbor_order).value_or(0.0);
}

NeighborSet select_neighbors(const StudentId& target,
                             const std::map<StudentId, PartialOrder>& orders,
                             int memory_size) {
  if (memory_size < 1) {
    throw std::invalid_argument("select_neighbors: memory_size must be >= 1");
  }
  NeighborSet set;
  set.target = target;
  set.memory_size = memory_size;
  auto target_it = orders.find(target);
  PartialOrder target_order =
      target_it != orders.end() ? target_it->second : PartialOrder(target);
  for (const auto& [student, order] : orders) {
    if (student == target) continue;
    set.neighbors.emplace_back(student, similarity(target_order, order));
  }
  std::stable_sort(set.neighbors.begin(), set.neighbors.end(),
                   [](const auto& a, const auto& b) {
                     if (a.second != b.second) return a.second > b.second;
                     return a.first < b.first;
                   });
  if (set.neighbors.size() > static_cast<std::size_t>(memory_size)) {
    set.neighbors.resize(static_cast<std::size_t>(memory_size));
  }
  return set;
}

namespace {

int sign_of(double x) {
  if (x > 0.0) return 1;
  if (x < 0.0) return -1;
  return 0;
}

}  // namespace

int relative_vote(const QuestionId& q, const QuestionId& other, const NeighborSet& neighbors,
                  const std::map<StudentId, PartialOrder>& orders) {
  double total = 0.0;
  for (const auto& [student, sim] : neighbors.neighbors) {
    auto it = orders.find(student);
    if (it == orders.end()) {
      throw UnknownEntityError("relative_vote: no order for neighbor '" + student.value + "'");
    }
    total += sim * gamma(q, other, it->second);
  }
  return sign_of(total);
}

CopelandTable tally_votes(const std::set<QuestionId>& candidates,
                          const std::function<int(const QuestionId&, const QuestionId&)>& vote) {
  CopelandTable table;
  for (const QuestionId& q : candidates) table.scores.emplace(q, 0);
  for (auto a = candidates.begin(); a != candidates.end(); ++a) {
    for (auto b = std::next(a); b != candidates.end(); ++b) {
      int v = vote(*a, *b);
      table.scores[*a] += v;
      table.scores[*b] -= v;
    }
  }
  return table;
}

PartialOrder order_from_copeland(const StudentId& owner, const CopelandTable& table) {
  std::vector<std::pair<QuestionId, int>> items(table.scores.begin(), table.scores.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<std::vector<QuestionId>> groups;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i == 0 || items[i].second != items[i - 1].second) groups.emplace_back();
    groups.back().push_back(items[i].first);
  }
  return PartialOrder(owner, std::move(groups));
}

PartialOrder rank(const StudentId& target, const std::set<QuestionId>& candidates,
                  const std::map<StudentId, PartialOrder>& orders, int memory_size) {
  if (candidates.empty()) {
    throw std::invalid_argument("edurank::rank: empty candidate set");
  }
  NeighborSet neighbors = select_neighbors(target, orders, memory_size);
  CopelandTable table = tally_votes(candidates, [&](const QuestionId& a, const QuestionId& b) {
    return relative_vote(a, b, neighbors, orders);
  });
  return order_from_copeland(target, table);
}

}  // namespace seqrank::edurank
