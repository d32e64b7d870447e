#include "seqrank/core.hpp"

#include <algorithm>
#include <cmath>

namespace seqrank {

void validate_attempt(const AnswerAttempt& attempt) {
  if (attempt.student.value.empty()) {
    throw std::invalid_argument("attempt has empty student id");
  }
  if (attempt.question.value.empty()) {
    throw std::invalid_argument("attempt has empty question id");
  }
  if (!(attempt.first_attempt_grade >= 0.0 && attempt.first_attempt_grade <= 1.0)) {
    throw std::invalid_argument("first_attempt_grade outside [0,1] for student '" +
                                attempt.student.value + "', question '" +
                                attempt.question.value + "'");
  }
  if (attempt.retries < 0) {
    throw std::invalid_argument("negative retries for student '" + attempt.student.value + "'");
  }
  if (!(attempt.duration_seconds >= 0.0) || !std::isfinite(attempt.duration_seconds)) {
    throw std::invalid_argument("invalid duration for student '" + attempt.student.value + "'");
  }
}

DifficultyScore::DifficultyScore(double v) : value(v) {
  if (!(v >= 0.0 && v <= 1.0)) {  // also rejects NaN
    throw std::invalid_argument("difficulty score outside [0,1]");
  }
}

PartialOrder::PartialOrder(StudentId owner, std::vector<std::vector<QuestionId>> tie_groups)
    : owner_(std::move(owner)), groups_(std::move(tie_groups)) {
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    if (groups_[g].empty()) {
      throw std::invalid_argument("partial order contains an empty tie-group");
    }
    std::sort(groups_[g].begin(), groups_[g].end());
    for (const QuestionId& q : groups_[g]) {
      if (q.value.empty()) {
        throw std::invalid_argument("partial order contains an empty question id");
      }
      if (!index_.emplace(q, g).second) {
        throw std::invalid_argument("question '" + q.value +
                                    "' appears in more than one tie-group");
      }
    }
  }
}

std::optional<std::size_t> PartialOrder::group_index(const QuestionId& q) const {
  auto it = index_.find(q);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Ordering PartialOrder::compare(const QuestionId& a, const QuestionId& b) const {
  auto ga = group_index(a);
  auto gb = group_index(b);
  if (!ga || !gb || *ga == *gb) return Ordering::TiedOrIncomparable;
  return *ga < *gb ? Ordering::MoreDifficult : Ordering::LessDifficult;
}

std::vector<QuestionId> PartialOrder::linearize() const {
  std::vector<QuestionId> out;
  out.reserve(index_.size());
  for (const auto& group : groups_) {
    out.insert(out.end(), group.begin(), group.end());
  }
  return out;
}

std::set<QuestionId> PartialOrder::item_set() const {
  std::set<QuestionId> out;
  for (const auto& [q, g] : index_) out.insert(q);
  return out;
}

PartialOrder PartialOrder::restricted_to(const std::set<QuestionId>& keep) const {
  std::vector<std::vector<QuestionId>> kept;
  for (const auto& group : groups_) {
    std::vector<QuestionId> g;
    for (const QuestionId& q : group) {
      if (keep.count(q)) g.push_back(q);
    }
    if (!g.empty()) kept.push_back(std::move(g));
  }
  return PartialOrder(owner_, std::move(kept));
}

PartialOrder order_from_scores(StudentId owner,
                               const std::map<QuestionId, DifficultyScore>& scores,
                               double tie_epsilon) {
  if (scores.empty()) {
    throw std::invalid_argument("order_from_scores: empty score map");
  }
  if (!(tie_epsilon >= 0.0)) {
    throw std::invalid_argument("order_from_scores: negative tie_epsilon");
  }
  std::vector<std::pair<QuestionId, double>> items;
  items.reserve(scores.size());
  for (const auto& [q, s] : scores) {
    if (!std::isfinite(s.value)) {
      throw std::invalid_argument("order_from_scores: non-finite score for '" + q.value + "'");
    }
    items.emplace_back(q, s.value);
  }
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  // Adjacent gaps <= epsilon merge; on a sorted sequence this equals the
  // transitive closure of the pairwise |s_a - s_b| <= epsilon relation.
  std::vector<std::vector<QuestionId>> groups;
  double prev = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i == 0 || prev - items[i].second > tie_epsilon) {
      groups.emplace_back();
    }
    groups.back().push_back(items[i].first);
    prev = items[i].second;
  }
  return PartialOrder(std::move(owner), std::move(groups));
}

}  // namespace seqrank
