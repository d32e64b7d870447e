#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace seqrank {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// A rank metric was asked to score inputs it is not defined on
/// (fewer than two comparable items, mismatched item sets, ...).
struct UndefinedMetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A statistical test was given degenerate input (e.g. zero-variance
/// differences in a paired t-test).
struct DegenerateTestError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A student or question id is not known to the component being queried.
struct UnknownEntityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The evaluation protocol cannot be satisfied by the given data.
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Identifiers
// ---------------------------------------------------------------------------

struct StudentId {
  std::string value;
  auto operator<=>(const StudentId&) const = default;
};

struct QuestionId {
  std::string value;
  auto operator<=>(const QuestionId&) const = default;
};

// ---------------------------------------------------------------------------
// Attempts and scores
// ---------------------------------------------------------------------------

/// One student's interaction with one question.
struct AnswerAttempt {
  StudentId student;
  QuestionId question;
  double first_attempt_grade = 0.0;  // in [0,1], 1 = correct on first try
  int retries = 0;
  double duration_seconds = 0.0;
  std::string questionnaire;
};

/// Throws std::invalid_argument if any field violates its invariant.
void validate_attempt(const AnswerAttempt& attempt);

/// Personalized difficulty in [0,1]; 1 = maximally difficult.
struct DifficultyScore {
  explicit DifficultyScore(double v);
  double value;
};

// ---------------------------------------------------------------------------
// Partial orders
// ---------------------------------------------------------------------------

enum class Ordering { MoreDifficult, LessDifficult, TiedOrIncomparable };

/// A student's difficulty ordering over a question subset, represented as a
/// list of tie-groups, most difficult first. Items within a group are kept
/// sorted by ascending QuestionId (the global linearization tie-break).
class PartialOrder {
 public:
  PartialOrder() = default;
  explicit PartialOrder(StudentId owner) : owner_(std::move(owner)) {}
  PartialOrder(StudentId owner, std::vector<std::vector<QuestionId>> tie_groups);

  const StudentId& owner() const { return owner_; }
  const std::vector<std::vector<QuestionId>>& groups() const { return groups_; }
  std::size_t item_count() const { return index_.size(); }
  bool empty() const { return index_.empty(); }

  bool contains(const QuestionId& q) const { return index_.count(q) > 0; }
  std::optional<std::size_t> group_index(const QuestionId& q) const;

  Ordering compare(const QuestionId& a, const QuestionId& b) const;

  /// All items, most difficult first, ties broken by ascending QuestionId.
  std::vector<QuestionId> linearize() const;

  /// Item set, ascending.
  std::set<QuestionId> item_set() const;

  /// The order induced on the given subset; empty groups are dropped.
  PartialOrder restricted_to(const std::set<QuestionId>& keep) const;

 private:
  StudentId owner_;
  std::vector<std::vector<QuestionId>> groups_;
  std::map<QuestionId, std::size_t> index_;  // question -> tie-group position
};

inline Ordering compare(const PartialOrder& order, const QuestionId& a, const QuestionId& b) {
  return order.compare(a, b);
}

/// Sorts questions descending by score; scores whose gaps chain within
/// tie_epsilon (transitive closure of |s_a - s_b| <= tie_epsilon) share a
/// tie-group. tie_epsilon = 0 groups exactly equal scores only.
PartialOrder order_from_scores(StudentId owner,
                               const std::map<QuestionId, DifficultyScore>& scores,
                               double tie_epsilon = 0.0);

}  // namespace seqrank
