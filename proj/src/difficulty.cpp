#include "seqrank/difficulty.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace seqrank {

DifficultyWeights::DifficultyWeights(double w_grade, double w_retries, double w_duration,
                                     int retry_cap, double duration_cap_seconds)
    : w_grade_(w_grade),
      w_retries_(w_retries),
      w_duration_(w_duration),
      retry_cap_(retry_cap),
      duration_cap_(duration_cap_seconds) {
  if (!(w_grade >= 0.0) || !(w_retries >= 0.0) || !(w_duration >= 0.0)) {
    throw std::invalid_argument("difficulty weights must be non-negative");
  }
  if (std::abs(w_grade + w_retries + w_duration - 1.0) > 1e-9) {
    throw std::invalid_argument("difficulty weights must sum to 1");
  }
  if (retry_cap <= 0) {
    throw std::invalid_argument("retry_cap must be positive");
  }
  if (!(duration_cap_seconds > 0.0) || !std::isfinite(duration_cap_seconds)) {
    throw std::invalid_argument("duration_cap must be positive");
  }
}

DifficultyScore difficulty_of(const AnswerAttempt& attempt, const DifficultyWeights& weights) {
  validate_attempt(attempt);
  double retries = std::min(attempt.retries, weights.retry_cap());
  double duration = std::min(attempt.duration_seconds, weights.duration_cap_seconds());
  double value = weights.w_grade() * (1.0 - attempt.first_attempt_grade) +
                 weights.w_retries() * retries / weights.retry_cap() +
                 weights.w_duration() * duration / weights.duration_cap_seconds();
  return DifficultyScore(std::clamp(value, 0.0, 1.0));
}

StudentOrders orders_from_log(const std::vector<AnswerAttempt>& attempts,
                              const DifficultyWeights& weights) {
  StudentOrders result;
  std::map<StudentId, std::map<QuestionId, DifficultyScore>> scores;
  std::set<std::pair<StudentId, QuestionId>> seen;
  for (const AnswerAttempt& attempt : attempts) {
    if (!seen.emplace(attempt.student, attempt.question).second) {
      ++result.duplicates_dropped;  // keep the earliest attempt
      continue;
    }
    scores[attempt.student].emplace(attempt.question, difficulty_of(attempt, weights));
  }
  for (const auto& [student, per_question] : scores) {
    result.orders.emplace(student, order_from_scores(student, per_question, 0.0));
  }
  return result;
}

}  // namespace seqrank
