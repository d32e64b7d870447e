#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "seqrank/core.hpp"

namespace seqrank {

/// Weighting of the three difficulty signals. Weights must sum to 1; retry
/// and duration contributions saturate at their caps.
class DifficultyWeights {
 public:
  DifficultyWeights() = default;
  DifficultyWeights(double w_grade, double w_retries, double w_duration,
                    int retry_cap, double duration_cap_seconds);

  double w_grade() const { return w_grade_; }
  double w_retries() const { return w_retries_; }
  double w_duration() const { return w_duration_; }
  int retry_cap() const { return retry_cap_; }
  double duration_cap_seconds() const { return duration_cap_; }

 private:
  double w_grade_ = 0.5;
  double w_retries_ = 0.3;
  double w_duration_ = 0.2;
  int retry_cap_ = 5;
  double duration_cap_ = 300.0;
};

/// w_g*(1 - grade) + w_r*min(retries, cap)/cap + w_d*min(duration, cap)/cap.
/// Monotone non-decreasing in retries and duration, non-increasing in grade.
DifficultyScore difficulty_of(const AnswerAttempt& attempt, const DifficultyWeights& weights);

struct StudentOrders {
  std::map<StudentId, PartialOrder> orders;
  std::size_t duplicates_dropped = 0;  // later (student, question) repeats
};

/// Per-student difficulty orders over exactly the questions each student
/// attempted. Duplicate (student, question) pairs keep the earliest attempt.
StudentOrders orders_from_log(const std::vector<AnswerAttempt>& attempts,
                              const DifficultyWeights& weights);

}  // namespace seqrank
