#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "seqrank/core.hpp"

namespace seqrank {

/// Rank correlation value in [-1, 1].
using RankCorrelation = double;

struct TTestResult {
  double t_statistic = 0.0;
  int degrees_of_freedom = 0;
  double t_critical = 0.0;  // two-sided, at the configured alpha
  bool reject_null = false;
};

/// AP (average-precision) rank correlation of `predicted` against
/// `reference`, weighting errors near the top of the reference more heavily.
/// Both orders are linearized by the global tie-break and restricted to their
/// common items before scoring. Throws UndefinedMetricError when fewer than
/// two comparable items remain.
RankCorrelation ap_correlation(const PartialOrder& reference, const PartialOrder& predicted);

/// Non-throwing variant; nullopt where ap_correlation would throw.
std::optional<double> try_ap_correlation(const PartialOrder& reference,
                                         const PartialOrder& predicted);

/// Normalized distance-based performance measure over reference-comparable
/// pairs: (2*contradicted + tied) / (2*total). 0 = perfect, 1 = reversed.
double ndpm(const PartialOrder& reference, const PartialOrder& predicted);

/// Spearman's rho, 1 - 6*sum(d^2)/(n(n^2-1)), with average (fractional)
/// ranks for ties. Requires identical item sets with n >= 2.
RankCorrelation spearman_rho(const PartialOrder& reference, const PartialOrder& predicted);

/// Two-sided paired t-test over (first, second) pairs; differences are
/// first - second. Throws DegenerateTestError when all differences are
/// identical (zero variance).
TTestResult paired_t_test(const std::vector<std::pair<double, double>>& pairs, double alpha);

/// Two-sided critical value of Student's t at significance alpha with the
/// given degrees of freedom, via incomplete-beta inversion.
double student_t_critical(double alpha, int degrees_of_freedom);

/// CDF of Student's t distribution.
double student_t_cdf(double x, int degrees_of_freedom);

namespace detail {
/// Regularized incomplete beta function I_x(a, b).
double regularized_incomplete_beta(double a, double b, double x);
}  // namespace detail

}  // namespace seqrank
