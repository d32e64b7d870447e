#include "seqrank/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace seqrank {

namespace {

std::set<QuestionId> common_items(const PartialOrder& a, const PartialOrder& b) {
  std::set<QuestionId> out;
  for (const QuestionId& q : a.linearize()) {
    if (b.contains(q)) out.insert(q);
  }
  return out;
}

}  // namespace

std::optional<double> try_ap_correlation(const PartialOrder& reference,
                                         const PartialOrder& predicted) {
  std::set<QuestionId> common = common_items(reference, predicted);
  if (common.size() < 2) return std::nullopt;
  PartialOrder ref = reference.restricted_to(common);
  if (ref.groups().size() < 2) return std::nullopt;  // reference orders nothing
  PartialOrder pred = predicted.restricted_to(common);

  std::vector<QuestionId> pred_lin = pred.linearize();
  std::map<QuestionId, std::size_t> ref_pos;
  {
    std::vector<QuestionId> ref_lin = ref.linearize();
    for (std::size_t i = 0; i < ref_lin.size(); ++i) ref_pos.emplace(ref_lin[i], i);
  }
  // tau_AP = 2/(N-1) * sum_{i=2..N} C(i)/(i-1) - 1, indexed by predicted
  // rank; C(i) counts predicted-above items the reference also places above.
  const std::size_t n = pred_lin.size();
  double sum = 0.0;
  for (std::size_t i = 1; i < n; ++i) {
    std::size_t c = 0;
    for (std::size_t j = 0; j < i; ++j) {
      if (ref_pos.at(pred_lin[j]) < ref_pos.at(pred_lin[i])) ++c;
    }
    sum += static_cast<double>(c) / static_cast<double>(i);
  }
  return 2.0 * sum / static_cast<double>(n - 1) - 1.0;
}

RankCorrelation ap_correlation(const PartialOrder& reference, const PartialOrder& predicted) {
  std::optional<double> value = try_ap_correlation(reference, predicted);
  if (!value) {
    throw UndefinedMetricError("ap_correlation: fewer than 2 comparable items");
  }
  return *value;
}

double ndpm(const PartialOrder& reference, const PartialOrder& predicted) {
  std::vector<QuestionId> items = reference.linearize();
  long contradicted = 0;
  long tied = 0;
  long total = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      Ordering ref = reference.compare(items[i], items[j]);
      if (ref == Ordering::TiedOrIncomparable) continue;
      ++total;
      Ordering pred = predicted.compare(items[i], items[j]);
      if (pred == Ordering::TiedOrIncomparable) {
        ++tied;
      } else if (pred != ref) {
        ++contradicted;
      }
    }
  }
  if (total == 0) {
    throw UndefinedMetricError("ndpm: reference has no comparable pairs");
  }
  return (2.0 * contradicted + tied) / (2.0 * total);
}

namespace {

// Average (fractional) ranks, 1-based, most difficult first.
std::map<QuestionId, double> fractional_ranks(const PartialOrder& order) {
  std::map<QuestionId, double> ranks;
  std::size_t consumed = 0;
  for (const auto& group : order.groups()) {
    double first = static_cast<double>(consumed + 1);
    double last = static_cast<double>(consumed + group.size());
    double rank = (first + last) / 2.0;
    for (const QuestionId& q : group) ranks.emplace(q, rank);
    consumed += group.size();
  }
  return ranks;
}

}  // namespace

RankCorrelation spearman_rho(const PartialOrder& reference, const PartialOrder& predicted) {
  const std::size_t n = reference.item_count();
  if (n < 2) {
    throw UndefinedMetricError("spearman_rho: need at least 2 items");
  }
  if (predicted.item_count() != n) {
    throw UndefinedMetricError("spearman_rho: item sets differ in size");
  }
  std::map<QuestionId, double> ref_ranks = fractional_ranks(reference);
  std::map<QuestionId, double> pred_ranks = fractional_ranks(predicted);
  double sum_d2 = 0.0;
  for (const auto& [q, r] : ref_ranks) {
    auto it = pred_ranks.find(q);
    if (it == pred_ranks.end()) {
      throw UndefinedMetricError("spearman_rho: item sets differ ('" + q.value + "')");
    }
    double d = r - it->second;
    sum_d2 += d * d;
  }
  double nn = static_cast<double>(n);
  return 1.0 - 6.0 * sum_d2 / (nn * (nn * nn - 1.0));
}

TTestResult paired_t_test(const std::vector<std::pair<double, double>>& pairs, double alpha) {
  if (pairs.size() < 2) {
    throw std::invalid_argument("paired_t_test: need at least 2 pairs");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("paired_t_test: alpha must be in (0,1)");
  }
  std::vector<double> diffs;
  diffs.reserve(pairs.size());
  for (const auto& [a, b] : pairs) diffs.push_back(a - b);
  bool all_identical = std::all_of(diffs.begin(), diffs.end(),
                                   [&](double d) { return d == diffs.front(); });
  if (all_identical) {
    throw DegenerateTestError("paired_t_test: zero-variance differences");
  }
  const double n = static_cast<double>(diffs.size());
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= n;
  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  double sd = std::sqrt(ss / (n - 1.0));

  TTestResult result;
  result.t_statistic = mean / (sd / std::sqrt(n));
  result.degrees_of_freedom = static_cast<int>(diffs.size()) - 1;
  result.t_critical = student_t_critical(alpha, result.degrees_of_freedom);
  result.reject_null = std::abs(result.t_statistic) > result.t_critical;
  return result;
}

namespace detail {

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16;
  constexpr double kTiny = 1e-300;
  double qab = a + b;
  double qap = a + 1.0;
  double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                    a * std::log(x) + b * std::log1p(-x);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return std::exp(ln_front) * beta_cf(a, b, x) / a;
  }
  return 1.0 - std::exp(ln_front) * beta_cf(b, a, 1.0 - x) / b;
}

}  // namespace detail

double student_t_cdf(double x, int degrees_of_freedom) {
  if (degrees_of_freedom < 1) {
    throw std::invalid_argument("student_t_cdf: dof must be >= 1");
  }
  double nu = static_cast<double>(degrees_of_freedom);
  double p = 0.5 * detail::regularized_incomplete_beta(nu / 2.0, 0.5, nu / (nu + x * x));
  return x >= 0.0 ? 1.0 - p : p;
}

double student_t_critical(double alpha, int degrees_of_freedom) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument("student_t_critical: alpha must be in (0,1)");
  }
  if (degrees_of_freedom < 1) {
    throw std::invalid_argument("student_t_critical: dof must be >= 1");
  }
  const double target = 1.0 - alpha / 2.0;
  double lo = 0.0;
  double hi = 1.0;
  while (student_t_cdf(hi, degrees_of_freedom) < target) {
    hi *= 2.0;
    if (hi > 1e12) break;
  }
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (student_t_cdf(mid, degrees_of_freedom) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace seqrank
