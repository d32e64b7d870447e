#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "seqrank/core.hpp"
#include "seqrank/difficulty.hpp"
#include "seqrank/metrics.hpp"
#include "seqrank/ncf.hpp"

namespace seqrank {

/// One held-out (student, questionnaire) block: the candidate questions to
/// rank and the reference difficulty order derived from the held-out
/// attempts.
struct EvalCase {
  StudentId student;
  std::string questionnaire;
  std::set<QuestionId> candidates;
  PartialOrder reference;
};

struct CaseSplit {
  std::vector<AnswerAttempt> training;
  std::vector<EvalCase> cases;
  std::size_t duplicates_dropped = 0;
};

/// Samples n_students eligible students and n_questionnaires questionnaires
/// per student (seeded); each sampled block leaves training and becomes an
/// EvalCase. Guarantees every evaluated student and candidate question still
/// appears in the remaining training attempts; violations raise
/// ProtocolError.
CaseSplit make_cases(const std::vector<AnswerAttempt>& attempts, int n_students,
                     int n_questionnaires, std::uint64_t seed,
                     const DifficultyWeights& weights = DifficultyWeights());

struct CaseRow {
  std::string algorithm;
  StudentId student;
  std::string questionnaire;
  std::size_t n_candidates = 0;
  bool ok = false;
  std::string error;
  double sap = 0.0;
  double sr = 0.0;
  double ndpm = 0.0;
  double wall_ms = 0.0;
};

struct AlgorithmAggregate {
  std::size_t cases_ok = 0;
  std::size_t cases_failed = 0;
  double mean_sap = 0.0;
  double mean_sr = 0.0;
  double mean_ndpm = 0.0;
};

struct PairedTestSummary {
  std::string metric;           // "sap" or "sr"
  std::string status;           // "ok", "no-difference", "insufficient-pairs"
  std::size_t n_pairs = 0;
  double mean_difference = 0.0;  // first algorithm minus second
  std::optional<TTestResult> test;
};

struct EvalReport {
  std::vector<CaseRow> rows;
  std::map<std::string, AlgorithmAggregate> aggregates;
  std::vector<PairedTestSummary> tests;  // NCF minus EduRank
  double ncf_train_ms = 0.0;
  TrainLog ncf_log;
};

struct BenchConfig {
  int memory_size = 5;
  NcfConfig ncf;
  DifficultyWeights weights;
  double alpha = 0.05;
};

/// Scores one predicted ranking against a case's reference. The prediction
/// is linearized by the global tie-break before scoring; metric failures
/// mark the row failed rather than aborting the run.
CaseRow score_case(const std::string& algorithm, const EvalCase& eval_case,
                   const PartialOrder& predicted, double wall_ms);

/// Trains NCF on the training attempts' difficulty scores, builds per-student
/// orders for EduRank from the same scores, ranks every case with both
/// algorithms, and runs paired t-tests on per-case SAP and SR.
EvalReport run_comparison(const std::vector<AnswerAttempt>& training,
                          const std::vector<EvalCase>& cases, const BenchConfig& config);

struct SweepPoint {
  Activation activation = Activation::Tanh;
  int k = 40;
  int layers = 1;
  auto operator<=>(const SweepPoint&) const = default;
};

struct SweepRow {
  SweepPoint point;
  bool ok = false;
  std::string error;
  std::size_t cases_ok = 0;
  double mean_sap = 0.0;
  double mean_sr = 0.0;
  double train_wall_ms = 0.0;
};

/// NCF-only evaluation per grid point with fixed data and seed; duplicate
/// points are dropped with a warning and individual failures recorded.
/// Grid points run sequentially by default; `parallel` opts into concurrent
/// execution, which leaves results identical but makes the recorded
/// wall-times non-comparable across points.
std::vector<SweepRow> sweep(const std::vector<AnswerAttempt>& training,
                            const std::vector<EvalCase>& cases,
                            const std::vector<SweepPoint>& grid, const BenchConfig& base,
                            std::vector<std::string>* warnings = nullptr,
                            bool parallel = false);

// Report emission. The case CSV is the determinism surface: byte-identical
// across same-seed runs except for the trailing wall_ms column.
std::string case_csv(const EvalReport& report);
std::string summary_text(const EvalReport& report, const BenchConfig& config);
std::string ttest_csv(const EvalReport& report);
std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string train_log_csv(const TrainLog& log);
void write_file(const std::string& content, const std::filesystem::path& path);

}  // namespace seqrank
