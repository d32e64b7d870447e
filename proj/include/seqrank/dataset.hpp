#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seqrank/core.hpp"

namespace seqrank {

/// Synthetic generator parameters. True difficulty is sigmoid of a shared
/// per-question component plus a student-question latent interaction, with
/// optional Gaussian noise; grade/retries/duration are derived so that the
/// default difficulty weights recover the same ordering.
struct SyntheticSpec {
  int students = 30;
  int questions = 40;
  int questionnaires = 4;
  int latent_dim = 2;
  double noise = 0.1;
  std::uint64_t seed = 1;
};

struct DatasetSpec {
  std::optional<std::filesystem::path> path;   // tab-separated export
  std::optional<SyntheticSpec> synthetic;
  std::optional<std::size_t> max_attempts;     // seeded-shuffle prefix cap
  std::uint64_t seed = 1;                      // cap shuffling
  double malformed_threshold = 0.01;           // skipped-row fraction before hard failure
  // Which column provides the questionnaire label for file sources:
  // "unit" (hierarchy prefix before the first comma), "hierarchy" (whole
  // field) or "problem".
  std::string questionnaire_column = "unit";
};

struct IngestResult {
  std::vector<AnswerAttempt> attempts;
  std::size_t total_rows = 0;
  std::size_t malformed_rows = 0;
  std::size_t missing_durations = 0;
  std::vector<std::string> warnings;
};

/// Parses a file source or generates synthetic attempts, then applies the
/// max_attempts cap. Malformed rows are skipped and counted; exceeding the
/// threshold raises ProtocolError.
IngestResult ingest(const DatasetSpec& spec);

struct SyntheticDataset {
  std::vector<AnswerAttempt> attempts;
  std::map<StudentId, std::map<QuestionId, double>> true_difficulty;
};

SyntheticDataset generate_synthetic(const SyntheticSpec& spec);

/// Writes attempts in the canonical tab-separated layout that ingest also
/// accepts (header: student, question, questionnaire, grade, retries,
/// duration_seconds).
void write_attempts_tsv(const std::vector<AnswerAttempt>& attempts,
                        const std::filesystem::path& path);

}  // namespace seqrank
