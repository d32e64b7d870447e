#include "seqrank/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <climits>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "seqrank/rng.hpp"

namespace seqrank {

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool parse_double(const std::string& s, double* out) {
  try {
    std::size_t consumed = 0;
    double v = std::stod(s, &consumed);
    if (consumed != s.size() || !std::isfinite(v)) return false;
    *out = v;
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

bool parse_int(const std::string& s, int* out) {
  try {
    std::size_t consumed = 0;
    long v = std::stol(s, &consumed);
    if (consumed != s.size() || v < INT_MIN || v > INT_MAX) return false;
    *out = static_cast<int>(v);
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

bool missing_field(const std::string& s) {
  std::string v = lower(trim(s));
  return v.empty() || v == "null" || v == "na" || v == "nan" || v == ".";
}

// Column roles in the accepted tab-separated layouts.
struct ColumnMap {
  int student = -1;
  int hierarchy = -1;   // questionnaire source for KDD-style rows
  int problem = -1;
  int step = -1;        // optional; question id is problem[::step]
  int grade = -1;
  int retries = -1;
  int duration = -1;
  int question = -1;       // canonical layout only
  int questionnaire = -1;  // canonical layout only
  bool canonical = false;
};

std::optional<ColumnMap> map_header(const std::vector<std::string>& fields) {
  ColumnMap map;
  bool any = false;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    std::string name = lower(trim(fields[i]));
    int idx = static_cast<int>(i);
    if (name == "anon student id" || name == "student") {
      map.student = idx;
      any = true;
    } else if (name == "problem hierarchy" || name == "hierarchy") {
      map.hierarchy = idx;
    } else if (name == "problem name" || name == "problem") {
      map.problem = idx;
    } else if (name == "step name" || name == "step") {
      map.step = idx;
    } else if (name == "correct first attempt" || name == "correct_first_attempt" ||
               name == "grade") {
      map.grade = idx;
    } else if (name == "incorrects" || name == "retries") {
      map.retries = idx;
    } else if (name == "step duration (sec)" || name == "step_duration" ||
               name == "duration_seconds" || name == "duration") {
      map.duration = idx;
    } else if (name == "question") {
      map.question = idx;
    } else if (name == "questionnaire") {
      map.questionnaire = idx;
    }
  }
  if (!any) return std::nullopt;
  if (map.question >= 0 && map.questionnaire >= 0) map.canonical = true;
  if (map.student < 0 || map.grade < 0) return std::nullopt;
  if (!map.canonical && (map.problem < 0 || map.hierarchy < 0)) return std::nullopt;
  return map;
}

ColumnMap positional_map() {
  // Headerless layout: student, hierarchy, problem, step, correct-first-
  // attempt, incorrects, step duration seconds.
  ColumnMap map;
  map.student = 0;
  map.hierarchy = 1;
  map.problem = 2;
  map.step = 3;
  map.grade = 4;
  map.retries = 5;
  map.duration = 6;
  return map;
}

std::string questionnaire_label(const DatasetSpec& spec, const ColumnMap& map,
                                const std::vector<std::string>& fields) {
  if (map.canonical) return trim(fields[map.questionnaire]);
  if (spec.questionnaire_column == "problem") return trim(fields[map.problem]);
  std::string hierarchy = trim(fields[map.hierarchy]);
  if (spec.questionnaire_column == "hierarchy") return hierarchy;
  // "unit": the hierarchy prefix before the first comma.
  std::size_t comma = hierarchy.find(',');
  return comma == std::string::npos ? hierarchy : trim(hierarchy.substr(0, comma));
}

IngestResult ingest_file(const DatasetSpec& spec) {
  std::ifstream is(*spec.path);
  if (!is) {
    throw ProtocolError("cannot open dataset file: " + spec.path->string());
  }
  IngestResult result;
  std::string line;
  ColumnMap map;
  bool have_map = false;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> fields = split_tabs(line);
    if (!have_map) {
      if (auto from_header = map_header(fields)) {
        map = *from_header;
        have_map = true;
        continue;  // header row consumed
      }
      map = positional_map();
      have_map = true;
    }
    ++result.total_rows;
    int max_needed = std::max({map.student, map.hierarchy, map.problem, map.step, map.grade,
                               map.retries, map.duration, map.question, map.questionnaire});
    if (static_cast<int>(fields.size()) <= max_needed) {
      ++result.malformed_rows;
      continue;
    }
    AnswerAttempt attempt;
    attempt.student.value = trim(fields[map.student]);
    if (map.canonical) {
      attempt.question.value = trim(fields[map.question]);
    } else {
      std::string problem = trim(fields[map.problem]);
      std::string step = map.step >= 0 ? trim(fields[map.step]) : "";
      attempt.question.value = step.empty() ? problem : problem + "::" + step;
    }
    attempt.questionnaire = questionnaire_label(spec, map, fields);
    double grade = 0.0;
    int retries = 0;
    bool ok = !attempt.student.value.empty() && !attempt.question.value.empty() &&
              parse_double(trim(fields[map.grade]), &grade) && grade >= 0.0 && grade <= 1.0;
    if (ok && map.retries >= 0 && !missing_field(fields[map.retries])) {
      ok = parse_int(trim(fields[map.retries]), &retries) && retries >= 0;
    }
    if (!ok) {
      ++result.malformed_rows;
      continue;
    }
    attempt.first_attempt_grade = grade;
    attempt.retries = retries;
    if (map.duration >= 0 && !missing_field(fields[map.duration])) {
      double duration = 0.0;
      if (!parse_double(trim(fields[map.duration]), &duration) || duration < 0.0) {
        ++result.malformed_rows;
        continue;
      }
      attempt.duration_seconds = duration;
    } else {
      attempt.duration_seconds = 0.0;
      ++result.missing_durations;
    }
    result.attempts.push_back(std::move(attempt));
  }
  if (result.missing_durations > 0) {
    result.warnings.push_back(std::to_string(result.missing_durations) +
                              " rows had no duration; treated as 0 s");
  }
  if (result.total_rows == 0) {
    result.warnings.push_back("dataset file contains no data rows");
  } else if (result.malformed_rows > 0) {
    double fraction = static_cast<double>(result.malformed_rows) /
                      static_cast<double>(result.total_rows);
    if (fraction > spec.malformed_threshold) {
      throw ProtocolError("malformed rows exceed threshold: " +
                          std::to_string(result.malformed_rows) + " of " +
                          std::to_string(result.total_rows) + " rows in " +
                          spec.path->string());
    }
    result.warnings.push_back(std::to_string(result.malformed_rows) +
                              " malformed rows skipped");
  }
  return result;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.students < 1 || spec.questions < 1 || spec.questionnaires < 1 ||
      spec.latent_dim < 1) {
    throw std::invalid_argument("generate_synthetic: counts must be positive");
  }
  if (!(spec.noise >= 0.0)) {
    throw std::invalid_argument("generate_synthetic: noise must be >= 0");
  }
  Rng rng(spec.seed);
  const int dim = spec.latent_dim;
  const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(dim));

  // Per-question shared difficulty plus per-student latent taste. The shared
  // component is weighted up so students broadly agree on hard questions.
  std::vector<double> shared(spec.questions);
  std::vector<std::vector<double>> item_latent(spec.questions, std::vector<double>(dim));
  for (int q = 0; q < spec.questions; ++q) {
    shared[q] = 1.25 * rng.normal();
    for (int d = 0; d < dim; ++d) item_latent[q][d] = rng.normal();
  }
  std::vector<std::vector<double>> user_latent(spec.students, std::vector<double>(dim));
  for (int s = 0; s < spec.students; ++s) {
    for (int d = 0; d < dim; ++d) user_latent[s][d] = rng.normal();
  }

  auto student_id = [&](int s) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "s%03d", s);
    return StudentId{buf};
  };
  auto question_id = [&](int q) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "q%03d", q);
    return QuestionId{buf};
  };
  auto unit_id = [&](int q) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "unit%02d", q % spec.questionnaires);
    return std::string(buf);
  };

  SyntheticDataset out;
  for (int s = 0; s < spec.students; ++s) {
    StudentId sid = student_id(s);
    auto& truth_row = out.true_difficulty[sid];
    for (int q = 0; q < spec.questions; ++q) {
      double score = shared[q];
      for (int d = 0; d < dim; ++d) score += user_latent[s][d] * item_latent[q][d] * inv_sqrt_dim;
      if (spec.noise > 0.0) score += spec.noise * rng.normal();
      double difficulty = 1.0 / (1.0 + std::exp(-score));

      AnswerAttempt attempt;
      attempt.student = sid;
      attempt.question = question_id(q);
      attempt.questionnaire = unit_id(q);
      // Feature inversion keyed to the default difficulty weights: the grade
      // term is strictly monotone in the true difficulty, so the derived
      // order matches the latent order exactly at zero noise.
      attempt.first_attempt_grade = 1.0 - difficulty;
      attempt.retries = std::min(static_cast<int>(difficulty * 6.0), 5);
      attempt.duration_seconds = 300.0 * difficulty;
      truth_row.emplace(attempt.question, difficulty);
      out.attempts.push_back(std::move(attempt));
    }
  }
  return out;
}

IngestResult ingest(const DatasetSpec& spec) {
  if (spec.path && spec.synthetic) {
    throw std::invalid_argument("ingest: specify either a file or synthetic parameters, not both");
  }
  if (!spec.path && !spec.synthetic) {
    throw std::invalid_argument("ingest: no data source given");
  }
  if (spec.max_attempts && *spec.max_attempts < 1) {
    throw std::invalid_argument("ingest: max_attempts must be >= 1");
  }
  IngestResult result;
  if (spec.path) {
    result = ingest_file(spec);
  } else {
    result.attempts = generate_synthetic(*spec.synthetic).attempts;
    result.total_rows = result.attempts.size();
  }
  if (spec.max_attempts && result.attempts.size() > *spec.max_attempts) {
    Rng rng(spec.seed);
    rng.shuffle(result.attempts);
    result.attempts.resize(*spec.max_attempts);
    result.warnings.push_back("capped to " + std::to_string(*spec.max_attempts) +
                              " attempts by seeded sampling");
  }
  return result;
}

void write_attempts_tsv(const std::vector<AnswerAttempt>& attempts,
                        const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  os << "student\tquestion\tquestionnaire\tgrade\tretries\tduration_seconds\n";
  char buf[64];
  for (const AnswerAttempt& a : attempts) {
    std::snprintf(buf, sizeof buf, "%.12g\t%d\t%.12g", a.first_attempt_grade, a.retries,
                  a.duration_seconds);
    os << a.student.value << '\t' << a.question.value << '\t' << a.questionnaire << '\t' << buf
       << '\n';
  }
  if (!os) {
    throw std::runtime_error("failed writing: " + path.string());
  }
}

}  // namespace seqrank
