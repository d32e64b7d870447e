#include "seqrank/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <future>
#include <sstream>

#include "seqrank/edurank.hpp"
#include "seqrank/rng.hpp"

namespace seqrank {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::vector<AnswerAttempt> dedup_attempts(const std::vector<AnswerAttempt>& attempts,
                                          std::size_t* dropped) {
  std::set<std::pair<StudentId, QuestionId>> seen;
  std::vector<AnswerAttempt> out;
  out.reserve(attempts.size());
  for (const AnswerAttempt& a : attempts) {
    if (seen.emplace(a.student, a.question).second) {
      out.push_back(a);
    } else if (dropped) {
      ++*dropped;
    }
  }
  return out;
}

}  // namespace

CaseSplit make_cases(const std::vector<AnswerAttempt>& attempts, int n_students,
                     int n_questionnaires, std::uint64_t seed,
                     const DifficultyWeights& weights) {
  if (n_students < 1 || n_questionnaires < 1) {
    throw std::invalid_argument("make_cases: protocol counts must be positive");
  }
  CaseSplit split;
  std::vector<AnswerAttempt> unique = dedup_attempts(attempts, &split.duplicates_dropped);

  // student -> questionnaire -> attempts
  std::map<StudentId, std::map<std::string, std::vector<AnswerAttempt>>> blocks;
  std::map<QuestionId, std::set<StudentId>> answered_by;
  for (const AnswerAttempt& a : unique) {
    validate_attempt(a);
    blocks[a.student][a.questionnaire].push_back(a);
    answered_by[a.question].insert(a.student);
  }

  // A questionnaire is eligible when it has at least two questions and each
  // of its questions is answered by someone else too, so holding the block
  // out cannot leave a cold question behind.
  std::map<StudentId, std::vector<std::string>> eligible;
  for (const auto& [student, per_q] : blocks) {
    for (const auto& [questionnaire, block] : per_q) {
      if (block.size() < 2) continue;
      bool ok = true;
      for (const AnswerAttempt& a : block) {
        if (answered_by.at(a.question).size() < 2) {
          ok = false;
          break;
        }
      }
      if (ok) eligible[student].push_back(questionnaire);
    }
  }
  std::vector<StudentId> eligible_students;
  for (const auto& [student, qs] : eligible) {
    if (static_cast<int>(qs.size()) >= n_questionnaires) eligible_students.push_back(student);
  }
  if (static_cast<int>(eligible_students.size()) < n_students) {
    throw ProtocolError("make_cases: need " + std::to_string(n_students) +
                        " students with >= " + std::to_string(n_questionnaires) +
                        " eligible questionnaires, found " +
                        std::to_string(eligible_students.size()));
  }

  Rng rng(seed);
  rng.shuffle(eligible_students);
  eligible_students.resize(static_cast<std::size_t>(n_students));
  std::sort(eligible_students.begin(), eligible_students.end());

  std::set<std::pair<StudentId, std::string>> held_blocks;
  for (const StudentId& student : eligible_students) {
    std::vector<std::string> qs = eligible.at(student);  // sorted (map order)
    rng.shuffle(qs);
    qs.resize(static_cast<std::size_t>(n_questionnaires));
    std::sort(qs.begin(), qs.end());
    for (const std::string& questionnaire : qs) {
      held_blocks.emplace(student, questionnaire);
    }
  }

  for (const AnswerAttempt& a : unique) {
    if (!held_blocks.count({a.student, a.questionnaire})) {
      split.training.push_back(a);
    }
  }

  for (const auto& [student, questionnaire] : held_blocks) {
    const std::vector<AnswerAttempt>& block = blocks.at(student).at(questionnaire);
    EvalCase eval_case;
    eval_case.student = student;
    eval_case.questionnaire = questionnaire;
    std::map<QuestionId, DifficultyScore> scores;
    for (const AnswerAttempt& a : block) {
      eval_case.candidates.insert(a.question);
      scores.emplace(a.question, difficulty_of(a, weights));
    }
    eval_case.reference = order_from_scores(student, scores, 0.0);
    split.cases.push_back(std::move(eval_case));
  }

  // Cold-start guarantee: every evaluated student and every candidate
  // question must survive in training.
  std::set<StudentId> training_students;
  std::set<QuestionId> training_questions;
  for (const AnswerAttempt& a : split.training) {
    training_students.insert(a.student);
    training_questions.insert(a.question);
  }
  for (const EvalCase& c : split.cases) {
    if (!training_students.count(c.student)) {
      throw ProtocolError("make_cases: student '" + c.student.value +
                          "' would have no training attempts left; the dataset has too few "
                          "questionnaires per student for this protocol");
    }
    for (const QuestionId& q : c.candidates) {
      if (!training_questions.count(q)) {
        throw ProtocolError("make_cases: question '" + q.value +
                            "' would have no training attempts left");
      }
    }
  }
  return split;
}

CaseRow score_case(const std::string& algorithm, const EvalCase& eval_case,
                   const PartialOrder& predicted, double wall_ms) {
  CaseRow row;
  row.algorithm = algorithm;
  row.student = eval_case.student;
  row.questionnaire = eval_case.questionnaire;
  row.n_candidates = eval_case.candidates.size();
  row.wall_ms = wall_ms;
  try {
    std::vector<std::vector<QuestionId>> singletons;
    for (const QuestionId& q : predicted.linearize()) singletons.push_back({q});
    PartialOrder linearized(predicted.owner(), std::move(singletons));
    row.sap = ap_correlation(eval_case.reference, linearized);
    row.sr = spearman_rho(eval_case.reference, linearized);
    row.ndpm = ndpm(eval_case.reference, linearized);
    row.ok = true;
  } catch (const std::exception& e) {
    row.ok = false;
    row.error = e.what();
  }
  return row;
}

namespace {

void accumulate_aggregates(EvalReport& report) {
  std::map<std::string, std::vector<const CaseRow*>> by_algorithm;
  for (const CaseRow& row : report.rows) by_algorithm[row.algorithm].push_back(&row);
  for (const auto& [algorithm, rows] : by_algorithm) {
    AlgorithmAggregate agg;
    for (const CaseRow* row : rows) {
      if (!row->ok) {
        ++agg.cases_failed;
        continue;
      }
      ++agg.cases_ok;
      agg.mean_sap += row->sap;
      agg.mean_sr += row->sr;
      agg.mean_ndpm += row->ndpm;
    }
    if (agg.cases_ok > 0) {
      agg.mean_sap /= static_cast<double>(agg.cases_ok);
      agg.mean_sr /= static_cast<double>(agg.cases_ok);
      agg.mean_ndpm /= static_cast<double>(agg.cases_ok);
    }
    report.aggregates.emplace(algorithm, agg);
  }
}

PairedTestSummary run_paired_test(const std::string& metric,
                                  const std::vector<std::pair<double, double>>& pairs,
                                  double alpha) {
  PairedTestSummary summary;
  summary.metric = metric;
  summary.n_pairs = pairs.size();
  for (const auto& [a, b] : pairs) summary.mean_difference += a - b;
  if (!pairs.empty()) summary.mean_difference /= static_cast<double>(pairs.size());
  if (pairs.size() < 2) {
    summary.status = "insufficient-pairs";
    return summary;
  }
  try {
    summary.test = paired_t_test(pairs, alpha);
    summary.status = "ok";
  } catch (const DegenerateTestError&) {
    summary.status = "no-difference";
  }
  return summary;
}

}  // namespace

EvalReport run_comparison(const std::vector<AnswerAttempt>& training,
                          const std::vector<EvalCase>& cases, const BenchConfig& config) {
  EvalReport report;

  std::size_t dropped = 0;
  std::vector<AnswerAttempt> unique = dedup_attempts(training, &dropped);
  std::vector<TrainingRecord> records;
  records.reserve(unique.size());
  std::set<StudentId> student_set;
  std::set<QuestionId> question_set;
  for (const AnswerAttempt& a : unique) {
    records.push_back({a.student, a.question, difficulty_of(a, config.weights)});
    student_set.insert(a.student);
    question_set.insert(a.question);
  }
  if (records.empty()) {
    throw std::invalid_argument("run_comparison: no training attempts");
  }

  NcfModel model = NcfModel::init(
      config.ncf, std::vector<StudentId>(student_set.begin(), student_set.end()),
      std::vector<QuestionId>(question_set.begin(), question_set.end()));
  Clock::time_point train_start = Clock::now();
  report.ncf_log = model.train(records);
  report.ncf_train_ms = ms_since(train_start);

  StudentOrders orders = orders_from_log(unique, config.weights);

  for (const EvalCase& eval_case : cases) {
    {
      Clock::time_point start = Clock::now();
      CaseRow row;
      try {
        PartialOrder predicted = edurank::rank(eval_case.student, eval_case.candidates,
                                               orders.orders, config.memory_size);
        row = score_case("edurank", eval_case, predicted, ms_since(start));
      } catch (const std::exception& e) {
        row.algorithm = "edurank";
        row.student = eval_case.student;
        row.questionnaire = eval_case.questionnaire;
        row.n_candidates = eval_case.candidates.size();
        row.ok = false;
        row.error = e.what();
        row.wall_ms = ms_since(start);
      }
      report.rows.push_back(std::move(row));
    }
    {
      Clock::time_point start = Clock::now();
      CaseRow row;
      try {
        PartialOrder predicted = model.rank(eval_case.student, eval_case.candidates);
        row = score_case("ncf", eval_case, predicted, ms_since(start));
      } catch (const std::exception& e) {
        row.algorithm = "ncf";
        row.student = eval_case.student;
        row.questionnaire = eval_case.questionnaire;
        row.n_candidates = eval_case.candidates.size();
        row.ok = false;
        row.error = e.what();
        row.wall_ms = ms_since(start);
      }
      report.rows.push_back(std::move(row));
    }
  }

  accumulate_aggregates(report);

  // Paired tests (NCF minus EduRank) over mutually successful cases.
  std::vector<std::pair<double, double>> sap_pairs;
  std::vector<std::pair<double, double>> sr_pairs;
  for (std::size_t i = 0; i + 1 < report.rows.size(); i += 2) {
    const CaseRow& edu = report.rows[i];
    const CaseRow& ncf = report.rows[i + 1];
    if (edu.ok && ncf.ok) {
      sap_pairs.emplace_back(ncf.sap, edu.sap);
      sr_pairs.emplace_back(ncf.sr, edu.sr);
    }
  }
  report.tests.push_back(run_paired_test("sap", sap_pairs, config.alpha));
  report.tests.push_back(run_paired_test("sr", sr_pairs, config.alpha));
  return report;
}

std::vector<SweepRow> sweep(const std::vector<AnswerAttempt>& training,
                            const std::vector<EvalCase>& cases,
                            const std::vector<SweepPoint>& grid, const BenchConfig& base,
                            std::vector<std::string>* warnings, bool parallel) {
  if (grid.empty()) {
    throw std::invalid_argument("sweep: empty grid");
  }
  std::size_t dropped = 0;
  std::vector<AnswerAttempt> unique = dedup_attempts(training, &dropped);
  std::vector<TrainingRecord> records;
  std::set<StudentId> student_set;
  std::set<QuestionId> question_set;
  for (const AnswerAttempt& a : unique) {
    records.push_back({a.student, a.question, difficulty_of(a, base.weights)});
    student_set.insert(a.student);
    question_set.insert(a.question);
  }
  if (records.empty()) {
    throw std::invalid_argument("sweep: no training attempts");
  }
  std::vector<StudentId> students(student_set.begin(), student_set.end());
  std::vector<QuestionId> questions(question_set.begin(), question_set.end());

  std::set<SweepPoint> seen;
  std::vector<SweepPoint> points;
  for (const SweepPoint& point : grid) {
    if (seen.insert(point).second) {
      points.push_back(point);
    } else if (warnings) {
      warnings->push_back("duplicate grid point dropped: " + to_string(point.activation) +
                          " k=" + std::to_string(point.k) +
                          " l=" + std::to_string(point.layers));
    }
  }

  auto evaluate_point = [&](const SweepPoint& point) {
    SweepRow row;
    row.point = point;
    try {
      NcfConfig ncf = base.ncf;
      ncf.activation = point.activation;
      ncf.k = point.k;
      ncf.layers = point.layers;
      NcfModel model = NcfModel::init(ncf, students, questions);
      Clock::time_point start = Clock::now();
      model.train(records);
      row.train_wall_ms = ms_since(start);
      double sap_sum = 0.0;
      double sr_sum = 0.0;
      for (const EvalCase& eval_case : cases) {
        PartialOrder predicted = model.rank(eval_case.student, eval_case.candidates);
        CaseRow scored = score_case("ncf", eval_case, predicted, 0.0);
        if (scored.ok) {
          sap_sum += scored.sap;
          sr_sum += scored.sr;
          ++row.cases_ok;
        }
      }
      if (row.cases_ok > 0) {
        row.mean_sap = sap_sum / static_cast<double>(row.cases_ok);
        row.mean_sr = sr_sum / static_cast<double>(row.cases_ok);
      }
      row.ok = true;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    return row;
  };

  std::vector<SweepRow> rows(points.size());
  if (parallel && points.size() > 1) {
    // Each point trains its own model from the same seed; results match the
    // sequential path, only the wall-times contend.
    std::vector<std::future<SweepRow>> futures;
    futures.reserve(points.size());
    for (const SweepPoint& point : points) {
      futures.push_back(std::async(std::launch::async, evaluate_point, point));
    }
    for (std::size_t i = 0; i < futures.size(); ++i) rows[i] = futures[i].get();
    if (warnings) {
      warnings->push_back("parallel sweep: train_wall_ms values are not comparable");
    }
  } else {
    for (std::size_t i = 0; i < points.size(); ++i) rows[i] = evaluate_point(points[i]);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Report emission
// ---------------------------------------------------------------------------

std::string case_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "algorithm,student,questionnaire,n_candidates,status,sap,sr,ndpm,error,wall_ms\n";
  for (const CaseRow& row : report.rows) {
    os << row.algorithm << ',' << csv_escape(row.student.value) << ','
       << csv_escape(row.questionnaire) << ',' << row.n_candidates << ','
       << (row.ok ? "ok" : "failed") << ',';
    if (row.ok) {
      os << format_double(row.sap) << ',' << format_double(row.sr) << ','
         << format_double(row.ndpm);
    } else {
      os << ",,";
    }
    os << ',' << csv_escape(row.error) << ',' << format_double(row.wall_ms) << '\n';
  }
  return os.str();
}

std::string summary_text(const EvalReport& report, const BenchConfig& config) {
  std::ostringstream os;
  os << "question sequencing benchmark\n";
  os << "=============================\n\n";
  os << "ncf config: k=" << config.ncf.k << " layers=" << config.ncf.layers
     << " activation=" << to_string(config.ncf.activation)
     << " dropout=" << format_double(config.ncf.dropout_rate)
     << " batch_size=" << config.ncf.batch_size << " epochs=" << config.ncf.epochs
     << " seed=" << config.ncf.seed << '\n';
  os << "edurank memory_size=" << config.memory_size << '\n';
  os << "ncf training time: " << format_double(report.ncf_train_ms) << " ms\n\n";
  os << "per-algorithm means over successful cases:\n";
  for (const auto& [algorithm, agg] : report.aggregates) {
    os << "  " << algorithm << ": cases_ok=" << agg.cases_ok
       << " failed=" << agg.cases_failed << " mean_sap=" << format_double(agg.mean_sap)
       << " mean_sr=" << format_double(agg.mean_sr)
       << " mean_ndpm=" << format_double(agg.mean_ndpm) << '\n';
  }
  os << "\npaired t-tests (ncf - edurank), alpha=" << format_double(config.alpha) << ":\n";
  for (const PairedTestSummary& t : report.tests) {
    os << "  " << t.metric << ": status=" << t.status << " n=" << t.n_pairs
       << " mean_diff=" << format_double(t.mean_difference);
    if (t.test) {
      os << " t=" << format_double(t.test->t_statistic) << " dof=" << t.test->degrees_of_freedom
         << " t_critical=" << format_double(t.test->t_critical)
         << " reject_null=" << (t.test->reject_null ? "yes" : "no");
    }
    os << '\n';
  }
  return os.str();
}

std::string ttest_csv(const EvalReport& report) {
  std::ostringstream os;
  os << "metric,status,n_pairs,mean_difference,t_statistic,dof,t_critical,reject_null\n";
  for (const PairedTestSummary& t : report.tests) {
    os << t.metric << ',' << t.status << ',' << t.n_pairs << ','
       << format_double(t.mean_difference) << ',';
    if (t.test) {
      os << format_double(t.test->t_statistic) << ',' << t.test->degrees_of_freedom << ','
         << format_double(t.test->t_critical) << ',' << (t.test->reject_null ? "yes" : "no");
    } else {
      os << ",,,";
    }
    os << '\n';
  }
  return os.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << "activation,k,layers,status,cases_ok,mean_sap,mean_sr,error,train_wall_ms\n";
  for (const SweepRow& row : rows) {
    os << to_string(row.point.activation) << ',' << row.point.k << ',' << row.point.layers
       << ',' << (row.ok ? "ok" : "failed") << ',' << row.cases_ok << ',';
    if (row.ok && row.cases_ok > 0) {
      os << format_double(row.mean_sap) << ',' << format_double(row.mean_sr);
    } else {
      os << ',';
    }
    os << ',' << csv_escape(row.error) << ',' << format_double(row.train_wall_ms) << '\n';
  }
  return os.str();
}

std::string train_log_csv(const TrainLog& log) {
  std::ostringstream os;
  os << "epoch,mse,layer_grad_norms\n";
  for (std::size_t i = 0; i < log.size(); ++i) {
    os << (i + 1) << ',' << format_double(log[i].mse) << ',';
    std::string norms;
    for (std::size_t j = 0; j < log[i].layer_grad_norms.size(); ++j) {
      if (j > 0) norms += ';';
      norms += format_double(log[i].layer_grad_norms[j]);
    }
    os << norms << '\n';
  }
  return os.str();
}

void write_file(const std::string& content, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  os << content;
  if (!os) {
    throw std::runtime_error("failed writing: " + path.string());
  }
}

}  // namespace seqrank
