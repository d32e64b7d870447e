#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "seqrank/benchmark.hpp"
#include "seqrank/dataset.hpp"
#include "seqrank/rng.hpp"

namespace fs = std::filesystem;
using namespace seqrank;

namespace {

struct DataOptions {
  std::string path;
  std::string synthetic;  // "students,questions,questionnaires,latent_dim,noise"
  std::size_t max_attempts = 0;
  std::string questionnaire_column = "unit";
};

void add_data_options(CLI::App* cmd, DataOptions* opts) {
  auto* data = cmd->add_option("--data", opts->path, "Tab-separated attempts export");
  auto* synthetic = cmd->add_option(
      "--synthetic", opts->synthetic,
      "Synthetic generator: students,questions,questionnaires,latent_dim,noise");
  data->excludes(synthetic);
  cmd->add_option("--max-attempts", opts->max_attempts,
                  "Cap attempts by seeded sampling (0 = no cap)");
  cmd->add_option("--questionnaire-column", opts->questionnaire_column,
                  "Questionnaire label source: unit|hierarchy|problem")
      ->check(CLI::IsMember({"unit", "hierarchy", "problem"}));
}

DatasetSpec make_dataset_spec(const DataOptions& opts, std::uint64_t seed) {
  DatasetSpec spec;
  spec.seed = seed;
  spec.questionnaire_column = opts.questionnaire_column;
  if (opts.max_attempts > 0) spec.max_attempts = opts.max_attempts;
  if (!opts.path.empty()) {
    spec.path = fs::path(opts.path);
  } else if (!opts.synthetic.empty()) {
    SyntheticSpec syn;
    std::istringstream is(opts.synthetic);
    char sep = ',';
    if (!(is >> syn.students >> sep >> syn.questions >> sep >> syn.questionnaires >> sep >>
          syn.latent_dim >> sep >> syn.noise)) {
      throw CLI::ValidationError(
          "--synthetic expects students,questions,questionnaires,latent_dim,noise");
    }
    syn.seed = seed;
    spec.synthetic = syn;
  } else {
    throw CLI::ValidationError("one of --data or --synthetic is required");
  }
  return spec;
}

IngestResult ingest_verbose(const DatasetSpec& spec) {
  IngestResult result = ingest(spec);
  for (const std::string& warning : result.warnings) {
    std::cerr << "warning: " << warning << '\n';
  }
  std::cerr << "ingested " << result.attempts.size() << " attempts\n";
  return result;
}

struct ProtocolOptions {
  int students = 3;
  int questionnaires = 4;
};

struct NcfOptions {
  int k = 40;
  int layers = 1;
  std::string activation = "tanh";
  double dropout = 0.25;
  int batch_size = 1024;
  int epochs = 20;
};

void add_ncf_options(CLI::App* cmd, NcfOptions* opts) {
  cmd->add_option("--k", opts->k, "Embedding size")->check(CLI::PositiveNumber);
  cmd->add_option("--layers", opts->layers, "Hidden CF layers")->check(CLI::NonNegativeNumber);
  cmd->add_option("--activation", opts->activation, "Hidden activation")
      ->check(CLI::IsMember({"tanh", "relu", "linear"}));
  cmd->add_option("--dropout", opts->dropout, "Dropout rate in [0,1)");
  cmd->add_option("--batch-size", opts->batch_size, "Mini-batch size")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--epochs", opts->epochs, "Training epochs")->check(CLI::PositiveNumber);
}

struct WeightOptions {
  double w_grade = 0.5;
  double w_retries = 0.3;
  double w_duration = 0.2;
  int retry_cap = 5;
  double duration_cap = 300.0;
};

void add_weight_options(CLI::App* cmd, WeightOptions* opts) {
  cmd->add_option("--w-grade", opts->w_grade, "Difficulty weight of the first-attempt grade");
  cmd->add_option("--w-retries", opts->w_retries, "Difficulty weight of retries");
  cmd->add_option("--w-duration", opts->w_duration, "Difficulty weight of duration");
  cmd->add_option("--retry-cap", opts->retry_cap, "Retry saturation cap");
  cmd->add_option("--duration-cap", opts->duration_cap, "Duration saturation cap (seconds)");
}

NcfConfig make_ncf_config(const NcfOptions& opts, std::uint64_t seed) {
  NcfConfig config;
  config.k = opts.k;
  config.layers = opts.layers;
  config.activation = activation_from_string(opts.activation);
  config.dropout_rate = opts.dropout;
  config.batch_size = opts.batch_size;
  config.epochs = opts.epochs;
  config.seed = seed;
  return config;
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        current += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        current += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  fields.push_back(current);
  return fields;
}

std::vector<int> parse_int_list(const std::string& csv, const std::string& flag) {
  std::vector<int> values;
  std::istringstream is(csv);
  std::string token;
  while (std::getline(is, token, ',')) {
    try {
      values.push_back(std::stoi(token));
    } catch (const std::exception&) {
      throw CLI::ValidationError(flag + ": cannot parse '" + token + "'");
    }
  }
  if (values.empty()) throw CLI::ValidationError(flag + ": empty list");
  return values;
}

int run_guarded(const std::function<void()>& body) {
  try {
    body();
    return 0;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized question sequencing: EduRank vs neural collaborative filtering"};
  app.require_subcommand(1);

  // --- ingest ---
  auto* ingest_cmd = app.add_subcommand("ingest", "Validate and convert a dataset");
  DataOptions ingest_data;
  std::uint64_t ingest_seed = 7;
  std::string ingest_out;
  add_data_options(ingest_cmd, &ingest_data);
  ingest_cmd->add_option("--seed", ingest_seed, "Seed for the attempts cap");
  ingest_cmd->add_option("--out", ingest_out, "Write normalized attempts TSV here");

  // --- bench ---
  auto* bench_cmd = app.add_subcommand("bench", "Run the EduRank vs NCF comparison");
  DataOptions bench_data;
  ProtocolOptions bench_protocol;
  NcfOptions bench_ncf;
  WeightOptions bench_weights;
  int memory_size = 5;
  double alpha = 0.05;
  std::uint64_t bench_seed = 7;
  std::string bench_out;
  add_data_options(bench_cmd, &bench_data);
  bench_cmd->add_option("--students", bench_protocol.students, "Evaluation students")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--questionnaires", bench_protocol.questionnaires,
                        "Held-out questionnaires per student")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--memory-size", memory_size, "EduRank neighbor count")
      ->check(CLI::PositiveNumber);
  add_ncf_options(bench_cmd, &bench_ncf);
  add_weight_options(bench_cmd, &bench_weights);
  bench_cmd->add_option("--alpha", alpha, "t-test significance level");
  bench_cmd->add_option("--seed", bench_seed, "Master seed (data, protocol, model)");
  bench_cmd->add_option("--out", bench_out, "Directory for report files");

  // --- sweep ---
  auto* sweep_cmd = app.add_subcommand("sweep", "NCF hyperparameter sweep");
  DataOptions sweep_data;
  ProtocolOptions sweep_protocol;
  NcfOptions sweep_ncf;
  WeightOptions sweep_weights;
  std::string k_range = "20:80:20";
  std::string layer_set = "0,1,2,4,8";
  std::string activation_set = "tanh,linear,relu";
  std::uint64_t sweep_seed = 7;
  std::string sweep_out;
  bool sweep_parallel = false;
  add_data_options(sweep_cmd, &sweep_data);
  sweep_cmd->add_option("--students", sweep_protocol.students, "Evaluation students");
  sweep_cmd->add_option("--questionnaires", sweep_protocol.questionnaires,
                        "Held-out questionnaires per student");
  add_ncf_options(sweep_cmd, &sweep_ncf);
  add_weight_options(sweep_cmd, &sweep_weights);
  sweep_cmd->add_option("--k-range", k_range, "Embedding sizes min:max:step");
  sweep_cmd->add_option("--layer-set", layer_set, "Comma-separated layer counts");
  sweep_cmd->add_option("--activation-set", activation_set, "Comma-separated activations");
  sweep_cmd->add_option("--seed", sweep_seed, "Master seed");
  sweep_cmd->add_option("--out", sweep_out, "Directory for sweep.csv");
  sweep_cmd->add_flag("--parallel", sweep_parallel,
                      "Evaluate grid points concurrently (wall-times not comparable)");

  // --- ttest ---
  auto* ttest_cmd = app.add_subcommand("ttest", "Recompute paired t-tests from a report");
  std::string report_path;
  double ttest_alpha = 0.05;
  std::string ttest_out;
  ttest_cmd->add_option("--report", report_path, "report.csv from bench")->required();
  ttest_cmd->add_option("--alpha", ttest_alpha, "Significance level");
  ttest_cmd->add_option("--out", ttest_out, "Directory for ttest.csv");

  CLI11_PARSE(app, argc, argv);

  if (*ingest_cmd) {
    return run_guarded([&] {
      DatasetSpec spec = make_dataset_spec(ingest_data, ingest_seed);
      IngestResult result = ingest_verbose(spec);
      std::set<StudentId> students;
      std::set<QuestionId> questions;
      std::set<std::string> questionnaires;
      for (const AnswerAttempt& a : result.attempts) {
        validate_attempt(a);
        students.insert(a.student);
        questions.insert(a.question);
        questionnaires.insert(a.questionnaire);
      }
      std::cout << "attempts: " << result.attempts.size() << "\nstudents: " << students.size()
                << "\nquestions: " << questions.size()
                << "\nquestionnaires: " << questionnaires.size()
                << "\nmalformed rows skipped: " << result.malformed_rows << '\n';
      if (!ingest_out.empty()) {
        write_attempts_tsv(result.attempts, ingest_out);
        std::cout << "wrote " << ingest_out << '\n';
      }
    });
  }

  if (*bench_cmd) {
    return run_guarded([&] {
      DatasetSpec spec = make_dataset_spec(bench_data, bench_seed);
      IngestResult data = ingest_verbose(spec);
      BenchConfig config;
      config.memory_size = memory_size;
      config.alpha = alpha;
      config.weights =
          DifficultyWeights(bench_weights.w_grade, bench_weights.w_retries,
                            bench_weights.w_duration, bench_weights.retry_cap,
                            bench_weights.duration_cap);
      config.ncf = make_ncf_config(bench_ncf, mix_seed(bench_seed, 2));
      CaseSplit split = make_cases(data.attempts, bench_protocol.students,
                                   bench_protocol.questionnaires, mix_seed(bench_seed, 1),
                                   config.weights);
      std::cerr << "protocol: " << split.cases.size() << " cases, "
                << split.training.size() << " training attempts\n";
      EvalReport report = run_comparison(split.training, split.cases, config);
      std::cout << summary_text(report, config);
      if (!bench_out.empty()) {
        fs::create_directories(bench_out);
        write_file(case_csv(report), fs::path(bench_out) / "report.csv");
        write_file(summary_text(report, config), fs::path(bench_out) / "summary.txt");
        write_file(ttest_csv(report), fs::path(bench_out) / "ttest.csv");
        write_file(train_log_csv(report.ncf_log), fs::path(bench_out) / "train_log.csv");
        std::cout << "wrote report.csv, summary.txt, ttest.csv, train_log.csv to "
                  << bench_out << '\n';
      }
    });
  }

  if (*sweep_cmd) {
    return run_guarded([&] {
      DatasetSpec spec = make_dataset_spec(sweep_data, sweep_seed);
      IngestResult data = ingest_verbose(spec);
      BenchConfig base;
      base.weights = DifficultyWeights(sweep_weights.w_grade, sweep_weights.w_retries,
                                       sweep_weights.w_duration, sweep_weights.retry_cap,
                                       sweep_weights.duration_cap);
      base.ncf = make_ncf_config(sweep_ncf, mix_seed(sweep_seed, 2));
      CaseSplit split = make_cases(data.attempts, sweep_protocol.students,
                                   sweep_protocol.questionnaires, mix_seed(sweep_seed, 1),
                                   base.weights);

      int k_min = 0, k_max = 0, k_step = 0;
      char sep = ':';
      std::istringstream is(k_range);
      if (!(is >> k_min >> sep >> k_max >> sep >> k_step) || k_step <= 0 || k_min <= 0 ||
          k_max < k_min) {
        throw CLI::ValidationError("--k-range expects min:max:step");
      }
      std::vector<SweepPoint> grid;
      std::istringstream acts(activation_set);
      std::string act_token;
      while (std::getline(acts, act_token, ',')) {
        Activation act = activation_from_string(act_token);
        for (int k = k_min; k <= k_max; k += k_step) {
          for (int l : parse_int_list(layer_set, "--layer-set")) {
            grid.push_back({act, k, l});
          }
        }
      }
      std::vector<std::string> warnings;
      std::vector<SweepRow> rows =
          sweep(split.training, split.cases, grid, base, &warnings, sweep_parallel);
      for (const std::string& warning : warnings) std::cerr << "warning: " << warning << '\n';
      std::cout << sweep_csv(rows);
      if (!sweep_out.empty()) {
        fs::create_directories(sweep_out);
        write_file(sweep_csv(rows), fs::path(sweep_out) / "sweep.csv");
        std::cout << "wrote sweep.csv to " << sweep_out << '\n';
      }
    });
  }

  if (*ttest_cmd) {
    return run_guarded([&] {
      std::ifstream is(report_path);
      if (!is) throw ProtocolError("cannot open report: " + report_path);
      std::string line;
      if (!std::getline(is, line)) throw ProtocolError("empty report: " + report_path);
      // columns: algorithm,student,questionnaire,n_candidates,status,sap,sr,ndpm,error,wall_ms
      struct Entry {
        double sap = 0.0, sr = 0.0;
        bool ok = false;
      };
      std::map<std::pair<std::string, std::string>, std::map<std::string, Entry>> cases;
      while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f = csv_split(line);
        if (f.size() < 8) continue;
        Entry e;
        e.ok = f[4] == "ok";
        if (e.ok) {
          e.sap = std::stod(f[5]);
          e.sr = std::stod(f[6]);
        }
        cases[{f[1], f[2]}][f[0]] = e;
      }
      std::vector<std::pair<double, double>> sap_pairs, sr_pairs;
      for (const auto& [key, algorithms] : cases) {
        auto ncf = algorithms.find("ncf");
        auto edu = algorithms.find("edurank");
        if (ncf == algorithms.end() || edu == algorithms.end()) continue;
        if (!ncf->second.ok || !edu->second.ok) continue;
        sap_pairs.emplace_back(ncf->second.sap, edu->second.sap);
        sr_pairs.emplace_back(ncf->second.sr, edu->second.sr);
      }
      EvalReport fake;
      auto run_one = [&](const std::string& metric,
                         const std::vector<std::pair<double, double>>& pairs) {
        PairedTestSummary summary;
        summary.metric = metric;
        summary.n_pairs = pairs.size();
        for (const auto& [a, b] : pairs) summary.mean_difference += a - b;
        if (!pairs.empty()) summary.mean_difference /= static_cast<double>(pairs.size());
        if (pairs.size() < 2) {
          summary.status = "insufficient-pairs";
        } else {
          try {
            summary.test = paired_t_test(pairs, ttest_alpha);
            summary.status = "ok";
          } catch (const DegenerateTestError&) {
            summary.status = "no-difference";
          }
        }
        fake.tests.push_back(summary);
      };
      run_one("sap", sap_pairs);
      run_one("sr", sr_pairs);
      std::cout << ttest_csv(fake);
      if (!ttest_out.empty()) {
        fs::create_directories(ttest_out);
        write_file(ttest_csv(fake), fs::path(ttest_out) / "ttest.csv");
      }
    });
  }

  return 0;
}
