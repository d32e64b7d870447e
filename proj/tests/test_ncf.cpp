#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ncf_checks.hpp"
#include "seqrank/ncf.hpp"

using namespace seqrank;

namespace {

std::vector<StudentId> students(int n) {
  std::vector<StudentId> out;
  for (int i = 0; i < n; ++i) out.push_back(StudentId{"s" + std::to_string(i)});
  return out;
}

std::vector<QuestionId> questions(int n) {
  std::vector<QuestionId> out;
  for (int i = 0; i < n; ++i) out.push_back(QuestionId{"q" + std::to_string(i)});
  return out;
}

NcfConfig small_config(int k, int layers, Activation act, std::uint64_t seed,
                       double dropout = 0.0, int batch = 4, int epochs = 10) {
  NcfConfig config;
  config.k = k;
  config.layers = layers;
  config.activation = act;
  config.dropout_rate = dropout;
  config.batch_size = batch;
  config.epochs = epochs;
  config.seed = seed;
  return config;
}

std::string file_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE_BEGIN("ncf");

TEST_CASE("tower widths") {
  CHECK(hidden_widths(40, 1) == std::vector<int>{40});
  CHECK(hidden_widths(40, 3) == std::vector<int>{40, 20, 10});
  CHECK(hidden_widths(40, 5) == std::vector<int>{40, 20, 10, 8, 8});
  CHECK(hidden_widths(40, 0).empty());
}

TEST_CASE("init shapes follow the tower rule") {
  NcfModel m = NcfModel::init(small_config(40, 1, Activation::Tanh, 3), students(3), questions(4));
  REQUIRE(m.hidden.size() == 1);
  CHECK(m.hidden[0].weights.value.rows == 40);
  CHECK(m.hidden[0].weights.value.cols == 80);
  CHECK(m.out_w.value.cols == 40);

  NcfModel wide = NcfModel::init(small_config(40, 0, Activation::Tanh, 3), students(3),
                                 questions(4));
  CHECK(wide.hidden.empty());
  CHECK(wide.out_w.value.cols == 80);
}

TEST_CASE("init is deterministic and rejects duplicates") {
  NcfModel a = NcfModel::init(small_config(5, 2, Activation::Tanh, 9), students(4), questions(5));
  NcfModel b = NcfModel::init(small_config(5, 2, Activation::Tanh, 9), students(4), questions(5));
  std::vector<double> va, vb;
  a.for_each_parameter([&](const std::string&, Matrix& m) {
    va.insert(va.end(), m.a.begin(), m.a.end());
  });
  b.for_each_parameter([&](const std::string&, Matrix& m) {
    vb.insert(vb.end(), m.a.begin(), m.a.end());
  });
  CHECK(va == vb);

  auto dup = students(2);
  dup.push_back(dup.front());
  CHECK_THROWS_AS(NcfModel::init(small_config(2, 1, Activation::Tanh, 1), dup, questions(2)),
                  std::invalid_argument);
}

TEST_CASE("zero output layer predicts one half everywhere") {
  NcfModel m = NcfModel::init(small_config(4, 1, Activation::Tanh, 5), students(3), questions(3));
  for (double& v : m.out_w.value.a) v = 0.0;
  m.out_b.value(0, 0) = 0.0;
  for (const StudentId& s : students(3)) {
    for (const QuestionId& q : questions(3)) {
      CHECK(m.predict(s, q) == doctest::Approx(0.5));
    }
  }
  // constant predictions rank as one all-tied group; one candidate is a
  // singleton order
  PartialOrder tied = m.rank(StudentId{"s0"},
                             {QuestionId{"q0"}, QuestionId{"q1"}, QuestionId{"q2"}});
  CHECK(tied.groups().size() == 1);
  CHECK(tied.item_count() == 3);
  PartialOrder single = m.rank(StudentId{"s0"}, {QuestionId{"q1"}});
  CHECK(single.groups() == std::vector<std::vector<QuestionId>>{{QuestionId{"q1"}}});
}

TEST_CASE("hand-computed forward pass on a k=1 l=1 toy model") {
  NcfModel m = NcfModel::init(small_config(1, 1, Activation::Tanh, 5), students(1), questions(1));
  m.user_emb.value(0, 0) = 0.3;
  m.item_emb.value(0, 0) = -0.2;
  m.hidden[0].weights.value(0, 0) = 0.5;
  m.hidden[0].weights.value(0, 1) = -1.0;
  m.hidden[0].bias.value(0, 0) = 0.1;
  m.out_w.value(0, 0) = 2.0;
  m.out_b.value(0, 0) = -0.3;
  double z = 0.5 * 0.3 + (-1.0) * (-0.2) + 0.1;
  double expected = 1.0 / (1.0 + std::exp(-(2.0 * std::tanh(z) - 0.3)));
  CHECK(m.predict(StudentId{"s0"}, QuestionId{"q0"}) == doctest::Approx(expected).epsilon(1e-15));
}

TEST_CASE("unknown entities raise") {
  NcfModel m = NcfModel::init(small_config(2, 1, Activation::Tanh, 5), students(2), questions(2));
  CHECK_THROWS_AS(m.predict(StudentId{"nope"}, QuestionId{"q0"}), UnknownEntityError);
  CHECK_THROWS_AS(m.predict(StudentId{"s0"}, QuestionId{"nope"}), UnknownEntityError);
  CHECK_THROWS_AS(m.rank(StudentId{"s0"}, {QuestionId{"nope"}}), UnknownEntityError);
  CHECK_THROWS_AS(m.rank(StudentId{"s0"}, {}), std::invalid_argument);
  CHECK_THROWS_AS(m.train({}), std::invalid_argument);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(NcfModel::init(small_config(0, 1, Activation::Tanh, 5), students(2),
                                 questions(2)),
                  std::invalid_argument);
  NcfConfig bad = small_config(2, 1, Activation::Tanh, 5);
  bad.dropout_rate = 1.0;
  CHECK_THROWS_AS(NcfModel::init(bad, students(2), questions(2)), std::invalid_argument);
}

TEST_CASE("inference is pure and deterministic") {
  NcfModel m = NcfModel::init(small_config(4, 1, Activation::Tanh, 17, 0.5), students(3),
                              questions(3));
  std::vector<TrainingRecord> data = {
      {StudentId{"s0"}, QuestionId{"q0"}, DifficultyScore(0.8)},
      {StudentId{"s1"}, QuestionId{"q1"}, DifficultyScore(0.2)},
  };
  m.train(data);

  namespace fs = std::filesystem;
  fs::path before = fs::temp_directory_path() / "seqrank_purity_before.bin";
  fs::path after = fs::temp_directory_path() / "seqrank_purity_after.bin";
  m.save(before);
  double first = m.predict(StudentId{"s0"}, QuestionId{"q1"});
  for (int i = 0; i < 50; ++i) {
    CHECK(m.predict(StudentId{"s0"}, QuestionId{"q1"}) == first);
    CHECK(m.forward(StudentId{"s0"}, QuestionId{"q1"}, false) == first);
  }
  (void)m.rank(StudentId{"s0"}, {QuestionId{"q0"}, QuestionId{"q1"}, QuestionId{"q2"}});
  m.save(after);
  CHECK(file_bytes(before) == file_bytes(after));  // inference touched nothing, not even the RNG
  fs::remove(before);
  fs::remove(after);
}

TEST_CASE("training-mode forward consumes the random stream under dropout") {
  NcfModel m = NcfModel::init(small_config(6, 1, Activation::Tanh, 21, 0.5), students(2),
                              questions(2));
  std::vector<double> draws;
  for (int i = 0; i < 20; ++i) {
    draws.push_back(m.forward(StudentId{"s0"}, QuestionId{"q0"}, true));
  }
  bool any_different = false;
  for (double d : draws) any_different |= d != draws.front();
  CHECK(any_different);
}

TEST_CASE("training is reproducible for a fixed seed") {
  std::vector<TrainingRecord> data;
  Rng rng(33);
  for (int i = 0; i < 12; ++i) {
    data.push_back({StudentId{"s" + std::to_string(i % 3)},
                    QuestionId{"q" + std::to_string(i % 4)},
                    DifficultyScore(rng.uniform(0.1, 0.9))});
  }
  auto run = [&] {
    NcfModel m = NcfModel::init(small_config(4, 1, Activation::Tanh, 77, 0.25, 4, 5),
                                students(3), questions(4));
    TrainLog log = m.train(data);
    return std::make_pair(log, m.predict(StudentId{"s0"}, QuestionId{"q0"}));
  };
  auto [log1, p1] = run();
  auto [log2, p2] = run();
  REQUIRE(log1.size() == log2.size());
  for (std::size_t i = 0; i < log1.size(); ++i) {
    CHECK(log1[i].mse == log2[i].mse);
    CHECK(log1[i].layer_grad_norms == log2[i].layer_grad_norms);
  }
  CHECK(p1 == p2);
}

TEST_CASE("train log records per-layer gradient norms") {
  std::vector<TrainingRecord> data = {
      {StudentId{"s0"}, QuestionId{"q0"}, DifficultyScore(0.9)},
      {StudentId{"s1"}, QuestionId{"q1"}, DifficultyScore(0.1)},
  };
  NcfModel m = NcfModel::init(small_config(3, 2, Activation::Tanh, 5, 0.0, 2, 3), students(2),
                              questions(2));
  TrainLog log = m.train(data);
  REQUIRE(log.size() == 3);
  for (const EpochStats& e : log) {
    CHECK(e.layer_grad_norms.size() == 3);  // two hidden layers + output
    for (double n : e.layer_grad_norms) CHECK(n >= 0.0);
  }
}

TEST_CASE("analytic gradients match finite differences on small models") {
  for (Activation act : {Activation::Tanh, Activation::Relu, Activation::Linear}) {
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      std::vector<TrainingRecord> records;
      NcfModel m = ncf_checks::random_check_model(act, seed, &records);
      worst = std::max(worst, ncf_checks::max_gradcheck_error(m, records));
    }
    CAPTURE(to_string(act));
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("a tiny dataset is memorized and ranked back") {
  std::vector<TrainingRecord> data;
  std::vector<double> targets = {0.1, 0.3, 0.5, 0.7, 0.9};
  for (int i = 0; i < 5; ++i) {
    data.push_back({StudentId{"s0"}, QuestionId{"q" + std::to_string(i)},
                    DifficultyScore(targets[i])});
  }
  NcfModel m = NcfModel::init(small_config(4, 1, Activation::Relu, 11, 0.0, 1, 400),
                              students(1), questions(5));
  m.train(data);
  CHECK(m.mse(data) < 1e-2);
  PartialOrder order = m.rank(StudentId{"s0"},
                              {QuestionId{"q0"}, QuestionId{"q1"}, QuestionId{"q2"},
                               QuestionId{"q3"}, QuestionId{"q4"}});
  CHECK(order.linearize() == std::vector<QuestionId>{QuestionId{"q4"}, QuestionId{"q3"},
                                                     QuestionId{"q2"}, QuestionId{"q1"},
                                                     QuestionId{"q0"}});
}

TEST_CASE("training loss descends on synthetic low-rank targets") {
  int descended = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const int n_s = 20, n_q = 20, dim = 2;
    std::vector<std::vector<double>> u(n_s, std::vector<double>(dim));
    std::vector<std::vector<double>> v(n_q, std::vector<double>(dim));
    for (auto& row : u) {
      for (double& x : row) x = rng.normal();
    }
    for (auto& row : v) {
      for (double& x : row) x = rng.normal();
    }
    std::vector<TrainingRecord> data;
    for (int s = 0; s < n_s; ++s) {
      for (int q = 0; q < n_q; ++q) {
        double score = 0.0;
        for (int d = 0; d < dim; ++d) score += u[s][d] * v[q][d];
        score /= std::sqrt(static_cast<double>(dim));
        data.push_back({StudentId{"s" + std::to_string(s)},
                        QuestionId{"q" + std::to_string(q)},
                        DifficultyScore(1.0 / (1.0 + std::exp(-score)))});
      }
    }
    NcfModel m = NcfModel::init(small_config(8, 1, Activation::Tanh, seed, 0.0, 64, 50),
                                students(n_s), questions(n_q));
    TrainLog log = m.train(data);
    if (log[49].mse < log[0].mse) ++descended;
  }
  CHECK(descended >= 19);  // at least 95% of seeds
}

TEST_CASE("non-finite loss aborts with diagnostics") {
  NcfModel m = NcfModel::init(small_config(2, 1, Activation::Linear, 5, 0.0, 1, 1),
                              students(1), questions(1));
  m.user_emb.value(0, 0) = std::numeric_limits<double>::quiet_NaN();
  std::vector<TrainingRecord> data = {
      {StudentId{"s0"}, QuestionId{"q0"}, DifficultyScore(0.5)}};
  CHECK_THROWS_WITH_AS(m.train(data),
                       doctest::Contains("non-finite"), std::runtime_error);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
  namespace fs = std::filesystem;
  std::vector<TrainingRecord> data;
  Rng rng(91);
  for (int i = 0; i < 10; ++i) {
    data.push_back({StudentId{"s" + std::to_string(i % 3)},
                    QuestionId{"q" + std::to_string(i % 4)},
                    DifficultyScore(rng.uniform(0.1, 0.9))});
  }
  NcfModel m = NcfModel::init(small_config(4, 2, Activation::Relu, 13, 0.25, 4, 6), students(3),
                              questions(4));
  m.train(data);

  fs::path p1 = fs::temp_directory_path() / "seqrank_ckpt1.bin";
  fs::path p2 = fs::temp_directory_path() / "seqrank_ckpt2.bin";
  m.save(p1);
  NcfModel loaded = NcfModel::load(p1);
  loaded.save(p2);
  CHECK(file_bytes(p1) == file_bytes(p2));
  for (const StudentId& s : students(3)) {
    for (const QuestionId& q : questions(4)) {
      CHECK(m.predict(s, q) == loaded.predict(s, q));
    }
  }
  CHECK(loaded.config().k == 4);
  CHECK(loaded.config().activation == Activation::Relu);

  // continued training stays identical too (optimizer state + RNG survive)
  TrainLog more1 = m.train(data);
  TrainLog more2 = loaded.train(data);
  REQUIRE(more1.size() == more2.size());
  for (std::size_t i = 0; i < more1.size(); ++i) CHECK(more1[i].mse == more2[i].mse);

  fs::remove(p1);
  fs::remove(p2);

  fs::path bogus = fs::temp_directory_path() / "seqrank_bogus.bin";
  std::ofstream(bogus) << "not a checkpoint";
  CHECK_THROWS_AS(NcfModel::load(bogus), std::runtime_error);
  fs::remove(bogus);
}

TEST_SUITE_END();
