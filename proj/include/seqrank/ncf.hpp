#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "seqrank/core.hpp"
#include "seqrank/rng.hpp"

namespace seqrank {

enum class Activation { Tanh, Relu, Linear };

Activation activation_from_string(const std::string& name);
std::string to_string(Activation activation);

struct NcfConfig {
  int k = 40;             // embedding size
  int layers = 1;         // hidden CF layers
  Activation activation = Activation::Tanh;
  double dropout_rate = 0.25;
  int batch_size = 1024;
  int epochs = 20;
  std::uint64_t seed = 42;
};

struct TrainingRecord {
  StudentId student;
  QuestionId question;
  DifficultyScore target;
};

struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;  // row-major

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), a(r * c, fill) {}
  double& operator()(std::size_t r, std::size_t c) { return a[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return a[r * cols + c]; }
};

/// A parameter tensor plus its Adadelta accumulators (EMAs of squared
/// gradients and squared updates).
struct Tensor {
  Matrix value;
  Matrix grad_ms;
  Matrix update_ms;

  Tensor() = default;
  explicit Tensor(Matrix v)
      : value(std::move(v)),
        grad_ms(value.rows, value.cols, 0.0),
        update_ms(value.rows, value.cols, 0.0) {}
};

struct DenseLayer {
  Tensor weights;  // out x in
  Tensor bias;     // 1 x out
};

/// Gradients for one mini-batch, mirroring the parameter layout. Embedding
/// gradients are dense matrices with only the touched rows nonzero.
struct GradientSet {
  Matrix user_emb, item_emb;
  std::vector<std::pair<Matrix, Matrix>> layers;  // (weights, bias)
  Matrix out_w, out_b;
  std::set<std::size_t> touched_users, touched_items;
};

struct EpochStats {
  double mse = 0.0;
  std::vector<double> layer_grad_norms;  // hidden layers then output layer
};

using TrainLog = std::vector<EpochStats>;

/// Hidden-layer output widths for the tower: first layer k, then halving
/// with floor 8. Input width is always 2k.
std::vector<int> hidden_widths(int k, int layers);

/// Difficulty regressor: user/item embedding rows, concatenated, through
/// `layers` dense layers and a sigmoid output neuron. Trained with Adadelta
/// (rho = 0.95, eps = 1e-6) on mean squared error.
class NcfModel {
 public:
  /// Embeddings uniform(-0.05, 0.05), hidden weights Glorot-uniform, biases
  /// zero; deterministic for a fixed seed. Duplicate ids are rejected.
  static NcfModel init(const NcfConfig& config, const std::vector<StudentId>& students,
                       const std::vector<QuestionId>& questions);

  /// Prediction in (0,1). training_mode applies inverted dropout after each
  /// hidden activation and consumes the model's random stream.
  double forward(const StudentId& student, const QuestionId& question, bool training_mode);

  /// Inference-mode prediction; never mutates the model or its RNG.
  double predict(const StudentId& student, const QuestionId& question) const;

  /// Shuffled mini-batch training over the model's configured epochs.
  /// Returns per-epoch training MSE and per-layer gradient norms. Aborts
  /// with diagnostics on non-finite loss.
  TrainLog train(const std::vector<TrainingRecord>& data);

  /// Candidates ordered by descending predicted difficulty, exact ties
  /// grouped.
  PartialOrder rank(const StudentId& target, const std::set<QuestionId>& candidates) const;

  /// Inference-mode mean squared error over the records.
  double mse(const std::vector<TrainingRecord>& data) const;

  /// Batch gradients by backpropagation (draws dropout masks from the model
  /// RNG when dropout is active). Exposed for gradient verification.
  GradientSet batch_gradients(const std::vector<TrainingRecord>& batch, double* loss_out);

  void apply_adadelta(const GradientSet& grads);

  /// Visits every parameter tensor's value matrix in a fixed order.
  void for_each_parameter(const std::function<void(const std::string&, Matrix&)>& fn);

  /// Versioned binary checkpoint; save -> load -> predict is bit-exact.
  void save(const std::filesystem::path& path) const;
  static NcfModel load(const std::filesystem::path& path);

  const NcfConfig& config() const { return config_; }
  std::size_t student_count() const { return user_index_.size(); }
  std::size_t question_count() const { return item_index_.size(); }

  // Parameter state; public for tests and tooling.
  Tensor user_emb;
  Tensor item_emb;
  std::vector<DenseLayer> hidden;
  Tensor out_w;  // 1 x last_width
  Tensor out_b;  // 1 x 1

 private:
  NcfModel() : rng_(0) {}

  std::size_t user_row(const StudentId& student) const;
  std::size_t item_row(const QuestionId& question) const;

  struct Trace;  // per-example forward activations
  // Dropout is active only when a non-null RNG is supplied (training mode).
  void forward_trace(std::size_t u, std::size_t q, Rng* dropout_rng, Trace& trace) const;

  NcfConfig config_;
  std::map<StudentId, std::size_t> user_index_;
  std::map<QuestionId, std::size_t> item_index_;
  std::vector<StudentId> students_;
  std::vector<QuestionId> questions_;
  Rng rng_;
};

}  // namespace seqrank
