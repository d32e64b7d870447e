#include "seqrank/ncf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace seqrank {

namespace {

constexpr double kAdadeltaRho = 0.95;
constexpr double kAdadeltaEps = 1e-6;
constexpr char kCheckpointMagic[8] = {'S', 'Q', 'N', 'C', 'F', 'M', 'D', 'L'};
constexpr std::uint32_t kCheckpointVersion = 1;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double activate(Activation act, double z) {
  switch (act) {
    case Activation::Tanh: return std::tanh(z);
    case Activation::Relu: return z > 0.0 ? z : 0.0;
    case Activation::Linear: return z;
  }
  return z;
}

double activate_deriv(Activation act, double z) {
  switch (act) {
    case Activation::Tanh: {
      double t = std::tanh(z);
      return 1.0 - t * t;
    }
    case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
    case Activation::Linear: return 1.0;
  }
  return 1.0;
}

}  // namespace

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "linear") return Activation::Linear;
  throw std::invalid_argument("unknown activation '" + name + "' (expected tanh|relu|linear)");
}

std::string to_string(Activation activation) {
  switch (activation) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::Linear: return "linear";
  }
  return "tanh";
}

std::vector<int> hidden_widths(int k, int layers) {
  std::vector<int> widths;
  int cur = k;
  for (int t = 0; t < layers; ++t) {
    if (t > 0) cur = std::max(cur / 2, 8);
    widths.push_back(cur);
  }
  return widths;
}

struct NcfModel::Trace {
  std::vector<double> x0;
  std::vector<std::vector<double>> z;     // pre-activations
  std::vector<std::vector<double>> x;     // post-activation, post-dropout
  std::vector<std::vector<double>> mask;  // inverted-dropout scale per unit
  double out_z = 0.0;
  double pred = 0.0;
};

NcfModel NcfModel::init(const NcfConfig& config, const std::vector<StudentId>& students,
                        const std::vector<QuestionId>& questions) {
  if (config.k < 1) throw std::invalid_argument("NcfConfig: k must be >= 1");
  if (config.layers < 0) throw std::invalid_argument("NcfConfig: layers must be >= 0");
  if (!(config.dropout_rate >= 0.0 && config.dropout_rate < 1.0)) {
    throw std::invalid_argument("NcfConfig: dropout_rate must be in [0,1)");
  }
  if (config.batch_size < 1) throw std::invalid_argument("NcfConfig: batch_size must be >= 1");
  if (config.epochs < 1) throw std::invalid_argument("NcfConfig: epochs must be >= 1");
  if (students.empty() || questions.empty()) {
    throw std::invalid_argument("NcfModel::init: students and questions must be non-empty");
  }

  NcfModel model;
  model.config_ = config;
  model.rng_ = Rng(config.seed);
  model.students_ = students;
  model.questions_ = questions;
  for (std::size_t i = 0; i < students.size(); ++i) {
    if (!model.user_index_.emplace(students[i], i).second) {
      throw std::invalid_argument("NcfModel::init: duplicate student id '" +
                                  students[i].value + "'");
    }
  }
  for (std::size_t i = 0; i < questions.size(); ++i) {
    if (!model.item_index_.emplace(questions[i], i).second) {
      throw std::invalid_argument("NcfModel::init: duplicate question id '" +
                                  questions[i].value + "'");
    }
  }

  const std::size_t k = static_cast<std::size_t>(config.k);
  Matrix ue(students.size(), k);
  for (double& v : ue.a) v = model.rng_.uniform(-0.05, 0.05);
  model.user_emb = Tensor(std::move(ue));
  Matrix ie(questions.size(), k);
  for (double& v : ie.a) v = model.rng_.uniform(-0.05, 0.05);
  model.item_emb = Tensor(std::move(ie));

  std::vector<int> widths = hidden_widths(config.k, config.layers);
  int in_width = 2 * config.k;
  for (int out_width : widths) {
    Matrix w(static_cast<std::size_t>(out_width), static_cast<std::size_t>(in_width));
    double limit = std::sqrt(6.0 / (in_width + out_width));
    for (double& v : w.a) v = model.rng_.uniform(-limit, limit);
    DenseLayer layer;
    layer.weights = Tensor(std::move(w));
    layer.bias = Tensor(Matrix(1, static_cast<std::size_t>(out_width), 0.0));
    model.hidden.push_back(std::move(layer));
    in_width = out_width;
  }
  Matrix ow(1, static_cast<std::size_t>(in_width));
  double limit = std::sqrt(6.0 / (in_width + 1));
  for (double& v : ow.a) v = model.rng_.uniform(-limit, limit);
  model.out_w = Tensor(std::move(ow));
  model.out_b = Tensor(Matrix(1, 1, 0.0));
  return model;
}

std::size_t NcfModel::user_row(const StudentId& student) const {
  auto it = user_index_.find(student);
  if (it == user_index_.end()) {
    throw UnknownEntityError("unknown student '" + student.value + "'");
  }
  return it->second;
}

std::size_t NcfModel::item_row(const QuestionId& question) const {
  auto it = item_index_.find(question);
  if (it == item_index_.end()) {
    throw UnknownEntityError("unknown question '" + question.value + "'");
  }
  return it->second;
}

void NcfModel::forward_trace(std::size_t u, std::size_t q, Rng* dropout_rng,
                             Trace& trace) const {
  const std::size_t k = static_cast<std::size_t>(config_.k);
  trace.x0.resize(2 * k);
  for (std::size_t i = 0; i < k; ++i) trace.x0[i] = user_emb.value(u, i);
  for (std::size_t i = 0; i < k; ++i) trace.x0[k + i] = item_emb.value(q, i);

  const bool dropout = dropout_rng != nullptr && config_.dropout_rate > 0.0;
  const double keep = 1.0 - config_.dropout_rate;
  trace.z.assign(hidden.size(), {});
  trace.x.assign(hidden.size(), {});
  trace.mask.assign(hidden.size(), {});

  const std::vector<double>* x = &trace.x0;
  for (std::size_t t = 0; t < hidden.size(); ++t) {
    const Matrix& w = hidden[t].weights.value;
    const Matrix& b = hidden[t].bias.value;
    std::vector<double>& z = trace.z[t];
    std::vector<double>& out = trace.x[t];
    z.resize(w.rows);
    out.resize(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
      double acc = b(0, r);
      const double* wr = &w.a[r * w.cols];
      for (std::size_t c = 0; c < w.cols; ++c) acc += wr[c] * (*x)[c];
      z[r] = acc;
      out[r] = activate(config_.activation, acc);
    }
    if (dropout) {
      std::vector<double>& mask = trace.mask[t];
      mask.resize(w.rows);
      for (std::size_t r = 0; r < w.rows; ++r) {
        mask[r] = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
        out[r] *= mask[r];
      }
    }
    x = &out;
  }
  double acc = out_b.value(0, 0);
  for (std::size_t c = 0; c < out_w.value.cols; ++c) acc += out_w.value(0, c) * (*x)[c];
  trace.out_z = acc;
  trace.pred = sigmoid(acc);
}

double NcfModel::forward(const StudentId& student, const QuestionId& question,
                         bool training_mode) {
  Trace trace;
  forward_trace(user_row(student), item_row(question), training_mode ? &rng_ : nullptr, trace);
  return trace.pred;
}

double NcfModel::predict(const StudentId& student, const QuestionId& question) const {
  // Inference is pure: no dropout, no RNG.
  Trace trace;
  forward_trace(user_row(student), item_row(question), nullptr, trace);
  return trace.pred;
}

GradientSet NcfModel::batch_gradients(const std::vector<TrainingRecord>& batch,
                                      double* loss_out) {
  const std::size_t k = static_cast<std::size_t>(config_.k);
  GradientSet g;
  g.user_emb = Matrix(user_emb.value.rows, k);
  g.item_emb = Matrix(item_emb.value.rows, k);
  for (const DenseLayer& layer : hidden) {
    g.layers.emplace_back(Matrix(layer.weights.value.rows, layer.weights.value.cols),
                          Matrix(1, layer.bias.value.cols));
  }
  g.out_w = Matrix(1, out_w.value.cols);
  g.out_b = Matrix(1, 1);

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  double loss = 0.0;
  Trace trace;
  for (const TrainingRecord& record : batch) {
    std::size_t u = user_row(record.student);
    std::size_t q = item_row(record.question);
    forward_trace(u, q, &rng_, trace);
    double err = trace.pred - record.target.value;
    loss += err * err * inv_batch;

    // d(loss)/d(out_z) through the sigmoid
    double dz = 2.0 * err * inv_batch * trace.pred * (1.0 - trace.pred);
    const std::vector<double>& x_last = hidden.empty() ? trace.x0 : trace.x.back();
    for (std::size_t c = 0; c < x_last.size(); ++c) {
      g.out_w(0, c) += dz * x_last[c];
    }
    g.out_b(0, 0) += dz;

    std::vector<double> dx(x_last.size());
    for (std::size_t c = 0; c < x_last.size(); ++c) dx[c] = dz * out_w.value(0, c);

    for (std::size_t t = hidden.size(); t-- > 0;) {
      const Matrix& w = hidden[t].weights.value;
      const std::vector<double>& x_in = t == 0 ? trace.x0 : trace.x[t - 1];
      std::vector<double> dz_layer(w.rows);
      for (std::size_t r = 0; r < w.rows; ++r) {
        double d = dx[r];
        if (!trace.mask[t].empty()) d *= trace.mask[t][r];
        dz_layer[r] = d * activate_deriv(config_.activation, trace.z[t][r]);
      }
      Matrix& gw = g.layers[t].first;
      Matrix& gb = g.layers[t].second;
      for (std::size_t r = 0; r < w.rows; ++r) {
        double* gwr = &gw.a[r * gw.cols];
        const double d = dz_layer[r];
        for (std::size_t c = 0; c < w.cols; ++c) gwr[c] += d * x_in[c];
        gb(0, r) += d;
      }
      std::vector<double> dx_prev(w.cols, 0.0);
      for (std::size_t r = 0; r < w.rows; ++r) {
        const double* wr = &w.a[r * w.cols];
        const double d = dz_layer[r];
        for (std::size_t c = 0; c < w.cols; ++c) dx_prev[c] += wr[c] * d;
      }
      dx = std::move(dx_prev);
    }
    for (std::size_t i = 0; i < k; ++i) g.user_emb(u, i) += dx[i];
    for (std::size_t i = 0; i < k; ++i) g.item_emb(q, i) += dx[k + i];
    g.touched_users.insert(u);
    g.touched_items.insert(q);
  }
  if (loss_out) *loss_out = loss;
  return g;
}

namespace {

void adadelta_row(Tensor& tensor, const Matrix& grad, std::size_t row) {
  for (std::size_t c = 0; c < tensor.value.cols; ++c) {
    double gv = grad(row, c);
    double& ms_g = tensor.grad_ms.a[row * tensor.grad_ms.cols + c];
    double& ms_u = tensor.update_ms.a[row * tensor.update_ms.cols + c];
    ms_g = kAdadeltaRho * ms_g + (1.0 - kAdadeltaRho) * gv * gv;
    double step = -std::sqrt(ms_u + kAdadeltaEps) / std::sqrt(ms_g + kAdadeltaEps) * gv;
    ms_u = kAdadeltaRho * ms_u + (1.0 - kAdadeltaRho) * step * step;
    tensor.value.a[row * tensor.value.cols + c] += step;
  }
}

void adadelta_all(Tensor& tensor, const Matrix& grad) {
  for (std::size_t r = 0; r < tensor.value.rows; ++r) adadelta_row(tensor, grad, r);
}

double frobenius_norm(const Matrix& m) {
  double acc = 0.0;
  for (double v : m.a) acc += v * v;
  return std::sqrt(acc);
}

}  // namespace

void NcfModel::apply_adadelta(const GradientSet& grads) {
  for (std::size_t row : grads.touched_users) adadelta_row(user_emb, grads.user_emb, row);
  for (std::size_t row : grads.touched_items) adadelta_row(item_emb, grads.item_emb, row);
  for (std::size_t t = 0; t < hidden.size(); ++t) {
    adadelta_all(hidden[t].weights, grads.layers[t].first);
    adadelta_all(hidden[t].bias, grads.layers[t].second);
  }
  adadelta_all(out_w, grads.out_w);
  adadelta_all(out_b, grads.out_b);
}

TrainLog NcfModel::train(const std::vector<TrainingRecord>& data) {
  if (data.empty()) {
    throw std::invalid_argument("NcfModel::train: empty training data");
  }
  for (const TrainingRecord& record : data) {
    user_row(record.student);
    item_row(record.question);
  }
  const std::size_t batch_size = static_cast<std::size_t>(config_.batch_size);
  const std::size_t norm_slots = hidden.size() + 1;  // hidden layers + output
  TrainLog log;
  std::vector<std::size_t> indices(data.size());
  std::iota(indices.begin(), indices.end(), 0);
  std::vector<TrainingRecord> batch;
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    rng_.shuffle(indices);
    double epoch_loss = 0.0;
    std::vector<double> norms(norm_slots, 0.0);
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
      std::size_t end = std::min(start + batch_size, indices.size());
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(data[indices[i]]);
      double loss = 0.0;
      GradientSet grads = batch_gradients(batch, &loss);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("NcfModel::train: non-finite loss at epoch " +
                                 std::to_string(epoch + 1) + ", batch " +
                                 std::to_string(n_batches + 1));
      }
      epoch_loss += loss * static_cast<double>(batch.size());
      for (std::size_t t = 0; t < hidden.size(); ++t) {
        norms[t] += frobenius_norm(grads.layers[t].first);
      }
      norms[norm_slots - 1] += frobenius_norm(grads.out_w);
      ++n_batches;
      apply_adadelta(grads);
    }
    EpochStats stats;
    stats.mse = epoch_loss / static_cast<double>(data.size());
    for (double n : norms) {
      stats.layer_grad_norms.push_back(n / static_cast<double>(n_batches));
    }
    log.push_back(std::move(stats));
  }
  return log;
}

PartialOrder NcfModel::rank(const StudentId& target, const std::set<QuestionId>& candidates) const {
  if (candidates.empty()) {
    throw std::invalid_argument("NcfModel::rank: empty candidate set");
  }
  std::map<QuestionId, DifficultyScore> scores;
  for (const QuestionId& q : candidates) {
    scores.emplace(q, DifficultyScore(predict(target, q)));
  }
  return order_from_scores(target, scores, 0.0);
}

double NcfModel::mse(const std::vector<TrainingRecord>& data) const {
  if (data.empty()) {
    throw std::invalid_argument("NcfModel::mse: empty data");
  }
  double acc = 0.0;
  for (const TrainingRecord& record : data) {
    double err = predict(record.student, record.question) - record.target.value;
    acc += err * err;
  }
  return acc / static_cast<double>(data.size());
}

void NcfModel::for_each_parameter(const std::function<void(const std::string&, Matrix&)>& fn) {
  fn("user_emb", user_emb.value);
  fn("item_emb", item_emb.value);
  for (std::size_t t = 0; t < hidden.size(); ++t) {
    fn("hidden" + std::to_string(t) + ".w", hidden[t].weights.value);
    fn("hidden" + std::to_string(t) + ".b", hidden[t].bias.value);
  }
  fn("out.w", out_w.value);
  fn("out.b", out_b.value);
}

// ---------------------------------------------------------------------------
// Checkpoint I/O: little-endian binary, raw IEEE-754 doubles for bit-exact
// round trips.
// ---------------------------------------------------------------------------

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void write_matrix(std::ostream& os, const Matrix& m) {
  write_u64(os, m.rows);
  write_u64(os, m.cols);
  os.write(reinterpret_cast<const char*>(m.a.data()),
           static_cast<std::streamsize>(m.a.size() * sizeof(double)));
}

void write_tensor(std::ostream& os, const Tensor& t) {
  write_matrix(os, t.value);
  write_matrix(os, t.grad_ms);
  write_matrix(os, t.update_ms);
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

double read_f64(std::istream& is) {
  double v = 0.0;
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

std::string read_string(std::istream& is) {
  std::uint64_t n = read_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

Matrix read_matrix(std::istream& is) {
  Matrix m;
  m.rows = read_u64(is);
  m.cols = read_u64(is);
  m.a.resize(m.rows * m.cols);
  is.read(reinterpret_cast<char*>(m.a.data()),
          static_cast<std::streamsize>(m.a.size() * sizeof(double)));
  return m;
}

Tensor read_tensor(std::istream& is) {
  Tensor t;
  t.value = read_matrix(is);
  t.grad_ms = read_matrix(is);
  t.update_ms = read_matrix(is);
  return t;
}

}  // namespace

void NcfModel::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  }
  os.write(kCheckpointMagic, sizeof kCheckpointMagic);
  write_u32(os, kCheckpointVersion);
  write_u32(os, static_cast<std::uint32_t>(config_.k));
  write_u32(os, static_cast<std::uint32_t>(config_.layers));
  write_u32(os, static_cast<std::uint32_t>(config_.activation));
  write_f64(os, config_.dropout_rate);
  write_u32(os, static_cast<std::uint32_t>(config_.batch_size));
  write_u32(os, static_cast<std::uint32_t>(config_.epochs));
  write_u64(os, config_.seed);

  write_u64(os, students_.size());
  for (const StudentId& s : students_) write_string(os, s.value);
  write_u64(os, questions_.size());
  for (const QuestionId& q : questions_) write_string(os, q.value);

  write_tensor(os, user_emb);
  write_tensor(os, item_emb);
  write_u64(os, hidden.size());
  for (const DenseLayer& layer : hidden) {
    write_tensor(os, layer.weights);
    write_tensor(os, layer.bias);
  }
  write_tensor(os, out_w);
  write_tensor(os, out_b);

  std::ostringstream rng_state;
  rng_state << const_cast<Rng&>(rng_).engine();
  write_string(os, rng_state.str());
  if (!os) {
    throw std::runtime_error("failed writing checkpoint: " + path.string());
  }
}

NcfModel NcfModel::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw std::runtime_error("cannot open checkpoint: " + path.string());
  }
  char magic[sizeof kCheckpointMagic] = {};
  is.read(magic, sizeof magic);
  if (std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw std::runtime_error("not a model checkpoint: " + path.string());
  }
  std::uint32_t version = read_u32(is);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  NcfModel model;
  model.config_.k = static_cast<int>(read_u32(is));
  model.config_.layers = static_cast<int>(read_u32(is));
  model.config_.activation = static_cast<Activation>(read_u32(is));
  model.config_.dropout_rate = read_f64(is);
  model.config_.batch_size = static_cast<int>(read_u32(is));
  model.config_.epochs = static_cast<int>(read_u32(is));
  model.config_.seed = read_u64(is);

  std::uint64_t n_students = read_u64(is);
  for (std::uint64_t i = 0; i < n_students; ++i) {
    StudentId s{read_string(is)};
    model.user_index_.emplace(s, i);
    model.students_.push_back(std::move(s));
  }
  std::uint64_t n_questions = read_u64(is);
  for (std::uint64_t i = 0; i < n_questions; ++i) {
    QuestionId q{read_string(is)};
    model.item_index_.emplace(q, i);
    model.questions_.push_back(std::move(q));
  }

  model.user_emb = read_tensor(is);
  model.item_emb = read_tensor(is);
  std::uint64_t n_layers = read_u64(is);
  for (std::uint64_t i = 0; i < n_layers; ++i) {
    DenseLayer layer;
    layer.weights = read_tensor(is);
    layer.bias = read_tensor(is);
    model.hidden.push_back(std::move(layer));
  }
  model.out_w = read_tensor(is);
  model.out_b = read_tensor(is);

  std::istringstream rng_state(read_string(is));
  rng_state >> model.rng_.engine();
  if (!is) {
    throw std::runtime_error("truncated checkpoint: " + path.string());
  }
  return model;
}

}  // namespace seqrank
