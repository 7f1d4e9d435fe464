#include "spoofshield/lstm.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spoofshield {

namespace {

inline Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x) { return 1.0 / (1.0 + (-x).exp()); }

struct StepCache {
  double x;
  Eigen::ArrayXd i, f, g, o, c, tanh_c, h_prev, c_prev;
};

}  // namespace

LstmModel::LstmModel(int window, int hidden, int horizon, std::uint64_t init_seed)
    : window_(window), hidden_(hidden), horizon_(horizon) {
  std::mt19937_64 rng = make_stream(init_seed, "lstm_init");
  const double r = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> u(-r, r);
  auto fill = [&](Eigen::MatrixXd& m, Eigen::Index rows, Eigen::Index cols) {
    m.resize(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  };
  fill(w_input, 4 * hidden, 1);
  fill(w_recur, 4 * hidden, hidden);
  bias = Eigen::VectorXd::Zero(4 * hidden);
  bias.segment(hidden, hidden).setOnes();  // forget gate starts open
  w_out.resize(hidden);
  for (int i = 0; i < hidden; ++i) w_out(i) = u(rng);
  b_out = 0.0;
}

double LstmModel::predict_next(std::span<const double> normalized_window) const {
  const int H = hidden_;
  Eigen::ArrayXd h = Eigen::ArrayXd::Zero(H), c = Eigen::ArrayXd::Zero(H);
  for (double x : normalized_window) {
    Eigen::ArrayXd z = (w_input * x + w_recur * h.matrix() + bias).array();
    const Eigen::ArrayXd i = sigmoid(z.segment(0, H));
    const Eigen::ArrayXd f = sigmoid(z.segment(H, H));
    const Eigen::ArrayXd g = z.segment(2 * H, H).tanh();
    const Eigen::ArrayXd o = sigmoid(z.segment(3 * H, H));
    c = f * c + i * g;
    h = o * c.tanh();
  }
  return w_out.dot(h.matrix()) + b_out;
}

double LstmModel::loss_and_gradient(std::span<const double> window, double target,
                                    Eigen::VectorXd& grad) const {
  const int H = hidden_;
  const int T = static_cast<int>(window.size());
  std::vector<StepCache> cache(T);

  Eigen::ArrayXd h = Eigen::ArrayXd::Zero(H), c = Eigen::ArrayXd::Zero(H);
  for (int t = 0; t < T; ++t) {
    StepCache& s = cache[t];
    s.x = window[t];
    s.h_prev = h;
    s.c_prev = c;
    Eigen::ArrayXd z = (w_input * s.x + w_recur * h.matrix() + bias).array();
    s.i = sigmoid(z.segment(0, H));
    s.f = sigmoid(z.segment(H, H));
    s.g = z.segment(2 * H, H).tanh();
    s.o = sigmoid(z.segment(3 * H, H));
    c = s.f * c + s.i * s.g;
    s.c = c;
    s.tanh_c = c.tanh();
    h = s.o * s.tanh_c;
  }
  const double pred = w_out.dot(h.matrix()) + b_out;
  const double err = pred - target;
  const double loss = err * err;

  Eigen::MatrixXd d_wi = Eigen::MatrixXd::Zero(4 * H, 1);
  Eigen::MatrixXd d_wr = Eigen::MatrixXd::Zero(4 * H, H);
  Eigen::VectorXd d_b = Eigen::VectorXd::Zero(4 * H);
  Eigen::VectorXd d_wout = Eigen::VectorXd::Zero(H);
  double d_bout = 0.0;

  const double dpred = 2.0 * err;
  d_wout = dpred * h.matrix();
  d_bout = dpred;
  Eigen::ArrayXd dh = (dpred * w_out).array();
  Eigen::ArrayXd dc = Eigen::ArrayXd::Zero(H);

  for (int t = T - 1; t >= 0; --t) {
    const StepCache& s = cache[t];
    dc += dh * s.o * (1.0 - s.tanh_c.square());
    const Eigen::ArrayXd dz_o = dh * s.tanh_c * s.o * (1.0 - s.o);
    const Eigen::ArrayXd dz_i = dc * s.g * s.i * (1.0 - s.i);
    const Eigen::ArrayXd dz_g = dc * s.i * (1.0 - s.g.square());
    const Eigen::ArrayXd dz_f = dc * s.c_prev * s.f * (1.0 - s.f);

    Eigen::VectorXd dz(4 * H);
    dz.segment(0, H) = dz_i.matrix();
    dz.segment(H, H) = dz_f.matrix();
    dz.segment(2 * H, H) = dz_g.matrix();
    dz.segment(3 * H, H) = dz_o.matrix();

    d_wi += dz * s.x;
    d_wr += dz * s.h_prev.matrix().transpose();
    d_b += dz;

    dh = (w_recur.transpose() * dz).array();
    dc = dc * s.f;
  }

  grad.resize(param_count());
  Eigen::Index off = 0;
  grad.segment(off, 4 * H) = d_wi.col(0);
  off += 4 * H;
  grad.segment(off, 4 * H * H) = Eigen::Map<const Eigen::VectorXd>(d_wr.data(), 4 * H * H);
  off += 4 * H * H;
  grad.segment(off, 4 * H) = d_b;
  off += 4 * H;
  grad.segment(off, H) = d_wout;
  off += H;
  grad(off) = d_bout;
  return loss;
}

Eigen::Index LstmModel::param_count() const {
  const Eigen::Index H = hidden_;
  return 4 * H + 4 * H * H + 4 * H + H + 1;
}

Eigen::VectorXd LstmModel::params() const {
  const Eigen::Index H = hidden_;
  Eigen::VectorXd p(param_count());
  Eigen::Index off = 0;
  p.segment(off, 4 * H) = w_input.col(0);
  off += 4 * H;
  p.segment(off, 4 * H * H) = Eigen::Map<const Eigen::VectorXd>(w_recur.data(), 4 * H * H);
  off += 4 * H * H;
  p.segment(off, 4 * H) = bias;
  off += 4 * H;
  p.segment(off, H) = w_out;
  off += H;
  p(off) = b_out;
  return p;
}

void LstmModel::set_params(const Eigen::VectorXd& p) {
  const Eigen::Index H = hidden_;
  Eigen::Index off = 0;
  w_input.resize(4 * H, 1);
  w_input.col(0) = p.segment(off, 4 * H);
  off += 4 * H;
  w_recur = Eigen::Map<const Eigen::MatrixXd>(p.segment(off, 4 * H * H).data(), 4 * H, H);
  off += 4 * H * H;
  bias = p.segment(off, 4 * H);
  off += 4 * H;
  w_out = p.segment(off, H);
  off += H;
  b_out = p(off);
}

namespace {

struct Sample {
  const std::vector<double>* trace;
  int begin;  // window is [begin, begin+W), target at begin+W
};

}  // namespace

LstmModel lstm_train(const std::vector<std::vector<double>>& traces, const LstmHyper& hyper,
                     LstmTrainDiagnostics* diag) {
  const int W = hyper.window;
  std::vector<Sample> train, val;
  for (const auto& trace : traces) {
    const int n = static_cast<int>(trace.size());
    if (n < W + 2) continue;
    const int split = std::max(W + 1, static_cast<int>(n * (1.0 - hyper.val_fraction)));
    for (int b = 0; b + W < n; ++b)
      (b + W < split ? train : val).push_back({&trace, b});
  }
  if (train.size() < 16 || val.size() < static_cast<size_t>(hyper.horizon + 1))
    throw std::invalid_argument("lstm_train: insufficient attack-free data");

  // Normalization from the training portion only.
  double mean = 0.0;
  size_t count = 0;
  for (const Sample& s : train) {
    mean += (*s.trace)[s.begin + W];
    ++count;
  }
  mean /= count;
  double var = 0.0;
  for (const Sample& s : train) {
    const double d = (*s.trace)[s.begin + W] - mean;
    var += d * d;
  }
  var /= count;
  const double stddev = std::max(std::sqrt(var), 1e-9);

  LstmModel model(W, hyper.hidden, hyper.horizon, hyper.seed);
  model.norm_mean = mean;
  model.norm_std = stddev;

  std::mt19937_64 rng = make_stream(hyper.seed, "lstm_batches");
  Eigen::VectorXd params = model.params();
  Eigen::VectorXd grad(model.param_count()), batch_grad(model.param_count());
  std::vector<double> window(W);
  std::vector<size_t> order(train.size());
  std::iota(order.begin(), order.end(), size_t{0});

  LstmTrainDiagnostics local_diag;
  LstmTrainDiagnostics& d = diag ? *diag : local_diag;
  d.epoch_loss.clear();

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = hyper.lr / (1.0 + hyper.lr_decay * epoch);
    double epoch_loss = 0.0;
    size_t seen = 0;
    for (size_t start = 0; start < order.size(); start += hyper.batch) {
      const size_t stop = std::min(order.size(), start + hyper.batch);
      batch_grad.setZero();
      double batch_loss = 0.0;
      for (size_t idx = start; idx < stop; ++idx) {
        const Sample& s = train[order[idx]];
        for (int k = 0; k < W; ++k) window[k] = model.normalize((*s.trace)[s.begin + k]);
        const double target = model.normalize((*s.trace)[s.begin + W]);
        batch_loss += model.loss_and_gradient(window, target, grad);
        batch_grad += grad;
      }
      const double inv = 1.0 / static_cast<double>(stop - start);
      batch_grad *= inv;
      batch_loss *= inv;
      if (!std::isfinite(batch_loss))
        throw std::runtime_error("lstm_train: divergent loss at epoch " + std::to_string(epoch));
      const double gnorm = batch_grad.norm();
      if (gnorm > hyper.clip) batch_grad *= hyper.clip / gnorm;
      params -= lr * batch_grad;
      model.set_params(params);
      epoch_loss += batch_loss * static_cast<double>(stop - start);
      seen += stop - start;
    }
    d.epoch_loss.push_back(epoch_loss / static_cast<double>(seen));
  }

  // Trailing 10-epoch moving average should not increase.
  d.trailing_avg_nonincreasing = true;
  auto trailing = [&](int e) {
    double sum = 0.0;
    int n = 0;
    for (int k = std::max(0, e - 9); k <= e; ++k, ++n) sum += d.epoch_loss[k];
    return sum / n;
  };
  for (int e = 10; e < static_cast<int>(d.epoch_loss.size()); ++e)
    if (trailing(e) > trailing(e - 1) * (1.0 + 1e-9)) d.trailing_avg_nonincreasing = false;

  // Validation MSE (raw units) and threshold calibration on the held-out
  // split: replay the streaming score and take mean + k * std.
  double val_sq = 0.0;
  std::vector<double> scores;
  std::deque<double> errs;
  const std::vector<double>* current_trace = nullptr;
  for (const Sample& s : val) {
    if (s.trace != current_trace) {
      errs.clear();
      current_trace = s.trace;
    }
    for (int k = 0; k < W; ++k) window[k] = model.normalize((*s.trace)[s.begin + k]);
    const double pred = model.predict_next(window);
    const double e = pred - model.normalize((*s.trace)[s.begin + W]);
    val_sq += e * e;
    errs.push_back(e * e);
    if (static_cast<int>(errs.size()) > hyper.horizon) errs.pop_front();
    scores.push_back(std::accumulate(errs.begin(), errs.end(), 0.0) / errs.size());
  }
  d.val_mse = val_sq / val.size() * stddev * stddev;
  double smean = std::accumulate(scores.begin(), scores.end(), 0.0) / scores.size();
  double svar = 0.0;
  for (double x : scores) svar += (x - smean) * (x - smean);
  svar /= scores.size();
  model.threshold = smean + hyper.threshold_sigmas * std::sqrt(svar);
  d.threshold = model.threshold;
  return model;
}

LstmScorer::LstmScorer(LstmModel model, int hysteresis)
    : model_(std::move(model)), hysteresis_(std::max(1, hysteresis)) {}

void LstmScorer::reset() {
  inputs_.clear();
  sq_errors_.clear();
  exceed_count_ = 0;
  alarm_state_ = false;
}

double LstmScorer::windowed_mse(std::span<const double> errors, int n) {
  const int count = std::min<int>(n, static_cast<int>(errors.size()));
  double sum = 0.0;
  for (int i = 0; i < count; ++i) sum += errors[errors.size() - 1 - i] * errors[errors.size() - 1 - i];
  return count > 0 ? sum / count : 0.0;
}

DetectorVerdict LstmScorer::step(const ResidualSample& sample) {
  DetectorVerdict v;
  v.t = sample.t;
  v.threshold = model_.threshold;
  if (!sample.valid) {
    // hold the alarm state; a gap invalidates the prediction window
    inputs_.clear();
    sq_errors_.clear();
    exceed_count_ = 0;
    v.alarm = alarm_state_;
    v.decided = false;
    return v;
  }
  const double z = model_.normalize(sample.z);
  if (static_cast<int>(inputs_.size()) == model_.window()) {
    const std::vector<double> window(inputs_.begin(), inputs_.end());
    const double pred = model_.predict_next(window);
    const double e = z - pred;
    sq_errors_.push_back(e * e);
    if (static_cast<int>(sq_errors_.size()) > model_.horizon()) sq_errors_.pop_front();
    v.score = std::accumulate(sq_errors_.begin(), sq_errors_.end(), 0.0) / sq_errors_.size();
    v.decided = true;
    if (v.score > model_.threshold)
      ++exceed_count_;
    else
      exceed_count_ = 0;
    alarm_state_ = exceed_count_ >= hysteresis_;
  }
  v.alarm = alarm_state_;
  inputs_.push_back(z);
  if (static_cast<int>(inputs_.size()) > model_.window()) inputs_.pop_front();
  return v;
}

nlohmann::json LstmModel::to_json() const {
  nlohmann::json j;
  j["format_version"] = kFormatVersion;
  j["type"] = "lstm";
  j["window"] = window_;
  j["hidden"] = hidden_;
  j["horizon"] = horizon_;
  j["norm_mean"] = norm_mean;
  j["norm_std"] = norm_std;
  j["threshold"] = threshold;
  auto dump_mat = [](const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
      rows.push_back(std::move(row));
    }
    return rows;
  };
  j["w_input"] = dump_mat(w_input);
  j["w_recur"] = dump_mat(w_recur);
  j["bias"] = std::vector<double>(bias.data(), bias.data() + bias.size());
  j["w_out"] = std::vector<double>(w_out.data(), w_out.data() + w_out.size());
  j["b_out"] = b_out;
  return j;
}

LstmModel LstmModel::from_json(const nlohmann::json& j) {
  if (j.value("format_version", 0) != kFormatVersion)
    throw std::runtime_error("lstm model: unsupported format version");
  LstmModel m(j.at("window").get<int>(), j.at("hidden").get<int>(), j.at("horizon").get<int>(), 0);
  m.norm_mean = j.at("norm_mean").get<double>();
  m.norm_std = j.at("norm_std").get<double>();
  m.threshold = j.at("threshold").get<double>();
  auto load_mat = [](const nlohmann::json& rows) {
    Eigen::MatrixXd m(rows.size(), rows.empty() ? 0 : rows[0].size());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = rows[r][c].get<double>();
    return m;
  };
  m.w_input = load_mat(j.at("w_input"));
  m.w_recur = load_mat(j.at("w_recur"));
  const auto bias_vec = j.at("bias").get<std::vector<double>>();
  m.bias = Eigen::Map<const Eigen::VectorXd>(bias_vec.data(), static_cast<Eigen::Index>(bias_vec.size()));
  const auto wout_vec = j.at("w_out").get<std::vector<double>>();
  m.w_out = Eigen::Map<const Eigen::VectorXd>(wout_vec.data(), static_cast<Eigen::Index>(wout_vec.size()));
  m.b_out = j.at("b_out").get<double>();
  return m;
}

}  // namespace spoofshield
