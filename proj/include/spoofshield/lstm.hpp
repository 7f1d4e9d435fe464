#pragma once

#include "spoofshield/detect.hpp"

#include <nlohmann/json_fwd.hpp>

#include <deque>
#include <span>
#include <vector>

namespace spoofshield {

/// Single-layer LSTM one-step-ahead residual predictor with a linear head.
///
/// Gate rows of w_input/w_recur/bias are stacked [input; forget; cell
/// candidate; output], each block `hidden` rows. Inputs are normalized with
/// the training statistics; predictions stay in normalized units.
class LstmModel {
 public:
  LstmModel() = default;
  LstmModel(int window, int hidden, int horizon, std::uint64_t init_seed);

  int window() const { return window_; }
  int hidden() const { return hidden_; }
  int horizon() const { return horizon_; }

  double norm_mean = 0.0;
  double norm_std = 1.0;
  double threshold = 0.0;  // gamma_thr on the windowed MSE score

  double normalize(double z) const { return (z - norm_mean) / norm_std; }

  /// Runs the cell over a window of normalized inputs and returns the
  /// normalized one-step-ahead prediction.
  double predict_next(std::span<const double> normalized_window) const;

  /// Squared-error loss of one (window, target) pair plus its gradient,
  /// computed by backpropagation through time. Layout of the gradient
  /// vector matches params()/set_params().
  double loss_and_gradient(std::span<const double> window, double target,
                           Eigen::VectorXd& grad) const;

  Eigen::VectorXd params() const;
  void set_params(const Eigen::VectorXd& p);
  Eigen::Index param_count() const;

  nlohmann::json to_json() const;
  static LstmModel from_json(const nlohmann::json& j);

  static constexpr int kFormatVersion = 1;

  // weights, public for the trainer
  Eigen::MatrixXd w_input;  // 4H x 1
  Eigen::MatrixXd w_recur;  // 4H x H
  Eigen::VectorXd bias;     // 4H
  Eigen::VectorXd w_out;    // H
  double b_out = 0.0;

 private:
  int window_ = 20;
  int hidden_ = 32;
  int horizon_ = 5;
};

struct LstmHyper {
  int window = 20;
  int hidden = 32;
  int horizon = 5;  // n of the MSE rule
  int epochs = 100;
  int batch = 64;
  double lr = 0.05;
  double lr_decay = 0.03;      // lr_e = lr / (1 + lr_decay * e)
  double clip = 1.0;           // global gradient-norm clip
  double val_fraction = 0.3;   // temporal tail of each trace held out
  double threshold_sigmas = 4.0;
  int hysteresis = 1;
  std::uint64_t seed = 42;
};

struct LstmTrainDiagnostics {
  std::vector<double> epoch_loss;
  bool trailing_avg_nonincreasing = true;
  double val_mse = 0.0;  // raw (denormalized) units
  double threshold = 0.0;
};

/// Trains on attack-free residual traces and calibrates the alarm
/// threshold as mean + threshold_sigmas * std of the windowed score on the
/// held-out split. Throws on insufficient data or divergent (NaN) loss.
LstmModel lstm_train(const std::vector<std::vector<double>>& traces, const LstmHyper& hyper = {},
                     LstmTrainDiagnostics* diag = nullptr);

/// Streaming scorer: xi = mean of the last `horizon` squared one-step
/// prediction errors (normalized units); alarm when xi stays above the
/// threshold for `hysteresis` consecutive decided ticks.
class LstmScorer : public Detector {
 public:
  explicit LstmScorer(LstmModel model, int hysteresis = 1);

  DetectorVerdict step(const ResidualSample& sample) override;
  void reset() override;
  std::string name() const override { return "lstm"; }

  const LstmModel& model() const { return model_; }
  void set_threshold(double thr) { model_.threshold = thr; }

  static double windowed_mse(std::span<const double> errors, int n);

 private:
  LstmModel model_;
  int hysteresis_;
  std::deque<double> inputs_;   // normalized residuals, most recent last
  std::deque<double> sq_errors_;
  int exceed_count_ = 0;
  bool alarm_state_ = false;
};

}  // namespace spoofshield
