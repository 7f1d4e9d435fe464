#pragma once

#include "spoofshield/detect.hpp"

#include <nlohmann/json_fwd.hpp>

#include <deque>
#include <span>
#include <vector>

namespace spoofshield {

/// Average unsuccessful-search path length of a BST with n external nodes;
/// the normalizer c(psi) of the isolation-forest anomaly score.
double iforest_c(double n);

struct IForestParams {
  int trees = 100;          // T
  int subsample = 256;      // psi
  int feature_window = 10;  // consecutive residuals per feature vector
  double fa_quantile = 0.995;  // attack-free score quantile for the threshold
  double threshold_margin = 1.02;
  std::uint64_t seed = 7;
};

/// Ensemble of isolation trees over residual-window features
/// (feature_window raw values plus their first differences).
class IForestModel {
 public:
  IForestModel() = default;

  /// psi-subsampled trees of depth at most ceil(log2 psi). Throws when
  /// fewer than psi windows are provided.
  static IForestModel fit(const std::vector<Eigen::VectorXd>& windows, const IForestParams& params);

  /// Anomaly score s(x) = 2^(-E[h(x)] / c(psi)), in (0, 1).
  double score(const Eigen::VectorXd& x) const;

  /// Features from a window of consecutive residuals.
  static Eigen::VectorXd featurize(std::span<const double> window);

  double threshold = 0.5;  // s_thr
  int feature_window = 10;

  nlohmann::json to_json() const;
  static IForestModel from_json(const nlohmann::json& j);

  struct Node {
    int feature = -1;     // -1 marks an external node
    double split = 0.0;
    int left = -1;
    int right = -1;
    int size = 0;         // samples reaching the node (external only)
  };

  const std::vector<std::vector<Node>>& trees() const { return trees_; }

 private:
  std::vector<std::vector<Node>> trees_;
  double c_psi_ = 1.0;
  int subsample_ = 256;
};

/// Streaming scorer: buffers feature_window residuals and alarms when the
/// forest score of the current window exceeds the calibrated threshold.
class IForestScorer : public Detector {
 public:
  explicit IForestScorer(IForestModel model) : model_(std::move(model)) {}

  DetectorVerdict step(const ResidualSample& sample) override;
  void reset() override;
  std::string name() const override { return "iforest"; }

  const IForestModel& model() const { return model_; }

 private:
  IForestModel model_;
  std::deque<double> buffer_;
  bool alarm_state_ = false;
};

/// Fit + threshold calibration from attack-free residual traces.
IForestModel iforest_calibrate(std::span<const std::vector<double>> traces,
                               const IForestParams& params = {});

}  // namespace spoofshield
