#pragma once

#include "spoofshield/common.hpp"

#include <nlohmann/json_fwd.hpp>

#include <limits>
#include <span>
#include <string>
#include <vector>

namespace spoofshield {

/// Tick-level detection metrics plus per-episode delays. With no alarms
/// precision is 1 by convention; with no attack ticks recall is 1 and
/// episodes = 0 (vacuous).
struct DetectionReport {
  double precision = 1.0;
  double recall = 1.0;
  double f1 = 1.0;
  long tp = 0, fp = 0, fn = 0, tn = 0;
  int episodes = 0;
  int detected_episodes = 0;
  std::vector<double> delays;  // seconds, detected episodes only
  double median_delay = std::numeric_limits<double>::infinity();

  nlohmann::json to_json() const;
};

/// alarms[k] vs. mask[k] at tick granularity; delay per episode is the time
/// from the mask rising edge to the first alarm inside that episode.
/// Throws std::invalid_argument on length mismatch.
DetectionReport score_detection(const std::vector<bool>& alarms, const std::vector<bool>& mask,
                                double tick_dt);

struct AccuracyReport {
  double rmse_x = 0.0;
  double rmse_y = 0.0;
  double rmse_xy = 0.0;  // sqrt(rmse_x^2 + rmse_y^2) on common samples
  double max_error = 0.0;
  int samples = 0;

  nlohmann::json to_json() const;
};

/// Per-axis RMSE between aligned traces over [first, last] tick indices.
/// Throws std::invalid_argument on mismatch or an empty window.
AccuracyReport score_rmse(std::span<const Vec2> estimate, std::span<const Vec2> truth,
                          std::size_t first, std::size_t last);

/// One campaign run: per-detector detection reports plus accuracy.
struct RunScore {
  std::string attack_kind;
  std::vector<std::string> detector_names;
  std::vector<DetectionReport> detection;  // aligned with detector_names
  AccuracyReport accuracy;
  AccuracyReport accuracy_no_mitigation;  // optional ablation, samples == 0 if absent
  std::uint64_t seed = 0;
};

struct CampaignSummary {
  struct DetectorStats {
    std::string name;
    double mean_precision = 0.0, mean_recall = 0.0, mean_f1 = 0.0;
    double std_f1 = 0.0;
    double median_delay = std::numeric_limits<double>::infinity();
    double mean_false_alarm_rate = 0.0;  // fp / (fp + tn)
  };
  int runs = 0;
  std::vector<std::string> attack_kinds;
  std::vector<DetectorStats> detectors;  // aggregated over all runs
  double mean_rmse_xy = 0.0, max_rmse_xy = 0.0;
  double mean_rmse_xy_no_mitigation = 0.0;

  nlohmann::json to_json() const;
  std::string to_table() const;  // text layout for eyeballing
};

/// Order-independent aggregation; throws on an empty campaign.
CampaignSummary aggregate(std::span<const RunScore> runs);

}  // namespace spoofshield
