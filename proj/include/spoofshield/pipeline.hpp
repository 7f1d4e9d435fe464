#pragma once

#include "spoofshield/attack.hpp"
#include "spoofshield/cusum.hpp"
#include "spoofshield/eval.hpp"
#include "spoofshield/fuse.hpp"
#include "spoofshield/iforest.hpp"
#include "spoofshield/lstm.hpp"
#include "spoofshield/sim.hpp"

#include <nlohmann/json_fwd.hpp>

#include <memory>
#include <string>
#include <vector>

namespace spoofshield {

/// Attack block of a run config: either a fully specified window or
/// randomized within ranges per run seed.
struct AttackConfig {
  AttackKind kind = AttackKind::constant_bias;
  bool randomize = true;
  AttackSpec spec;      // used when !randomize (kind copied in)
  AttackRanges ranges;  // used when randomize

  AttackSpec resolve(std::uint64_t seed, double duration) const;

  static AttackConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Attack-free scenarios the detectors are calibrated on. Every road is
/// simulated once per seed; at least two distinct geometries keep the
/// residual statistics honest across curvatures.
struct CalibrationConfig {
  std::vector<std::vector<RoadPiece>> roads{
      {{1000.0, 0.0}},
      {{100.0, 0.0}, {314.0, 0.01}, {200.0, 0.0}},
      {{80.0, 0.0}, {150.0, -0.008}, {150.0, 0.008}, {200.0, 0.0}},
  };
  std::vector<std::uint64_t> seeds{101, 202};
  double duration = 60.0;

  static CalibrationConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct DetectorConfig {
  std::string primary = "lstm";  // lstm | cusum | iforest
  LstmHyper lstm;
  CusumCalibration cusum;
  IForestParams iforest;

  static DetectorConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct CampaignConfig {
  int runs = 10;  // per attack kind
  std::vector<AttackKind> kinds{AttackKind::constant_bias, AttackKind::stealth};
  std::uint64_t base_seed = 1000;

  static CampaignConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Everything one invocation needs; serializes to a single JSON document
/// with blocks scenario / attack / fusion / detectors / calibration /
/// campaign, all optional with these defaults.
struct RunConfig {
  ScenarioConfig scenario;
  AttackConfig attack;
  SuperviseConfig fusion;
  DetectorConfig detectors;
  CalibrationConfig calibration;
  CampaignConfig campaign;

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  nlohmann::json to_json() const;

  /// Dotted-path override, e.g. "scenario.duration=60" or
  /// "attack.kind=stealth". Values parse as JSON first, bare strings second.
  static void apply_override(nlohmann::json& j, const std::string& assignment);
};

/// Calibrated detector bundle; persists as lstm.json / cusum.json /
/// iforest.json in a directory.
struct Models {
  LstmModel lstm;
  CusumParams cusum;
  IForestModel iforest;

  void save(const std::string& dir) const;
  static Models load(const std::string& dir);

  /// Fresh detector instances wired to these models, primary first per cfg.
  std::vector<std::unique_ptr<Detector>> make_detectors(const DetectorConfig& cfg,
                                                        size_t* primary_index = nullptr) const;
};

struct CalibrationReport {
  LstmTrainDiagnostics lstm;
  double residual_sigma = 0.0;
  std::vector<double> trace_false_alarm_rate;  // per detector: lstm, cusum, iforest
  int traces = 0;
  int samples = 0;

  nlohmann::json to_json() const;
};

/// Attack-free residual streams for the calibration scenarios, using the
/// configured residual source (raw GPS by default).
std::vector<std::vector<double>> calibration_residuals(const RunConfig& cfg);

/// Simulates the calibration scenarios, trains/calibrates all three
/// detectors and writes the model files plus calibration_report.json and a
/// manifest into out_dir.
Models calibrate(const RunConfig& cfg, const std::string& out_dir,
                 CalibrationReport* report_out = nullptr);

struct RunOutput {
  std::vector<SensorFrame> clean_frames;     // before the attack
  std::vector<SensorFrame> attacked_frames;
  std::vector<bool> mask;
  std::vector<TickRecord> records;
  RunScore score;
};

/// One end-to-end episode: simulate, attack, supervise, score. All
/// detectors run; the configured primary drives mitigation. seed overrides
/// cfg.scenario.seed and feeds the attack randomization.
RunOutput run_one(const RunConfig& cfg, const Models& models, std::uint64_t seed);

/// Scores only; RMSE covers the whole trace and, when ablate is set, a
/// mitigation-off replay fills accuracy_no_mitigation.
RunScore score_run(const RunConfig& cfg, const Models& models, std::uint64_t seed,
                   bool ablate = false);

/// campaign.runs episodes per attack kind, seeds base_seed + i, aggregated.
CampaignSummary run_campaign(const RunConfig& cfg, const Models& models,
                             std::vector<RunScore>* runs_out = nullptr);

/// Per-tick run log:
/// t,mode,alarm,score,est_x,est_y,truth_x,truth_y,d_cam,d_map,residual
void write_run_log(const std::string& path, const std::vector<TickRecord>& records);
std::vector<TickRecord> read_run_log(const std::string& path);

/// FNV-1a hash of a file's bytes, hex encoded. Throws when unreadable.
std::string file_hash(const std::string& path);

/// Writes manifest.json next to the given artifacts: format version, config
/// hash, seeds in play, and a content hash per file.
void write_manifest(const std::string& dir, const nlohmann::json& config,
                    const std::vector<std::string>& files,
                    const std::vector<std::uint64_t>& seeds);

/// Verifies every file hash recorded in dir/manifest.json. Returns the
/// mismatched paths (empty = intact).
std::vector<std::string> verify_manifest(const std::string& dir);

AttackKind attack_kind_from_string(const std::string& s);
std::string to_string(AttackKind k);

}  // namespace spoofshield
