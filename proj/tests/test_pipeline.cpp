#include "spoofshield/pipeline.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

using namespace spoofshield;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// small-but-real configuration so calibration runs in seconds
RunConfig quick_config() {
  json j = json::parse(R"({
    "scenario": {"duration": 20.0},
    "calibration": {
      "roads": [[{"length": 500.0, "curvature": 0.0}],
                [{"length": 100.0, "curvature": 0.0}, {"length": 400.0, "curvature": 0.008}]],
      "seeds": [11],
      "duration": 40.0
    },
    "detectors": {
      "lstm": {"window": 10, "hidden": 6, "horizon": 3, "epochs": 8},
      "iforest": {"trees": 40, "subsample": 128}
    },
    "attack": {"kind": "constant_bias", "ranges": {"start": [5, 8], "duration": [6, 10],
               "magnitude": [2, 3]}}
  })");
  return RunConfig::from_json(j);
}

fs::path temp_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config defaults, overrides and round trip") {
  const RunConfig def = RunConfig::from_json(json::object());
  CHECK(def.scenario.duration == doctest::Approx(30.0));
  CHECK(def.detectors.primary == "lstm");
  CHECK(def.calibration.roads.size() >= 2);
  CHECK(def.fusion.residual_source == ResidualSource::raw_gps);

  json j = json::object();
  RunConfig::apply_override(j, "scenario.duration=60");
  RunConfig::apply_override(j, "detectors.primary=cusum");
  RunConfig::apply_override(j, "attack.kind=stealth");
  RunConfig::apply_override(j, "fusion.residual_source=belief_mean");
  const RunConfig cfg = RunConfig::from_json(j);
  CHECK(cfg.scenario.duration == doctest::Approx(60.0));
  CHECK(cfg.detectors.primary == "cusum");
  CHECK(cfg.attack.kind == AttackKind::stealth);
  CHECK(cfg.fusion.residual_source == ResidualSource::belief_mean);
  CHECK_THROWS_AS(RunConfig::apply_override(j, "no-equals-sign"), std::invalid_argument);

  const RunConfig back = RunConfig::from_json(cfg.to_json());
  CHECK(back.scenario.duration == cfg.scenario.duration);
  CHECK(back.detectors.primary == cfg.detectors.primary);
  CHECK(back.attack.kind == cfg.attack.kind);
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"detectors":{"primary":"magic"}})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_json(json::parse(
                      R"({"calibration":{"roads":[[{"length":100}]]}})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::from_json(json::parse(R"({"campaign":{"runs":0}})")),
                  std::invalid_argument);
  CHECK_THROWS_AS(RunConfig::load("/nonexistent/config.json"), std::runtime_error);
}

TEST_CASE("calibration residuals cover every road/seed pair and look quiet") {
  const RunConfig cfg = quick_config();
  const auto traces = calibration_residuals(cfg);
  CHECK(traces.size() == 2);  // 2 roads x 1 seed
  for (const auto& t : traces) {
    CHECK(t.size() > 350);
    double mean = 0.0;
    for (double z : t) mean += z;
    mean /= double(t.size());
    CHECK(std::abs(mean) <= 0.1);  // attack-free residuals center near zero
  }
}

TEST_CASE("calibrate writes models, report and manifest; everything verifies and reloads") {
  const fs::path dir = temp_dir("spoofshield_cal");
  const RunConfig cfg = quick_config();
  CalibrationReport rep;
  const Models models = calibrate(cfg, dir.string(), &rep);

  for (const char* f : {"lstm.json", "cusum.json", "iforest.json", "calibration_report.json",
                        "manifest.json"})
    CHECK(fs::exists(dir / f));
  CHECK(rep.traces == 2);
  CHECK(rep.samples > 700);
  CHECK(rep.residual_sigma > 0.0);
  REQUIRE(rep.trace_false_alarm_rate.size() == 3);
  for (double fa : rep.trace_false_alarm_rate) CHECK(fa <= 0.02);

  CHECK(verify_manifest(dir.string()).empty());

  const Models back = Models::load(dir.string());
  CHECK((back.lstm.params() - models.lstm.params()).norm() == 0.0);
  CHECK(back.cusum.h == models.cusum.h);
  CHECK(back.iforest.threshold == models.iforest.threshold);

  // tampering is caught
  std::ofstream(dir / "cusum.json", std::ios::app) << " ";
  const auto bad = verify_manifest(dir.string());
  REQUIRE(bad.size() == 1);
  CHECK(bad[0] == "cusum.json");
  fs::remove_all(dir);
}

TEST_CASE("calibration is deterministic") {
  const RunConfig cfg = quick_config();
  const fs::path a = temp_dir("spoofshield_cal_a"), b = temp_dir("spoofshield_cal_b");
  calibrate(cfg, a.string());
  calibrate(cfg, b.string());
  for (const char* f : {"lstm.json", "cusum.json", "iforest.json"})
    CHECK(file_hash((a / f).string()) == file_hash((b / f).string()));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("run_one end to end with a randomized attack") {
  const fs::path dir = temp_dir("spoofshield_run");
  const RunConfig cfg = quick_config();
  const Models models = calibrate(cfg, dir.string());
  const RunOutput out = run_one(cfg, models, 42);

  REQUIRE(out.records.size() == out.attacked_frames.size());
  REQUIRE(out.mask.size() == out.records.size());
  CHECK(out.score.attack_kind == "constant_bias");
  CHECK(out.score.detector_names == std::vector<std::string>{"lstm", "cusum", "iforest"});
  REQUIRE(out.score.detection.size() == 3);
  CHECK(out.score.accuracy.samples == int(out.records.size()));

  // the attack window is nonempty and the mask matches frame divergence
  int attacked = 0;
  for (size_t i = 0; i < out.mask.size(); ++i) {
    if (out.mask[i]) ++attacked;
    CHECK(out.mask[i] == (out.attacked_frames[i].gps != out.clean_frames[i].gps));
  }
  CHECK(attacked >= 60);

  // determinism: same seed, same estimates
  const RunOutput again = run_one(cfg, models, 42);
  for (size_t i = 0; i < out.records.size(); i += 17)
    CHECK(again.records[i].est == out.records[i].est);

  SUBCASE("run log round trips") {
    const fs::path log = dir / "run_log.csv";
    write_run_log(log.string(), out.records);
    const auto back = read_run_log(log.string());
    REQUIRE(back.size() == out.records.size());
    for (size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].t == out.records[i].t);
      CHECK(back[i].mode == out.records[i].mode);
      CHECK(back[i].alarm == out.records[i].alarm);
      CHECK(back[i].est == out.records[i].est);
      CHECK(back[i].z == out.records[i].z);
      CHECK(back[i].residual_valid == out.records[i].residual_valid);
    }
    std::ofstream(log) << "bogus\n";
    CHECK_THROWS_AS(read_run_log(log.string()), std::runtime_error);
  }

  SUBCASE("ablation fills the no-mitigation accuracy") {
    const RunScore score = score_run(cfg, models, 42, true);
    CHECK(score.accuracy_no_mitigation.samples > 0);
    CHECK(score.accuracy_no_mitigation.rmse_xy >= score.accuracy.rmse_xy);
  }
  fs::remove_all(dir);
}

TEST_CASE("small campaign aggregates per kind") {
  const fs::path dir = temp_dir("spoofshield_campaign");
  RunConfig cfg = quick_config();
  cfg.campaign.runs = 2;
  cfg.campaign.kinds = {AttackKind::constant_bias, AttackKind::stealth};
  const Models models = calibrate(cfg, dir.string());
  std::vector<RunScore> runs;
  const CampaignSummary summary = run_campaign(cfg, models, &runs);
  CHECK(summary.runs == 4);
  CHECK(summary.attack_kinds == std::vector<std::string>{"constant_bias", "stealth"});
  REQUIRE(summary.detectors.size() == 3);
  CHECK(summary.detectors[0].name == "lstm");
  CHECK(runs.size() == 4);
  CHECK(summary.mean_rmse_xy > 0.0);
  CHECK(summary.mean_rmse_xy_no_mitigation >= summary.mean_rmse_xy);
  fs::remove_all(dir);
}

TEST_CASE("file hash is content-determined") {
  const fs::path dir = temp_dir("spoofshield_hash");
  std::ofstream(dir / "a.txt") << "hello";
  std::ofstream(dir / "b.txt") << "hello";
  std::ofstream(dir / "c.txt") << "hellp";
  CHECK(file_hash((dir / "a.txt").string()) == file_hash((dir / "b.txt").string()));
  CHECK(file_hash((dir / "a.txt").string()) != file_hash((dir / "c.txt").string()));
  CHECK_THROWS_AS(file_hash((dir / "missing.txt").string()), std::runtime_error);
  fs::remove_all(dir);
}
