#include "spoofshield/eval.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>

using namespace spoofshield;

TEST_CASE("perfect detector scores 1/1/1 with zero delay") {
  std::vector<bool> mask(100, false);
  for (int k = 20; k < 60; ++k) mask[k] = true;
  const DetectionReport r = score_detection(mask, mask, 0.1);
  CHECK(r.precision == doctest::Approx(1.0));
  CHECK(r.recall == doctest::Approx(1.0));
  CHECK(r.f1 == doctest::Approx(1.0));
  CHECK(r.episodes == 1);
  CHECK(r.detected_episodes == 1);
  REQUIRE(r.delays.size() == 1);
  CHECK(r.delays[0] == doctest::Approx(0.0));
}

TEST_CASE("vacuous conventions") {
  std::vector<bool> none(50, false);
  SUBCASE("no alarms, no attack") {
    const DetectionReport r = score_detection(none, none, 0.1);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 1.0);
    CHECK(r.episodes == 0);
    CHECK(std::isinf(r.median_delay));
  }
  SUBCASE("alarms but no attack: precision 0, vacuous recall 1") {
    std::vector<bool> alarms(50, false);
    alarms[10] = true;
    const DetectionReport r = score_detection(alarms, none, 0.1);
    CHECK(r.precision == doctest::Approx(0.0));
    CHECK(r.recall == 1.0);
    CHECK(r.fp == 1);
  }
  SUBCASE("attack but no alarms: precision vacuous 1, recall 0") {
    std::vector<bool> mask(50, false);
    mask[10] = mask[11] = true;
    const DetectionReport r = score_detection(none, mask, 0.1);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == doctest::Approx(0.0));
    CHECK(r.episodes == 1);
    CHECK(r.detected_episodes == 0);
    CHECK(r.f1 == doctest::Approx(0.0));
  }
}

TEST_CASE("delay is measured from the rising edge to the first in-episode alarm") {
  std::vector<bool> mask(100, false), alarms(100, false);
  for (int k = 10; k < 40; ++k) mask[k] = true;
  for (int k = 16; k < 45; ++k) alarms[k] = true;  // 6 ticks late, trails 5 ticks
  const DetectionReport r = score_detection(alarms, mask, 0.1);
  REQUIRE(r.delays.size() == 1);
  CHECK(r.delays[0] == doctest::Approx(0.6));
  CHECK(r.tp == 24);
  CHECK(r.fp == 5);
  CHECK(r.fn == 6);
  CHECK(r.median_delay == doctest::Approx(0.6));
}

TEST_CASE("multiple episodes report one delay each") {
  std::vector<bool> mask(100, false), alarms(100, false);
  for (int k = 10; k < 20; ++k) mask[k] = true;
  for (int k = 50; k < 60; ++k) mask[k] = true;
  alarms[12] = true;  // episode 1 after 0.2 s
  // episode 2 never detected
  const DetectionReport r = score_detection(alarms, mask, 0.1);
  CHECK(r.episodes == 2);
  CHECK(r.detected_episodes == 1);
  REQUIRE(r.delays.size() == 1);
  CHECK(r.delays[0] == doctest::Approx(0.2));
}

TEST_CASE("mismatched stream lengths throw") {
  CHECK_THROWS_AS(score_detection(std::vector<bool>(3), std::vector<bool>(4), 0.1),
                  std::invalid_argument);
}

TEST_CASE("constant offset rmse") {
  std::vector<Vec2> est, truth;
  for (int k = 0; k < 10; ++k) {
    truth.emplace_back(k, 2.0 * k);
    est.emplace_back(k + 0.3, 2.0 * k + 0.4);
  }
  const AccuracyReport r = score_rmse(est, truth, 0, 9);
  CHECK(r.rmse_x == doctest::Approx(0.3));
  CHECK(r.rmse_y == doctest::Approx(0.4));
  CHECK(r.rmse_xy == doctest::Approx(0.5));
  CHECK(r.max_error == doctest::Approx(0.5));
  CHECK(r.samples == 10);
}

TEST_CASE("rmse window selection and validation") {
  std::vector<Vec2> est{{1, 0}, {0, 0}, {0, 0}}, truth{{0, 0}, {0, 0}, {0, 0}};
  CHECK(score_rmse(est, truth, 1, 2).rmse_x == doctest::Approx(0.0));
  CHECK(score_rmse(est, truth, 0, 0).rmse_x == doctest::Approx(1.0));
  CHECK_THROWS_AS(score_rmse(est, truth, 2, 1), std::invalid_argument);
  CHECK_THROWS_AS(score_rmse(est, truth, 0, 3), std::invalid_argument);
  est.pop_back();
  CHECK_THROWS_AS(score_rmse(est, truth, 0, 1), std::invalid_argument);
}

namespace {

RunScore make_run(const std::string& kind, double f1, double precision, double recall,
                  double delay, double rmse) {
  RunScore r;
  r.attack_kind = kind;
  r.detector_names = {"lstm"};
  DetectionReport d;
  d.f1 = f1;
  d.precision = precision;
  d.recall = recall;
  d.delays = {delay};
  d.fp = 1;
  d.tn = 99;
  r.detection = {d};
  r.accuracy.rmse_xy = rmse;
  r.accuracy.samples = 10;
  return r;
}

}  // namespace

TEST_CASE("aggregate means and order independence") {
  std::vector<RunScore> runs{make_run("constant_bias", 0.9, 1.0, 0.8, 0.2, 0.3),
                             make_run("stealth", 0.7, 0.9, 0.6, 0.8, 0.5),
                             make_run("constant_bias", 0.8, 0.8, 1.0, 0.4, 0.1)};
  const CampaignSummary a = aggregate(runs);
  CHECK(a.runs == 3);
  CHECK(a.attack_kinds == std::vector<std::string>{"constant_bias", "stealth"});
  REQUIRE(a.detectors.size() == 1);
  CHECK(a.detectors[0].mean_f1 == doctest::Approx(0.8));
  CHECK(a.detectors[0].mean_precision == doctest::Approx(0.9));
  CHECK(a.detectors[0].median_delay == doctest::Approx(0.4));
  CHECK(a.detectors[0].mean_false_alarm_rate == doctest::Approx(0.01));
  CHECK(a.mean_rmse_xy == doctest::Approx(0.3));
  CHECK(a.max_rmse_xy == doctest::Approx(0.5));

  std::reverse(runs.begin(), runs.end());
  const CampaignSummary b = aggregate(runs);
  CHECK(b.detectors[0].mean_f1 == doctest::Approx(a.detectors[0].mean_f1));
  CHECK(b.detectors[0].std_f1 == doctest::Approx(a.detectors[0].std_f1));
  CHECK(b.detectors[0].median_delay == doctest::Approx(a.detectors[0].median_delay));
  CHECK(b.attack_kinds == a.attack_kinds);
  CHECK(b.mean_rmse_xy == doctest::Approx(a.mean_rmse_xy));
}

TEST_CASE("aggregate skips absent ablations and rejects empty campaigns") {
  std::vector<RunScore> runs{make_run("stealth", 1.0, 1.0, 1.0, 0.1, 0.2)};
  runs[0].accuracy_no_mitigation.samples = 0;
  CHECK(aggregate(runs).mean_rmse_xy_no_mitigation == doctest::Approx(0.0));
  runs[0].accuracy_no_mitigation.samples = 5;
  runs[0].accuracy_no_mitigation.rmse_xy = 1.5;
  CHECK(aggregate(runs).mean_rmse_xy_no_mitigation == doctest::Approx(1.5));
  CHECK_THROWS_AS(aggregate(std::vector<RunScore>{}), std::invalid_argument);
}

TEST_CASE("reports serialize to json") {
  const DetectionReport d = score_detection(std::vector<bool>(5, false),
                                            std::vector<bool>(5, false), 0.1);
  const nlohmann::json j = d.to_json();
  CHECK(j.at("precision") == 1.0);
  CHECK(j.at("median_delay").is_null());  // infinity maps to null
  const CampaignSummary s = aggregate(std::vector<RunScore>{make_run("stealth", 1, 1, 1, 0.1, 0.2)});
  CHECK(s.to_json().at("runs") == 1);
  CHECK(s.to_table().find("lstm") != std::string::npos);
}
