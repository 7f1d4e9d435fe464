#include "spoofshield/iforest.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

#include <cmath>
#include <random>

using namespace spoofshield;

namespace {

// windows drawn from a tight residual process plus a handful of outliers
std::vector<Eigen::VectorXd> gaussian_windows(std::mt19937_64& rng, int count, int w,
                                              double sigma, double offset = 0.0) {
  std::normal_distribution<double> noise(offset, sigma);
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < count; ++i) {
    std::vector<double> window(w);
    for (double& x : window) x = noise(rng);
    out.push_back(IForestModel::featurize(window));
  }
  return out;
}

}  // namespace

TEST_CASE("average bst path normalizer") {
  CHECK(iforest_c(1.0) == doctest::Approx(0.0));
  // c(2) = 2 H(1) - 2*1/2 = 2*0.5772156649 - 1
  CHECK(iforest_c(2.0) == doctest::Approx(0.1544313298).epsilon(1e-9));
  // c(256) via the same closed form
  CHECK(iforest_c(256.0) ==
        doctest::Approx(2.0 * (std::log(255.0) + 0.5772156649015329) - 2.0 * 255.0 / 256.0)
            .epsilon(1e-12));
  CHECK(iforest_c(1000.0) > iforest_c(256.0));
}

TEST_CASE("featurize appends first differences") {
  const double w[] = {1.0, 2.0, 4.0};
  const Eigen::VectorXd x = IForestModel::featurize(w);
  REQUIRE(x.size() == 5);
  CHECK(x(0) == 1.0);
  CHECK(x(1) == 2.0);
  CHECK(x(2) == 4.0);
  CHECK(x(3) == 1.0);
  CHECK(x(4) == 2.0);
}

TEST_CASE("psi = 2 trees give the closed-form score") {
  // with two distinct samples per tree, every tree is a single split and
  // every query exits at depth 1 in a size-1 leaf: E[h] = 1, so
  // s = 2^(-1 / c(2)) regardless of the query point
  std::mt19937_64 rng(1);
  const auto windows = gaussian_windows(rng, 64, 5, 1.0);
  IForestParams params;
  params.subsample = 2;
  params.trees = 50;
  params.feature_window = 5;
  const IForestModel model = IForestModel::fit(windows, params);
  const double expect = std::pow(2.0, -1.0 / iforest_c(2.0));
  CHECK(model.score(windows[0]) == doctest::Approx(expect).epsilon(1e-12));
  CHECK(model.score(Eigen::VectorXd::Constant(9, 100.0)) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("outliers isolate faster than inliers") {
  std::mt19937_64 rng(7);
  const auto inliers = gaussian_windows(rng, 600, 10, 0.1);
  IForestParams params;
  const IForestModel model = IForestModel::fit(inliers, params);

  double inlier_score = 0.0;
  for (int i = 0; i < 50; ++i) inlier_score += model.score(inliers[i]);
  inlier_score /= 50.0;

  std::vector<double> shifted(10, 2.0);  // residual stuck at 2 m
  const double outlier_score = model.score(IForestModel::featurize(shifted));
  CHECK(outlier_score > inlier_score + 0.1);
  CHECK(outlier_score > 0.5);
  CHECK(inlier_score < 0.6);
}

TEST_CASE("fit rejects fewer windows than the subsample") {
  std::mt19937_64 rng(2);
  const auto small = gaussian_windows(rng, 10, 5, 1.0);
  IForestParams params;  // subsample 256
  CHECK_THROWS_AS(IForestModel::fit(small, params), std::invalid_argument);
}

TEST_CASE("fit is deterministic in the seed") {
  std::mt19937_64 rng(3);
  const auto windows = gaussian_windows(rng, 400, 10, 0.1);
  IForestParams params;
  const IForestModel a = IForestModel::fit(windows, params);
  const IForestModel b = IForestModel::fit(windows, params);
  params.seed = 8;
  const IForestModel c = IForestModel::fit(windows, params);
  const Eigen::VectorXd probe = windows[7];
  CHECK(a.score(probe) == b.score(probe));
  CHECK(a.score(probe) != c.score(probe));
}

TEST_CASE("json round trip preserves scores exactly") {
  std::mt19937_64 rng(4);
  const auto windows = gaussian_windows(rng, 300, 8, 0.2);
  IForestParams params;
  params.feature_window = 8;
  const IForestModel model = IForestModel::fit(windows, params);
  const IForestModel back = IForestModel::from_json(model.to_json());
  for (int i = 0; i < 20; ++i) CHECK(back.score(windows[i]) == model.score(windows[i]));
  CHECK(back.feature_window == model.feature_window);
  nlohmann::json bad = model.to_json();
  bad["format_version"] = 99;
  CHECK_THROWS_AS(IForestModel::from_json(bad), std::runtime_error);
}

TEST_CASE("calibrated threshold sits above the attack-free quantile") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<std::vector<double>> traces(2);
  for (auto& t : traces)
    for (int k = 0; k < 800; ++k) t.push_back(noise(rng));
  const IForestModel model = iforest_calibrate(traces);

  // replay: false alarm rate bounded by roughly 1 - quantile
  IForestScorer scorer(model);
  long alarms = 0, decided = 0;
  for (const auto& t : traces) {
    scorer.reset();
    for (size_t k = 0; k < t.size(); ++k) {
      const DetectorVerdict v = scorer.step({k * 0.1, t[k], true});
      if (v.decided) {
        ++decided;
        if (v.score > model.threshold) ++alarms;
      }
    }
  }
  CHECK(decided > 1000);
  CHECK(double(alarms) / double(decided) <= 0.01);

  // a stuck 2 m residual window scores above the threshold
  IForestScorer hot(model);
  bool alarm = false;
  for (int k = 0; k < 15; ++k)
    if (hot.step({k * 0.1, 2.0, true}).alarm) alarm = true;
  CHECK(alarm);
}

TEST_CASE("scorer is undecided until the window fills and clears on gaps") {
  std::mt19937_64 rng(6);
  const auto windows = gaussian_windows(rng, 300, 10, 0.1);
  IForestParams params;
  IForestModel model = IForestModel::fit(windows, params);
  model.threshold = 2.0;  // never alarm
  IForestScorer scorer(model);
  for (int k = 0; k < 9; ++k) CHECK_FALSE(scorer.step({k * 0.1, 0.0, true}).decided);
  CHECK(scorer.step({0.9, 0.0, true}).decided);
  CHECK_FALSE(scorer.step({1.0, 0.0, false}).decided);  // gap clears the buffer
  for (int k = 0; k < 9; ++k) CHECK_FALSE(scorer.step({1.1 + k * 0.1, 0.0, true}).decided);
  CHECK(scorer.step({2.0, 0.0, true}).decided);
}
