#include "spoofshield/iforest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace spoofshield {

double iforest_c(double n) {
  if (n <= 1.0) return 0.0;
  constexpr double kEuler = 0.5772156649015329;
  const double harmonic = std::log(n - 1.0) + kEuler;
  return 2.0 * harmonic - 2.0 * (n - 1.0) / n;
}

Eigen::VectorXd IForestModel::featurize(std::span<const double> window) {
  const int w = static_cast<int>(window.size());
  Eigen::VectorXd x(2 * w - 1);
  for (int i = 0; i < w; ++i) x(i) = window[i];
  for (int i = 1; i < w; ++i) x(w + i - 1) = window[i] - window[i - 1];
  return x;
}

namespace {

using Node = IForestModel::Node;

int build_tree(std::vector<Node>& nodes, const std::vector<Eigen::VectorXd>& data,
               std::vector<int>& idx, int begin, int end, int depth, int max_depth,
               std::mt19937_64& rng) {
  const int node_id = static_cast<int>(nodes.size());
  nodes.emplace_back();
  const int count = end - begin;
  if (count <= 1 || depth >= max_depth) {
    nodes[node_id].size = count;
    return node_id;
  }
  // features with nonzero span are the split candidates
  const int dim = static_cast<int>(data[idx[begin]].size());
  Eigen::VectorXd lo = data[idx[begin]], hi = data[idx[begin]];
  for (int i = begin + 1; i < end; ++i) {
    lo = lo.cwiseMin(data[idx[i]]);
    hi = hi.cwiseMax(data[idx[i]]);
  }
  std::vector<int> candidates;
  for (int f = 0; f < dim; ++f)
    if (hi(f) > lo(f)) candidates.push_back(f);
  if (candidates.empty()) {
    nodes[node_id].size = count;
    return node_id;
  }
  const int f = candidates[std::uniform_int_distribution<int>(
      0, static_cast<int>(candidates.size()) - 1)(rng)];
  const double split =
      std::uniform_real_distribution<double>(lo(f), hi(f))(rng);
  auto mid_it = std::partition(idx.begin() + begin, idx.begin() + end,
                               [&](int i) { return data[i](f) < split; });
  const int mid = static_cast<int>(mid_it - idx.begin());
  if (mid == begin || mid == end) {  // degenerate draw at the range edge
    nodes[node_id].size = count;
    return node_id;
  }
  nodes[node_id].feature = f;
  nodes[node_id].split = split;
  const int left = build_tree(nodes, data, idx, begin, mid, depth + 1, max_depth, rng);
  const int right = build_tree(nodes, data, idx, mid, end, depth + 1, max_depth, rng);
  nodes[node_id].left = left;
  nodes[node_id].right = right;
  return node_id;
}

double path_length(const std::vector<Node>& nodes, const Eigen::VectorXd& x) {
  int id = 0;
  double depth = 0.0;
  while (nodes[id].feature >= 0) {
    id = x(nodes[id].feature) < nodes[id].split ? nodes[id].left : nodes[id].right;
    depth += 1.0;
  }
  return depth + iforest_c(static_cast<double>(nodes[id].size));
}

}  // namespace

IForestModel IForestModel::fit(const std::vector<Eigen::VectorXd>& windows,
                               const IForestParams& params) {
  if (static_cast<int>(windows.size()) < params.subsample)
    throw std::invalid_argument("iforest: fewer windows than the subsample size");
  IForestModel model;
  model.subsample_ = params.subsample;
  model.c_psi_ = iforest_c(static_cast<double>(params.subsample));
  model.feature_window = params.feature_window;
  const int max_depth = static_cast<int>(std::ceil(std::log2(std::max(2, params.subsample))));

  std::mt19937_64 rng = make_stream(params.seed, "iforest_fit");
  std::vector<int> all(windows.size());
  std::iota(all.begin(), all.end(), 0);
  for (int t = 0; t < params.trees; ++t) {
    std::vector<int> idx = all;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(params.subsample);
    std::vector<Node> nodes;
    build_tree(nodes, windows, idx, 0, params.subsample, 0, max_depth, rng);
    model.trees_.push_back(std::move(nodes));
  }
  return model;
}

double IForestModel::score(const Eigen::VectorXd& x) const {
  double sum = 0.0;
  for (const auto& tree : trees_) sum += path_length(tree, x);
  const double avg = sum / static_cast<double>(trees_.size());
  return std::pow(2.0, -avg / c_psi_);
}

DetectorVerdict IForestScorer::step(const ResidualSample& sample) {
  DetectorVerdict v;
  v.t = sample.t;
  v.threshold = model_.threshold;
  if (!sample.valid) {
    buffer_.clear();
    v.alarm = alarm_state_;
    v.decided = false;
    return v;
  }
  buffer_.push_back(sample.z);
  if (static_cast<int>(buffer_.size()) > model_.feature_window) buffer_.pop_front();
  if (static_cast<int>(buffer_.size()) == model_.feature_window) {
    const std::vector<double> w(buffer_.begin(), buffer_.end());
    v.score = model_.score(IForestModel::featurize(w));
    v.decided = true;
    alarm_state_ = v.score > model_.threshold;
  }
  v.alarm = alarm_state_;
  return v;
}

void IForestScorer::reset() {
  buffer_.clear();
  alarm_state_ = false;
}

IForestModel iforest_calibrate(std::span<const std::vector<double>> traces,
                               const IForestParams& params) {
  std::vector<Eigen::VectorXd> windows;
  for (const auto& t : traces)
    for (size_t b = 0; b + params.feature_window <= t.size(); ++b)
      windows.push_back(IForestModel::featurize(
          std::span<const double>(t.data() + b, params.feature_window)));
  IForestModel model = IForestModel::fit(windows, params);
  std::vector<double> scores;
  scores.reserve(windows.size());
  for (const auto& w : windows) scores.push_back(model.score(w));
  std::sort(scores.begin(), scores.end());
  const size_t q = std::min(scores.size() - 1,
                            static_cast<size_t>(params.fa_quantile * scores.size()));
  model.threshold = scores[q] * params.threshold_margin;
  return model;
}

nlohmann::json IForestModel::to_json() const {
  nlohmann::json j;
  j["format_version"] = 1;
  j["type"] = "iforest";
  j["threshold"] = threshold;
  j["feature_window"] = feature_window;
  j["subsample"] = subsample_;
  j["c_psi"] = c_psi_;
  auto& jt = j["trees"] = nlohmann::json::array();
  for (const auto& tree : trees_) {
    nlohmann::json jn = nlohmann::json::array();
    for (const Node& n : tree) jn.push_back({n.feature, n.split, n.left, n.right, n.size});
    jt.push_back(std::move(jn));
  }
  return j;
}

IForestModel IForestModel::from_json(const nlohmann::json& j) {
  if (j.value("format_version", 0) != 1)
    throw std::runtime_error("iforest model: unsupported format version");
  IForestModel m;
  m.threshold = j.at("threshold").get<double>();
  m.feature_window = j.at("feature_window").get<int>();
  m.subsample_ = j.at("subsample").get<int>();
  m.c_psi_ = j.at("c_psi").get<double>();
  for (const auto& jt : j.at("trees")) {
    std::vector<Node> tree;
    for (const auto& jn : jt)
      tree.push_back({jn[0].get<int>(), jn[1].get<double>(), jn[2].get<int>(), jn[3].get<int>(),
                      jn[4].get<int>()});
    m.trees_.push_back(std::move(tree));
  }
  return m;
}

}  // namespace spoofshield
