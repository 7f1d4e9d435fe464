#include "spoofshield/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace spoofshield {

namespace {

double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::infinity();
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

DetectionReport score_detection(const std::vector<bool>& alarms, const std::vector<bool>& mask,
                                double tick_dt) {
  if (alarms.size() != mask.size())
    throw std::invalid_argument("score_detection: stream length mismatch");
  DetectionReport r;
  for (size_t k = 0; k < alarms.size(); ++k) {
    if (alarms[k] && mask[k]) ++r.tp;
    else if (alarms[k] && !mask[k]) ++r.fp;
    else if (!alarms[k] && mask[k]) ++r.fn;
    else ++r.tn;
  }
  r.precision = (r.tp + r.fp) > 0 ? static_cast<double>(r.tp) / (r.tp + r.fp) : 1.0;
  r.recall = (r.tp + r.fn) > 0 ? static_cast<double>(r.tp) / (r.tp + r.fn) : 1.0;
  r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
                                        : 0.0;

  // Episodes from mask rising edges; delay = first alarm inside the episode.
  size_t k = 0;
  while (k < mask.size()) {
    if (mask[k] && (k == 0 || !mask[k - 1])) {
      ++r.episodes;
      size_t end = k;
      while (end < mask.size() && mask[end]) ++end;
      for (size_t j = k; j < end; ++j) {
        if (alarms[j]) {
          ++r.detected_episodes;
          r.delays.push_back(static_cast<double>(j - k) * tick_dt);
          break;
        }
      }
      k = end;
    } else {
      ++k;
    }
  }
  r.median_delay = median_of(r.delays);
  return r;
}

AccuracyReport score_rmse(std::span<const Vec2> estimate, std::span<const Vec2> truth,
                          std::size_t first, std::size_t last) {
  if (estimate.size() != truth.size())
    throw std::invalid_argument("score_rmse: trace length mismatch");
  if (first > last || last >= estimate.size())
    throw std::invalid_argument("score_rmse: empty or out-of-range window");
  AccuracyReport r;
  double sx = 0.0, sy = 0.0;
  for (size_t k = first; k <= last; ++k) {
    const Vec2 e = estimate[k] - truth[k];
    sx += e.x() * e.x();
    sy += e.y() * e.y();
    r.max_error = std::max(r.max_error, e.norm());
    ++r.samples;
  }
  r.rmse_x = std::sqrt(sx / r.samples);
  r.rmse_y = std::sqrt(sy / r.samples);
  r.rmse_xy = std::sqrt(r.rmse_x * r.rmse_x + r.rmse_y * r.rmse_y);
  return r;
}

CampaignSummary aggregate(std::span<const RunScore> runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate: empty campaign");
  CampaignSummary s;
  s.runs = static_cast<int>(runs.size());
  for (const RunScore& r : runs)
    if (std::find(s.attack_kinds.begin(), s.attack_kinds.end(), r.attack_kind) ==
        s.attack_kinds.end())
      s.attack_kinds.push_back(r.attack_kind);
  std::sort(s.attack_kinds.begin(), s.attack_kinds.end());

  const size_t n_det = runs[0].detector_names.size();
  for (size_t d = 0; d < n_det; ++d) {
    CampaignSummary::DetectorStats st;
    st.name = runs[0].detector_names[d];
    std::vector<double> f1s, delays;
    double fa = 0.0;
    for (const RunScore& r : runs) {
      const DetectionReport& rep = r.detection[d];
      st.mean_precision += rep.precision;
      st.mean_recall += rep.recall;
      st.mean_f1 += rep.f1;
      f1s.push_back(rep.f1);
      delays.insert(delays.end(), rep.delays.begin(), rep.delays.end());
      fa += (rep.fp + rep.tn) > 0 ? static_cast<double>(rep.fp) / (rep.fp + rep.tn) : 0.0;
    }
    st.mean_precision /= s.runs;
    st.mean_recall /= s.runs;
    st.mean_f1 /= s.runs;
    double var = 0.0;
    for (double f : f1s) var += (f - st.mean_f1) * (f - st.mean_f1);
    st.std_f1 = std::sqrt(var / f1s.size());
    st.median_delay = median_of(delays);
    st.mean_false_alarm_rate = fa / s.runs;
    s.detectors.push_back(std::move(st));
  }

  double no_mit_n = 0.0;
  for (const RunScore& r : runs) {
    s.mean_rmse_xy += r.accuracy.rmse_xy;
    s.max_rmse_xy = std::max(s.max_rmse_xy, r.accuracy.rmse_xy);
    if (r.accuracy_no_mitigation.samples > 0) {
      s.mean_rmse_xy_no_mitigation += r.accuracy_no_mitigation.rmse_xy;
      no_mit_n += 1.0;
    }
  }
  s.mean_rmse_xy /= s.runs;
  if (no_mit_n > 0) s.mean_rmse_xy_no_mitigation /= no_mit_n;
  return s;
}

nlohmann::json DetectionReport::to_json() const {
  return {{"precision", precision}, {"recall", recall},   {"f1", f1},
          {"tp", tp},               {"fp", fp},           {"fn", fn},
          {"tn", tn},               {"episodes", episodes}, {"detected_episodes", detected_episodes},
          {"delays", delays},
          {"median_delay", std::isfinite(median_delay) ? nlohmann::json(median_delay)
                                                       : nlohmann::json(nullptr)}};
}

nlohmann::json AccuracyReport::to_json() const {
  return {{"rmse_x", rmse_x}, {"rmse_y", rmse_y}, {"rmse_xy", rmse_xy},
          {"max_error", max_error}, {"samples", samples}};
}

nlohmann::json CampaignSummary::to_json() const {
  nlohmann::json j;
  j["runs"] = runs;
  j["attack_kinds"] = attack_kinds;
  auto& jd = j["detectors"] = nlohmann::json::array();
  for (const DetectorStats& d : detectors)
    jd.push_back({{"name", d.name},
                  {"mean_precision", d.mean_precision},
                  {"mean_recall", d.mean_recall},
                  {"mean_f1", d.mean_f1},
                  {"std_f1", d.std_f1},
                  {"median_delay", std::isfinite(d.median_delay) ? nlohmann::json(d.median_delay)
                                                                 : nlohmann::json(nullptr)},
                  {"mean_false_alarm_rate", d.mean_false_alarm_rate}});
  j["mean_rmse_xy"] = mean_rmse_xy;
  j["max_rmse_xy"] = max_rmse_xy;
  j["mean_rmse_xy_no_mitigation"] = mean_rmse_xy_no_mitigation;
  return j;
}

std::string CampaignSummary::to_table() const {
  std::ostringstream os;
  os << "runs: " << runs << "\n";
  os << "detector     precision  recall     F1         delay(s)   FA rate\n";
  for (const DetectorStats& d : detectors) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-12s %-10.3f %-10.3f %-10.3f %-10.3f %-10.4f\n",
                  d.name.c_str(), d.mean_precision, d.mean_recall, d.mean_f1,
                  std::isfinite(d.median_delay) ? d.median_delay : -1.0, d.mean_false_alarm_rate);
    os << line;
  }
  char acc[160];
  std::snprintf(acc, sizeof(acc), "rmse_xy mean %.3f m, max %.3f m, without mitigation %.3f m\n",
                mean_rmse_xy, max_rmse_xy, mean_rmse_xy_no_mitigation);
  os << acc;
  return os.str();
}

}  // namespace spoofshield
