#include "spoofshield/cusum.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spoofshield {

DetectorVerdict CusumDetector::step(const ResidualSample& sample) {
  DetectorVerdict v;
  v.t = sample.t;
  v.threshold = params_.h;
  if (!sample.valid) {
    v.alarm = alarm_state_;
    v.score = std::max(s_plus_, s_minus_);
    v.decided = false;
    return v;
  }
  const double d = sample.z - params_.mu0;
  s_plus_ = std::max(0.0, s_plus_ + d - params_.kappa);
  s_minus_ = std::max(0.0, s_minus_ - d - params_.kappa);
  v.score = std::max(s_plus_, s_minus_);
  v.decided = true;
  alarm_state_ = v.score > params_.h;
  v.alarm = alarm_state_;
  return v;
}

void CusumDetector::reset() {
  s_plus_ = 0.0;
  s_minus_ = 0.0;
  alarm_state_ = false;
}

CusumParams cusum_calibrate(std::span<const std::vector<double>> traces,
                            const CusumCalibration& cal) {
  double mean = 0.0;
  size_t n = 0;
  for (const auto& t : traces)
    for (double z : t) {
      mean += z;
      ++n;
    }
  if (n < 10) throw std::invalid_argument("cusum_calibrate: insufficient data");
  mean /= n;
  double var = 0.0;
  for (const auto& t : traces)
    for (double z : t) var += (z - mean) * (z - mean);
  const double sigma = std::max(std::sqrt(var / n), 1e-9);

  CusumParams p;
  p.mu0 = mean;
  p.kappa = cal.kappa_sigmas * sigma;

  double max_stat = 0.0;
  for (const auto& t : traces) {
    double sp = 0.0, sn = 0.0;
    for (double z : t) {
      const double d = z - p.mu0;
      sp = std::max(0.0, sp + d - p.kappa);
      sn = std::max(0.0, sn - d - p.kappa);
      max_stat = std::max({max_stat, sp, sn});
    }
  }
  p.h = std::max(cal.h_floor_sigmas * sigma, cal.h_margin * max_stat);
  return p;
}

nlohmann::json CusumParams::to_json() const {
  return {{"format_version", 1}, {"type", "cusum"}, {"mu0", mu0}, {"kappa", kappa}, {"h", h}};
}

CusumParams CusumParams::from_json(const nlohmann::json& j) {
  if (j.value("format_version", 0) != 1)
    throw std::runtime_error("cusum model: unsupported format version");
  return {j.at("mu0").get<double>(), j.at("kappa").get<double>(), j.at("h").get<double>()};
}

}  // namespace spoofshield
