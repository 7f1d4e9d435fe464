#include "spoofshield/attack.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spoofshield {

void AttackSpec::validate(double scenario_duration) const {
  if (kind == AttackKind::none) return;
  if (!(t_start < t_end)) throw std::invalid_argument("attack: t_start must be < t_end");
  if (t_start < 0.0 || t_end > scenario_duration)
    throw std::invalid_argument("attack: window outside scenario span");
  if (kind == AttackKind::stealth && !(delta > 1.0))
    throw std::invalid_argument("attack: stealth delta must be > 1");
  if (direction == AttackDirection::fixed && fixed_direction.norm() < 1e-12)
    throw std::invalid_argument("attack: zero fixed direction");
}

namespace {

Vec2 unit_direction(const AttackSpec& spec, double onset_heading) {
  switch (spec.direction) {
    case AttackDirection::lateral:
      return Vec2(-std::sin(onset_heading), std::cos(onset_heading));
    case AttackDirection::longitudinal:
      return Vec2(std::cos(onset_heading), std::sin(onset_heading));
    case AttackDirection::fixed:
      return spec.fixed_direction.normalized();
  }
  return Vec2(1, 0);
}

}  // namespace

AttackResult apply_attack(const std::vector<SensorFrame>& frames, const AttackSpec& spec) {
  AttackResult res;
  res.frames = frames;
  res.mask.assign(frames.size(), false);
  if (spec.kind == AttackKind::none || frames.empty()) return res;
  spec.validate(frames.back().t);

  bool have_dir = false;
  Vec2 dir(1, 0);
  int k = 0;  // ticks since onset
  for (size_t i = 0; i < res.frames.size(); ++i) {
    SensorFrame& f = res.frames[i];
    if (f.t < spec.t_start || f.t > spec.t_end) continue;
    if (!have_dir) {
      dir = unit_direction(spec, f.imu_theta);
      have_dir = true;
    }
    Vec2 offset(0, 0);
    if (spec.kind == AttackKind::constant_bias) {
      offset = spec.direction == AttackDirection::fixed ? spec.bias : spec.magnitude * dir;
    } else {
      offset = spec.gamma * std::pow(spec.delta, k) * dir;
    }
    f.gps += offset;
    res.mask[i] = offset.squaredNorm() > 0.0;
    ++k;
  }
  return res;
}

AttackResult apply_attack(const std::vector<SensorFrame>& frames,
                          const std::vector<AttackSpec>& schedule) {
  for (size_t i = 0; i < schedule.size(); ++i)
    for (size_t j = i + 1; j < schedule.size(); ++j)
      if (schedule[i].t_start <= schedule[j].t_end && schedule[j].t_start <= schedule[i].t_end)
        throw std::invalid_argument("attack schedule: overlapping windows");

  AttackResult res;
  res.frames = frames;
  res.mask.assign(frames.size(), false);
  for (const AttackSpec& spec : schedule) {
    AttackResult one = apply_attack(res.frames, spec);
    res.frames = std::move(one.frames);
    for (size_t i = 0; i < res.mask.size(); ++i)
      res.mask[i] = res.mask[i] || one.mask[i];
  }
  return res;
}

AttackSpec randomize_attack(std::uint64_t seed, double scenario_duration, AttackKind kind,
                            const AttackRanges& ranges) {
  auto check = [](const Range& r, const char* name) {
    if (r.hi < r.lo) throw std::invalid_argument(std::string("attack ranges: bad ") + name);
  };
  check(ranges.start, "start");
  check(ranges.duration, "duration");
  check(ranges.magnitude, "magnitude");
  check(ranges.gamma, "gamma");
  check(ranges.delta, "delta");
  if (ranges.start.lo + ranges.duration.lo > scenario_duration)
    throw std::invalid_argument("attack ranges: window cannot fit scenario");

  std::mt19937_64 rng = make_stream(seed, "attack_schedule");
  auto draw = [&](const Range& r) {
    return r.lo + (r.hi - r.lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  };

  AttackSpec spec;
  spec.kind = kind;
  spec.direction = ranges.direction;
  spec.t_start = draw(ranges.start);
  const double max_dur = std::min(ranges.duration.hi, scenario_duration - spec.t_start);
  const double min_dur = std::min(ranges.duration.lo, max_dur);
  spec.t_end = spec.t_start + min_dur + (max_dur - min_dur) *
                                            std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  spec.magnitude = draw(ranges.magnitude);
  spec.gamma = draw(ranges.gamma);
  spec.delta = draw(ranges.delta);
  spec.validate(scenario_duration);
  return spec;
}

AttackSpec AttackSpec::from_json(const nlohmann::json& j) {
  AttackSpec spec;
  const std::string kind = j.value("kind", "none");
  if (kind == "none")
    spec.kind = AttackKind::none;
  else if (kind == "constant_bias")
    spec.kind = AttackKind::constant_bias;
  else if (kind == "stealth")
    spec.kind = AttackKind::stealth;
  else
    throw std::invalid_argument("attack: unknown kind " + kind);
  spec.t_start = j.value("t_start", 0.0);
  spec.t_end = j.value("t_end", 0.0);
  if (j.contains("bias")) {
    spec.bias = Vec2(j.at("bias").at(0).get<double>(), j.at("bias").at(1).get<double>());
    spec.direction = AttackDirection::fixed;
    spec.fixed_direction = spec.bias.norm() > 0 ? Vec2(spec.bias.normalized()) : Vec2(1, 0);
    spec.magnitude = spec.bias.norm();
  }
  spec.magnitude = j.value("magnitude", spec.magnitude);
  spec.gamma = j.value("gamma", spec.gamma);
  spec.delta = j.value("delta", spec.delta);
  if (j.contains("direction")) {
    const auto& jd = j.at("direction");
    if (jd.is_string()) {
      const std::string d = jd.get<std::string>();
      if (d == "lateral")
        spec.direction = AttackDirection::lateral;
      else if (d == "longitudinal")
        spec.direction = AttackDirection::longitudinal;
      else
        throw std::invalid_argument("attack: unknown direction " + d);
    } else {
      spec.direction = AttackDirection::fixed;
      spec.fixed_direction = Vec2(jd.at(0).get<double>(), jd.at(1).get<double>());
    }
  }
  return spec;
}

nlohmann::json AttackSpec::to_json() const {
  nlohmann::json j;
  j["kind"] = kind == AttackKind::none ? "none"
              : kind == AttackKind::constant_bias ? "constant_bias"
                                                  : "stealth";
  j["t_start"] = t_start;
  j["t_end"] = t_end;
  if (kind == AttackKind::constant_bias) {
    if (direction == AttackDirection::fixed)
      j["bias"] = {bias.x(), bias.y()};
    else
      j["magnitude"] = magnitude;
  }
  if (kind == AttackKind::stealth) {
    j["gamma"] = gamma;
    j["delta"] = delta;
  }
  if (direction == AttackDirection::lateral)
    j["direction"] = "lateral";
  else if (direction == AttackDirection::longitudinal)
    j["direction"] = "longitudinal";
  else if (kind != AttackKind::constant_bias)
    j["direction"] = {fixed_direction.x(), fixed_direction.y()};
  return j;
}

}  // namespace spoofshield
