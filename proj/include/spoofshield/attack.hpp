#pragma once

#include "spoofshield/common.hpp"
#include "spoofshield/sim.hpp"

#include <nlohmann/json_fwd.hpp>

#include <vector>

namespace spoofshield {

enum class AttackKind { none, constant_bias, stealth };

enum class AttackDirection { lateral, longitudinal, fixed };

/// GPS spoofing attack over a window [t_start, t_end].
///
/// constant_bias adds a fixed vector; stealth adds gamma * delta^k along a
/// unit direction, k counting ticks since onset (k = 0 at the first
/// attacked tick). With direction lateral/longitudinal the unit vector is
/// derived from the vehicle heading at onset.
struct AttackSpec {
  AttackKind kind = AttackKind::none;
  double t_start = 0.0;
  double t_end = 0.0;
  Vec2 bias{0, 0};          // constant_bias with direction == fixed
  double magnitude = 2.0;    // constant_bias with derived direction, meters
  double gamma = 0.02;       // stealth scale, meters
  double delta = 1.05;       // stealth growth, > 1
  AttackDirection direction = AttackDirection::lateral;
  Vec2 fixed_direction{1, 0};

  void validate(double scenario_duration) const;  // throws std::invalid_argument

  static AttackSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct AttackResult {
  std::vector<SensorFrame> frames;
  std::vector<bool> mask;  // true exactly on attacked ticks
};

/// Applies one spec; only the GPS channel inside the window changes.
AttackResult apply_attack(const std::vector<SensorFrame>& frames, const AttackSpec& spec);

/// Applies a schedule of non-overlapping specs; overlap is rejected.
AttackResult apply_attack(const std::vector<SensorFrame>& frames,
                          const std::vector<AttackSpec>& schedule);

struct Range {
  double lo = 0.0;
  double hi = 0.0;
};

struct AttackRanges {
  Range start{5.0, 10.0};      // onset time, s
  Range duration{10.0, 20.0};  // s
  Range magnitude{2.0, 2.0};   // constant bias, m
  Range gamma{0.02, 0.02};
  Range delta{1.05, 1.05};
  AttackDirection direction = AttackDirection::lateral;
};

/// Uniformly sampled spec within the ranges, deterministic in the seed.
/// Throws std::invalid_argument when the window cannot fit the scenario.
AttackSpec randomize_attack(std::uint64_t seed, double scenario_duration, AttackKind kind,
                            const AttackRanges& ranges = {});

}  // namespace spoofshield
