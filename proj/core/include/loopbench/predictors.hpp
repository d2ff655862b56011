#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loopbench/scene.hpp"

namespace loopbench {

struct KinematicParams {
  double yaw_rate_small{0.2};   // rad/s
  double accel_moderate{1.5};   // m/s^2
  double brake_moderate{2.5};   // m/s^2
  double brake_strong{5.0};     // m/s^2
};

struct DegradedParams {
  double offset_amp{0.0};          // m
  double offset_wavelength{4.0};   // s
  double mode_shuffle_prob{0.0};
  double sigma_base{0.3};          // m
  std::uint64_t seed{0};
};

struct PredictorConfig {
  int horizon_n{60};
  double dt{0.1};
  KinematicParams kinematic;
  DegradedParams degraded;

  void validate() const;
};

/// Probabilities used by every six-mode predictor: the nominal mode first.
inline constexpr double kNominalModeProb = 0.4;
inline constexpr double kAlternativeModeProb = 0.12;

PredictionSet predict_constant_velocity(std::string_view agent_id, const TrajectorySample& history,
                                        const PredictorConfig& cfg);

/// Six unicycle rollouts: nominal, +yaw, -yaw, accelerate, moderate brake, strong brake.
PredictionSet predict_kinematic_multimodal(std::string_view agent_id, const TrajectorySample& history,
                                           const PredictorConfig& cfg);

/// Replays the logged future (held constant past the end of the log).
PredictionSet predict_oracle(const Scenario& scenario, std::string_view agent_id, double t0,
                             const PredictorConfig& cfg);

/// Ground truth plus a smooth per-mode sinusoidal offset; the probability
/// ranking is re-drawn with probability `mode_shuffle_prob` on each call.
PredictionSet predict_synthetic_degraded(const Scenario& scenario, std::string_view agent_id, double t0,
                                         const PredictorConfig& cfg, std::uint64_t call_index);

/// Offset added to the ground truth of `mode` at absolute time `t`, expressed
/// along (tangent, normal) of the ground-truth heading. Exposed for tests.
struct ModeOffset {
  double along{0.0};
  double lateral{0.0};
};
ModeOffset degraded_offset(const DegradedParams& p, std::string_view agent_id, std::size_t mode, double t);

enum class PredictorKind { kConstantVelocity, kKinematic, kOracle, kDegraded };

std::string_view to_string(PredictorKind kind);
/// Throws ConfigError listing the valid names.
PredictorKind predictor_kind_from_string(std::string_view name);
std::span<const std::string_view> predictor_kind_names();

struct PredictorSpec {
  std::string name;
  PredictorKind kind{PredictorKind::kConstantVelocity};
  PredictorConfig config;
};

struct PredictionContext {
  const Scenario& scenario;
  const AgentTrack& agent;
  const TrajectorySample& history;
  std::uint64_t step_index{0};
  double t0{0.0};
};

PredictionSet predict(const PredictorSpec& spec, const PredictionContext& ctx);

}  // namespace loopbench
