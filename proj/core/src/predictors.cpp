#include "loopbench/predictors.hpp"

#include <array>
#include <cmath>

#include "loopbench/errors.hpp"
#include "loopbench/random.hpp"

namespace loopbench {

namespace {

constexpr std::array<std::string_view, 4> kPredictorNames = {"constant_velocity", "kinematic", "oracle",
                                                             "degraded"};

double cone_sigma(const PredictorConfig& cfg, std::size_t k) {
  return cfg.degraded.sigma_base * (1.0 + static_cast<double>(k) * cfg.dt);
}

// Semi-implicit unicycle: heading and speed update first, then position.
PredictionMode rollout_mode(const AgentState& s0, double yaw_rate, double accel, double prob,
                            const PredictorConfig& cfg) {
  PredictionMode mode;
  mode.prob = prob;
  mode.steps.reserve(static_cast<std::size_t>(cfg.horizon_n));
  double x = s0.x;
  double y = s0.y;
  double heading = s0.heading;
  double v = s0.speed;
  for (int k = 1; k <= cfg.horizon_n; ++k) {
    heading += yaw_rate * cfg.dt;
    v = std::max(0.0, v + accel * cfg.dt);
    x += v * std::cos(heading) * cfg.dt;
    y += v * std::sin(heading) * cfg.dt;
    const double sigma = cone_sigma(cfg, static_cast<std::size_t>(k));
    mode.steps.push_back({x, y, sigma, sigma, 0.0});
  }
  return mode;
}

std::vector<AgentState> future_states(const Scenario& scenario, std::string_view agent_id, double t0,
                                      const PredictorConfig& cfg) {
  const AgentTrack& track = scenario.agent(agent_id);
  std::vector<AgentState> out;
  out.reserve(static_cast<std::size_t>(cfg.horizon_n));
  // Times on the dt grid are rebuilt from integer indices so that predictions
  // issued at different steps share bit-identical sample times.
  const double base = std::round(t0 / cfg.dt);
  const bool on_grid = std::abs(t0 / cfg.dt - base) < 1e-9;
  for (int k = 1; k <= cfg.horizon_n; ++k) {
    const double t = on_grid ? (base + k) * cfg.dt : t0 + static_cast<double>(k) * cfg.dt;
    out.push_back(sample_clamped(track.log, t));
  }
  return out;
}

}  // namespace

void PredictorConfig::validate() const {
  if (horizon_n < 1) throw ConfigError("predictor horizon_n must be >= 1");
  if (!(dt > 0.0)) throw ConfigError("predictor dt must be positive");
  if (!(kinematic.brake_strong > kinematic.brake_moderate && kinematic.brake_moderate > 0.0)) {
    throw ConfigError("predictor requires brake_strong > brake_moderate > 0");
  }
  if (!(degraded.mode_shuffle_prob >= 0.0 && degraded.mode_shuffle_prob <= 1.0)) {
    throw ConfigError("mode_shuffle_prob must lie in [0, 1]");
  }
  if (!(degraded.sigma_base > 0.0)) throw ConfigError("sigma_base must be positive");
  if (!(degraded.offset_amp >= 0.0)) throw ConfigError("offset_amp must be non-negative");
  if (!(degraded.offset_wavelength > 0.0)) throw ConfigError("offset_wavelength must be positive");
}

PredictionSet predict_constant_velocity(std::string_view agent_id, const TrajectorySample& history,
                                        const PredictorConfig& cfg) {
  const AgentState& s0 = history.back();
  std::vector<PredictionMode> modes{rollout_mode(s0, 0.0, 0.0, 1.0, cfg)};
  return PredictionSet(std::string(agent_id), s0.t, cfg.dt, std::move(modes));
}

PredictionSet predict_kinematic_multimodal(std::string_view agent_id, const TrajectorySample& history,
                                           const PredictorConfig& cfg) {
  const AgentState& s0 = history.back();
  const auto& k = cfg.kinematic;
  std::vector<PredictionMode> modes;
  modes.reserve(6);
  modes.push_back(rollout_mode(s0, 0.0, 0.0, kNominalModeProb, cfg));
  modes.push_back(rollout_mode(s0, k.yaw_rate_small, 0.0, kAlternativeModeProb, cfg));
  modes.push_back(rollout_mode(s0, -k.yaw_rate_small, 0.0, kAlternativeModeProb, cfg));
  modes.push_back(rollout_mode(s0, 0.0, k.accel_moderate, kAlternativeModeProb, cfg));
  modes.push_back(rollout_mode(s0, 0.0, -k.brake_moderate, kAlternativeModeProb, cfg));
  modes.push_back(rollout_mode(s0, 0.0, -k.brake_strong, kAlternativeModeProb, cfg));
  return PredictionSet(std::string(agent_id), s0.t, cfg.dt, std::move(modes));
}

PredictionSet predict_oracle(const Scenario& scenario, std::string_view agent_id, double t0,
                             const PredictorConfig& cfg) {
  const auto future = future_states(scenario, agent_id, t0, cfg);
  PredictionMode mode;
  mode.prob = 1.0;
  mode.steps.reserve(future.size());
  const double sigma = cfg.degraded.sigma_base;
  for (const auto& s : future) mode.steps.push_back({s.x, s.y, sigma, sigma, 0.0});
  return PredictionSet(std::string(agent_id), t0, cfg.dt, {std::move(mode)});
}

ModeOffset degraded_offset(const DegradedParams& p, std::string_view agent_id, std::size_t mode, double t) {
  if (p.offset_amp == 0.0) return {};
  const std::uint64_t h =
      hash_combine(hash_combine(p.seed, hash_string(agent_id)), static_cast<std::uint64_t>(mode) + 1);
  Rng rng(h);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const double direction = rng.uniform(0.0, 2.0 * kPi);
  const double magnitude = p.offset_amp * std::sin(2.0 * kPi * t / p.offset_wavelength + phase);
  return {magnitude * std::cos(direction), magnitude * std::sin(direction)};
}

PredictionSet predict_synthetic_degraded(const Scenario& scenario, std::string_view agent_id, double t0,
                                         const PredictorConfig& cfg, std::uint64_t call_index) {
  const auto future = future_states(scenario, agent_id, t0, cfg);
  const auto& p = cfg.degraded;

  std::array<double, 6> probs{kNominalModeProb,     kAlternativeModeProb, kAlternativeModeProb,
                              kAlternativeModeProb, kAlternativeModeProb, kAlternativeModeProb};
  Rng rng(hash_combine(hash_combine(hash_combine(p.seed, hash_string(agent_id)), call_index),
                       static_cast<std::uint64_t>(std::llround(t0 / cfg.dt))));
  if (rng.uniform() < p.mode_shuffle_prob) {
    for (std::size_t i = probs.size() - 1; i > 0; --i) {
      std::swap(probs[i], probs[rng.below(i + 1)]);
    }
  }

  std::vector<PredictionMode> modes(6);
  for (std::size_t m = 0; m < modes.size(); ++m) {
    modes[m].prob = probs[m];
    modes[m].steps.reserve(future.size());
    for (std::size_t k = 0; k < future.size(); ++k) {
      const AgentState& gt = future[k];
      const ModeOffset off = degraded_offset(p, agent_id, m, gt.t);
      const double c = std::cos(gt.heading);
      const double s = std::sin(gt.heading);
      const double sigma = cone_sigma(cfg, k + 1);
      modes[m].steps.push_back(
          {gt.x + off.along * c - off.lateral * s, gt.y + off.along * s + off.lateral * c, sigma, sigma, 0.0});
    }
  }
  return PredictionSet(std::string(agent_id), t0, cfg.dt, std::move(modes));
}

std::string_view to_string(PredictorKind kind) { return kPredictorNames[static_cast<std::size_t>(kind)]; }

std::span<const std::string_view> predictor_kind_names() { return kPredictorNames; }

PredictorKind predictor_kind_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kPredictorNames.size(); ++i) {
    if (kPredictorNames[i] == name) return static_cast<PredictorKind>(i);
  }
  std::string valid;
  for (auto n : kPredictorNames) valid += (valid.empty() ? "" : ", ") + std::string(n);
  throw ConfigError("unknown predictor '" + std::string(name) + "' (valid: " + valid + ")");
}

PredictionSet predict(const PredictorSpec& spec, const PredictionContext& ctx) {
  const auto& id = ctx.agent.info.id;
  switch (spec.kind) {
    case PredictorKind::kConstantVelocity:
      return predict_constant_velocity(id, ctx.history, spec.config);
    case PredictorKind::kKinematic:
      return predict_kinematic_multimodal(id, ctx.history, spec.config);
    case PredictorKind::kOracle:
      return predict_oracle(ctx.scenario, id, ctx.t0, spec.config);
    case PredictorKind::kDegraded:
      return predict_synthetic_degraded(ctx.scenario, id, ctx.t0, spec.config, ctx.step_index);
  }
  throw ConfigError("unhandled predictor kind");
}

}  // namespace loopbench
