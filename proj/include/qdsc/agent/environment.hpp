#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "qdsc/agent/reward.hpp"
#include "qdsc/grid/scenario.hpp"

namespace qdsc::agent {

/// Source of the TIS prediction appended to the state.
class Predictor {
 public:
  virtual ~Predictor() = default;
  [[nodiscard]] virtual PredictionOutput predict(const grid::GridSimulation& sim, const Vector& observation) const = 0;
};

/// Simulates `horizon` seconds ahead with the machine parameters held and
/// labels the largest separation seen. Divergence counts as unstable.
PredictionOutput lookahead_oracle(const grid::GridSimulation& sim, double horizon);

class LookaheadPredictor final : public Predictor {
 public:
  explicit LookaheadPredictor(double horizon = 0.15) : horizon_(horizon) {}
  [[nodiscard]] PredictionOutput predict(const grid::GridSimulation& sim, const Vector&) const override {
    return lookahead_oracle(sim, horizon_);
  }

 private:
  double horizon_;
};

struct EnvironmentConfig {
  RewardWeights weights;
  bool invert_pred_condition = false;
  bool terminate_on_violation = true;  // adds -K_s on the terminating step
  bool frequency_in_hz = false;        // reward sees Δf, df/dt instead of Δω, dω/dt
  int max_steps = 100;
};

struct StepResult {
  Vector next_state;
  double reward = 0.0;
  double reward_base = 0.0;
  double reward_pred = 0.0;
  bool terminal = false;   // no bootstrap
  bool truncated = false;  // step budget or horizon reached
  int clip_events = 0;
  bool violated = false;
  bool diverged = false;

  [[nodiscard]] bool done() const { return terminal || truncated; }
};

/// One row of a recorded trajectory (angles in degrees).
struct TrajectoryRow {
  double t = 0.0;
  Vector delta_deg, omega, p_e;
  double delta_max = 0.0;
  double delta_coi = 0.0;
};
using Trajectory = std::vector<TrajectoryRow>;

/// The scripted fault scenario seen by the agent. An episode starts at the
/// first control step after fault clearance and lasts `max_steps` control
/// steps; states are [scaled observation (4n); tis_hat; C].
class DscEnvironment {
 public:
  DscEnvironment(grid::Scenario scenario, EnvironmentConfig config,
                 std::shared_ptr<const Predictor> predictor = std::make_shared<LookaheadPredictor>());

  Vector reset(Trajectory* trajectory = nullptr);
  StepResult step(const Vector& action);

  /// Holds the machine parameters and runs to the horizon; returns the peak
  /// separation of the whole run.
  double finish_uncontrolled();

  [[nodiscard]] int state_dim() const { return 4 * n_ + 2; }
  [[nodiscard]] int action_dim() const { return 2 * n_; }
  [[nodiscard]] int steps() const { return steps_; }
  [[nodiscard]] double peak_delta_max() const { return peak_; }
  [[nodiscard]] const grid::GridSimulation& simulation() const { return sim_; }
  [[nodiscard]] const grid::ConstraintMonitor& monitor() const { return monitor_; }
  [[nodiscard]] const EnvironmentConfig& config() const { return config_; }
  [[nodiscard]] const grid::Scenario& scenario() const { return sim_.scenario(); }

 private:
  void advance();  // one control step with bookkeeping
  Vector current_state() const;
  [[nodiscard]] Vector omega_dev() const;

  grid::GridSimulation sim_;
  EnvironmentConfig config_;
  std::shared_ptr<const Predictor> predictor_;
  int n_;
  int steps_ = 0;
  Vector prev_omega_dev_;
  double prev_coi_dev_ = 0.0;
  Vector prev_action_;
  Vector state_;
  double peak_ = 0.0;
  bool diverged_ = false;
  grid::ConstraintMonitor monitor_;
  Trajectory* trajectory_ = nullptr;
};

struct EpisodeStats {
  int steps = 0;
  double ret = 0.0;
  int clip_events = 0;
  int violations = 0;
  double final_delta_max = 0.0;
  bool diverged = false;
};

using Policy = std::function<Vector(const Vector&)>;

/// Runs one episode with `policy`, then the held-parameter tail to the
/// horizon for final_delta_max. `on_step` sees every transition.
EpisodeStats run_episode(DscEnvironment& env, const Policy& policy,
                         const std::function<void(const Vector&, const Vector&, const StepResult&)>& on_step = {},
                         Trajectory* trajectory = nullptr);

}  // namespace qdsc::agent
