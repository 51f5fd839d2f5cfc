#pragma once

#include <Eigen/Dense>
#include <span>
#include <utility>

#include "qdsc/grid/dynamics.hpp"

namespace qdsc::agent {

using Vector = Eigen::VectorXd;

struct RewardWeights {
  double xi1 = 100.0;     // frequency deviation
  double xi2 = 0.1;       // RoCoF
  double zeta = 0.01;     // |delta_max - delta_coi|, per degree
  double gamma1 = 0.001;  // P_ref action smoothness
  double gamma2 = 0.001;  // inertia action smoothness
  double k_s = 100.0;     // safety penalty scale
  double eta = 0.1;       // prediction threshold
  double c_th = 0.95;     // confidence threshold

  void validate() const;
};

/// Ensemble or oracle prediction of the transient instability status.
struct PredictionOutput {
  double tis_hat = 0.0;  // in [0, 1], 1 = unstable
  double sigma = 0.0;
  double confidence = 1.0;  // 1 - sigma
};

/// 1 when (360 - delta_max) / (360 + delta_max) < 0, i.e. the machines have
/// pulled more than a full turn apart.
int tis_label(double delta_max_deg);

/// Mean of the clamped member outputs, population standard deviation, and
/// C = 1 - sigma. Needs at least two members.
PredictionOutput ensemble_predict(std::span<const double> member_outputs);

/// [observation; tis_hat; C].
Vector augment_state(const Vector& observation, const PredictionOutput& p);
std::pair<Vector, PredictionOutput> split_augmented(const Vector& augmented);

/// Inputs of the base reward for one control step.
struct StepSignals {
  grid::StabilityMetrics metrics;
  double omega_dev = 0.0;  // COI frequency deviation, rad/s (Hz when configured)
  double rocof = 0.0;      // its rate of change, per second
};

/// -xi1 dw^2 - xi2 (dw/dt)^2 - zeta |delta_max - delta_coi|
///   - gamma1 |dP_t - dP_{t-1}|^2 - gamma2 |dJ_t - dJ_{t-1}|^2.
/// Actions are [dP_ref(n); dJ(n)], compared before clipping.
double reward_base(const StepSignals& s, std::span<const double> action, std::span<const double> prev_action,
                   const RewardWeights& w);

/// -K_s (1 - tis_hat)^2 when tis_hat < eta and C >= C_th, 10 otherwise.
/// With `invert_condition` the first branch fires on tis_hat > 1 - eta.
double reward_pred(const PredictionOutput& p, const RewardWeights& w, bool invert_condition = false);

inline constexpr double kPredictionBonus = 10.0;

}  // namespace qdsc::agent
