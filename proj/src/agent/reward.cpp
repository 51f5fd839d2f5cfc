#include "qdsc/agent/reward.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace qdsc::agent {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

}  // namespace

void RewardWeights::validate() const {
  for (double v : {xi1, xi2, zeta, gamma1, gamma2, k_s}) {
    require(v >= 0.0 && std::isfinite(v), "reward weights must be finite and non-negative");
  }
  require(eta > 0.0 && eta < 1.0, "reward weights: eta must lie in (0, 1)");
  require(c_th > 0.0 && c_th < 1.0, "reward weights: c_th must lie in (0, 1)");
}

int tis_label(double delta_max_deg) {
  return (360.0 - delta_max_deg) / (360.0 + delta_max_deg) < 0.0 ? 1 : 0;
}

PredictionOutput ensemble_predict(std::span<const double> member_outputs) {
  require(member_outputs.size() >= 2, "ensemble_predict: need at least two members");
  const double n = static_cast<double>(member_outputs.size());
  double mean = 0.0;
  for (double y : member_outputs) mean += std::clamp(y, 0.0, 1.0);
  mean /= n;
  double var = 0.0;
  for (double y : member_outputs) {
    const double d = std::clamp(y, 0.0, 1.0) - mean;
    var += d * d;
  }
  const double sigma = std::sqrt(var / n);
  return {mean, sigma, 1.0 - sigma};
}

Vector augment_state(const Vector& observation, const PredictionOutput& p) {
  Vector out(observation.size() + 2);
  out << observation, p.tis_hat, p.confidence;
  return out;
}

std::pair<Vector, PredictionOutput> split_augmented(const Vector& augmented) {
  require(augmented.size() >= 2, "split_augmented: vector too short");
  const Eigen::Index n = augmented.size() - 2;
  const double tis = augmented(n), c = augmented(n + 1);
  return {augmented.head(n), PredictionOutput{tis, 1.0 - c, c}};
}

double reward_base(const StepSignals& s, std::span<const double> action, std::span<const double> prev_action,
                   const RewardWeights& w) {
  require(action.size() == prev_action.size() && action.size() % 2 == 0,
          "reward_base: actions must be [dP_ref; dJ] of equal length");
  const std::size_t n = action.size() / 2;
  double dp = 0.0, dj = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dp += (action[i] - prev_action[i]) * (action[i] - prev_action[i]);
    dj += (action[n + i] - prev_action[n + i]) * (action[n + i] - prev_action[n + i]);
  }
  return -w.xi1 * s.omega_dev * s.omega_dev - w.xi2 * s.rocof * s.rocof -
         w.zeta * std::abs(s.metrics.delta_max_deg - s.metrics.delta_coi_deg) - w.gamma1 * dp - w.gamma2 * dj;
}

double reward_pred(const PredictionOutput& p, const RewardWeights& w, bool invert_condition) {
  const bool hit = invert_condition ? p.tis_hat > 1.0 - w.eta : p.tis_hat < w.eta;
  if (hit && p.confidence >= w.c_th) return -w.k_s * (1.0 - p.tis_hat) * (1.0 - p.tis_hat);
  return kPredictionBonus;
}

}  // namespace qdsc::agent
