#pragma once

#include <vector>

#include "qdsc/common/random.hpp"
#include "qdsc/quantum/ansatz.hpp"
#include "qdsc/quantum/gradient.hpp"
#include "qdsc/quantum/state_vector.hpp"

namespace qdsc::quantum {

/// Per-gate depolarizing noise, simulated by stochastic Pauli trajectories.
struct NoiseModel {
  double probability = 0.0;  // per gate, per touched qubit
  int trajectories = 1;

  void validate() const;
  [[nodiscard]] bool enabled() const noexcept { return probability > 0.0; }
};

/// With probability p applies X, Y or Z (uniformly) to `qubit`. Draws nothing
/// from `rng` when p == 0.
void apply_depolarizing_noise(StateVector& state, int qubit, double p, Rng& rng);

/// One noisy trajectory: every gate is followed by depolarizing noise on each
/// qubit it touches.
StateVector run_noisy_trajectory(const Circuit& circuit, double p, Rng& rng);

/// Trajectory-averaged expectation of every term (weights ignored, one entry
/// per term). With p == 0 this is the exact noiseless value.
std::vector<double> averaged_expectations(const Circuit& circuit, const Observable& terms,
                                          const NoiseModel& noise, Rng& rng);

}  // namespace qdsc::quantum
