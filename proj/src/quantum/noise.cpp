#include "qdsc/quantum/noise.hpp"

#include <stdexcept>

namespace qdsc::quantum {

void NoiseModel::validate() const {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw std::invalid_argument("depolarizing probability must lie in [0, 1]");
  }
  if (trajectories < 1) throw std::invalid_argument("noise trajectories must be >= 1");
}

void apply_depolarizing_noise(StateVector& state, int qubit, double p, Rng& rng) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("depolarizing probability must lie in [0, 1]");
  }
  if (p == 0.0) return;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) >= p) return;
  std::uniform_int_distribution<int> which(0, 2);
  static constexpr Pauli kPaulis[] = {Pauli::X, Pauli::Y, Pauli::Z};
  state.apply_pauli(kPaulis[which(rng)], qubit);
}

StateVector run_noisy_trajectory(const Circuit& circuit, double p, Rng& rng) {
  StateVector state(circuit.n_qubits);
  for (const auto& g : circuit.gates) {
    apply_gate(state, g);
    apply_depolarizing_noise(state, g.qubit, p, rng);
    if (g.kind == GateKind::CNOT) apply_depolarizing_noise(state, g.target, p, rng);
  }
  return state;
}

std::vector<double> averaged_expectations(const Circuit& circuit, const Observable& terms,
                                          const NoiseModel& noise, Rng& rng) {
  noise.validate();
  std::vector<double> out(terms.size(), 0.0);
  if (!noise.enabled()) {
    const StateVector state = run_circuit(circuit);
    for (std::size_t i = 0; i < terms.size(); ++i) out[i] = state.expect(terms[i].pauli, terms[i].qubit);
    return out;
  }
  for (int s = 0; s < noise.trajectories; ++s) {
    const StateVector state = run_noisy_trajectory(circuit, noise.probability, rng);
    for (std::size_t i = 0; i < terms.size(); ++i) out[i] += state.expect(terms[i].pauli, terms[i].qubit);
  }
  for (double& v : out) v /= noise.trajectories;
  return out;
}

}  // namespace qdsc::quantum
