#include "qdsc/quantum/ansatz.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace qdsc::quantum {

std::vector<QubitPair> linear_chain(int n_qubits) {
  std::vector<QubitPair> pairs;
  for (int q = 0; q + 1 < n_qubits; ++q) pairs.emplace_back(q, q + 1);
  return pairs;
}

std::vector<QubitPair> reversed_chain(int n_qubits) {
  std::vector<QubitPair> pairs;
  for (int q = n_qubits - 2; q >= 0; --q) pairs.emplace_back(q, q + 1);
  return pairs;
}

AnsatzLayout AnsatzLayout::chain(int n_qubits, int n_layers, int input_dim) {
  AnsatzLayout layout;
  layout.n_qubits = n_qubits;
  layout.n_layers = n_layers;
  layout.input_dim = input_dim;
  layout.entangler = linear_chain(n_qubits);
  return layout;
}

void AnsatzLayout::validate() const {
  if (n_qubits < 1 || n_qubits > kAbsoluteMaxQubits) {
    throw std::invalid_argument("ansatz: n_qubits out of range");
  }
  if (n_layers < 1) throw std::invalid_argument("ansatz: n_layers must be >= 1");
  if (input_dim < 0 || input_dim > n_qubits) {
    throw std::invalid_argument("ansatz: input_dim " + std::to_string(input_dim) +
                                " must be in [0, n_qubits=" + std::to_string(n_qubits) + "]");
  }
  for (const auto& [c, t] : entangler) {
    if (c == t || c < 0 || t < 0 || c >= n_qubits || t >= n_qubits) {
      throw std::invalid_argument("ansatz: invalid entangler pair (" + std::to_string(c) + ", " +
                                  std::to_string(t) + ")");
    }
  }
  std::vector<bool> seen(static_cast<std::size_t>(n_qubits), false);
  for (const auto& group : qubit_groups) {
    if (group.empty()) throw std::invalid_argument("ansatz: empty qubit group");
    for (int q : group) {
      if (q < 0 || q >= n_qubits) throw std::invalid_argument("ansatz: qubit group index out of range");
      if (seen[static_cast<std::size_t>(q)]) throw std::invalid_argument("ansatz: qubit groups overlap");
      seen[static_cast<std::size_t>(q)] = true;
    }
  }
}

std::vector<std::vector<int>> contiguous_groups(int n_qubits, int n_groups) {
  if (n_groups < 1 || n_groups > n_qubits) {
    throw std::invalid_argument("contiguous_groups: need 1 <= groups <= qubits");
  }
  std::vector<std::vector<int>> groups(static_cast<std::size_t>(n_groups));
  const int base = n_qubits / n_groups;
  const int extra = n_qubits % n_groups;
  int q = 0;
  for (int g = 0; g < n_groups; ++g) {
    const int size = base + (g < extra ? 1 : 0);
    for (int k = 0; k < size; ++k) groups[static_cast<std::size_t>(g)].push_back(q++);
  }
  return groups;
}

ParameterSet::ParameterSet(const AnsatzLayout& layout)
    : n_layers_(layout.n_layers), n_qubits_(layout.n_qubits), input_dim_(layout.input_dim) {
  layout.validate();
  data_.assign(layout.parameter_count(), 0.0);
}

ParameterSet ParameterSet::random(const AnsatzLayout& layout, Rng& rng) {
  ParameterSet p(layout);
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::uniform_real_distribution<double> scale(0.5, 1.5);
  const std::size_t nt = p.theta_size();
  for (std::size_t i = 0; i < p.data_.size(); ++i) p.data_[i] = i < nt ? angle(rng) : scale(rng);
  return p;
}

void ParameterSet::check(const AnsatzLayout& layout) const {
  if (n_layers_ != layout.n_layers || n_qubits_ != layout.n_qubits || input_dim_ != layout.input_dim ||
      data_.size() != layout.parameter_count()) {
    throw std::invalid_argument("parameter set shape does not match ansatz layout");
  }
  for (double v : data_) {
    if (!std::isfinite(v)) throw std::invalid_argument("parameter set contains non-finite entries");
  }
}

Circuit build_circuit(const AnsatzLayout& layout, const ParameterSet& params,
                      std::span<const double> inputs) {
  params.check(layout);
  if (inputs.size() != static_cast<std::size_t>(layout.input_dim)) {
    throw std::invalid_argument("run_ansatz: expected " + std::to_string(layout.input_dim) +
                                " inputs, got " + std::to_string(inputs.size()));
  }
  for (double x : inputs) {
    if (!std::isfinite(x)) throw std::invalid_argument("run_ansatz: non-finite input");
  }
  Circuit circuit;
  circuit.n_qubits = layout.n_qubits;
  circuit.gates.reserve(static_cast<std::size_t>(layout.n_layers) *
                        (2 * static_cast<std::size_t>(layout.input_dim) +
                         2 * static_cast<std::size_t>(layout.n_qubits) + layout.entangler.size()));
  for (int l = 0; l < layout.n_layers; ++l) {
    for (int j = 0; j < layout.input_dim; ++j) {
      const double x = inputs[static_cast<std::size_t>(j)];
      const double a = params.alpha(l, j);
      const double b = params.beta(l, j);
      circuit.gates.push_back({GateKind::RY, j, -1, a * x,
                               static_cast<std::ptrdiff_t>(params.alpha_index(l, j)), x, j, a});
      circuit.gates.push_back({GateKind::RZ, j, -1, b * x,
                               static_cast<std::ptrdiff_t>(params.beta_index(l, j)), x, j, b});
    }
    for (int q = 0; q < layout.n_qubits; ++q) {
      circuit.gates.push_back({GateKind::RZ, q, -1, params.theta(l, q, 0),
                               static_cast<std::ptrdiff_t>(params.theta_index(l, q, 0)), 1.0, -1, 0.0});
      circuit.gates.push_back({GateKind::RY, q, -1, params.theta(l, q, 1),
                               static_cast<std::ptrdiff_t>(params.theta_index(l, q, 1)), 1.0, -1, 0.0});
    }
    for (const auto& [c, t] : layout.entangler) {
      circuit.gates.push_back({GateKind::CNOT, c, t, 0.0, -1, 0.0, -1, 0.0});
    }
  }
  return circuit;
}

void apply_gate(StateVector& state, const Gate& gate) {
  switch (gate.kind) {
    case GateKind::RY:
      state.apply_ry(gate.qubit, gate.angle);
      break;
    case GateKind::RZ:
      state.apply_rz(gate.qubit, gate.angle);
      break;
    case GateKind::CNOT:
      state.apply_cnot(gate.qubit, gate.target);
      break;
  }
}

StateVector run_circuit(const Circuit& circuit) {
  StateVector state(circuit.n_qubits);
  for (const auto& g : circuit.gates) apply_gate(state, g);
  return state;
}

StateVector run_ansatz(const AnsatzLayout& layout, const ParameterSet& params,
                       std::span<const double> inputs) {
  return run_circuit(build_circuit(layout, params, inputs));
}

}  // namespace qdsc::quantum
