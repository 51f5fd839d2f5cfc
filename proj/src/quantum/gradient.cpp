#include "qdsc/quantum/gradient.hpp"

#include <stdexcept>

namespace qdsc::quantum {

namespace {

void check_observable(const Observable& observable, int n_qubits) {
  for (const auto& term : observable) {
    if (term.qubit < 0 || term.qubit >= n_qubits) {
      throw std::invalid_argument("observable qubit index out of range");
    }
  }
}

// out = O |psi>
void apply_observable(const StateVector& psi, const Observable& observable, std::vector<Complex>& out) {
  const auto amps = psi.amplitudes();
  out.assign(amps.size(), Complex{0.0, 0.0});
  const Complex i_unit{0.0, 1.0};
  for (const auto& term : observable) {
    const std::size_t m = psi.mask(term.qubit);
    const double w = term.weight;
    for (std::size_t i = 0; i < amps.size(); ++i) {
      const bool one = (i & m) != 0;
      switch (term.pauli) {
        case Pauli::Z:
          out[i] += one ? -w * amps[i] : w * amps[i];
          break;
        case Pauli::X:
          out[i] += w * amps[i ^ m];
          break;
        case Pauli::Y:
          // Y|0> = i|1>, Y|1> = -i|0>
          out[i] += one ? w * i_unit * amps[i ^ m] : -w * i_unit * amps[i ^ m];
          break;
      }
    }
  }
}

// Im <lambda| P_q |psi>
double generator_overlap(std::span<const Complex> lambda, const StateVector& psi, GateKind kind, int qubit) {
  const auto amps = psi.amplitudes();
  const std::size_t m = psi.mask(qubit);
  Complex acc{0.0, 0.0};
  if (kind == GateKind::RZ) {
    for (std::size_t i = 0; i < amps.size(); ++i) {
      const Complex t = std::conj(lambda[i]) * amps[i];
      acc += (i & m) ? -t : t;
    }
  } else {
    const Complex i_unit{0.0, 1.0};
    for (std::size_t i = 0; i < amps.size(); ++i) {
      const Complex y = (i & m) ? i_unit * amps[i ^ m] : -i_unit * amps[i ^ m];
      acc += std::conj(lambda[i]) * y;
    }
  }
  return acc.imag();
}

void apply_inverse(StateVector& state, const Gate& gate) {
  switch (gate.kind) {
    case GateKind::RY:
      state.apply_ry(gate.qubit, -gate.angle);
      break;
    case GateKind::RZ:
      state.apply_rz(gate.qubit, -gate.angle);
      break;
    case GateKind::CNOT:
      state.apply_cnot(gate.qubit, gate.target);
      break;
  }
}

void assemble(CircuitGradient& grad, const Circuit& circuit) {
  for (std::size_t k = 0; k < circuit.gates.size(); ++k) {
    const Gate& g = circuit.gates[k];
    const double d = grad.angle_grads[k];
    if (g.param >= 0) grad.params[static_cast<std::size_t>(g.param)] += d * g.param_coeff;
    if (g.input >= 0) grad.inputs[static_cast<std::size_t>(g.input)] += d * g.input_coeff;
  }
}

}  // namespace

double expectation(const StateVector& state, const Observable& observable) {
  double acc = 0.0;
  for (const auto& term : observable) acc += term.weight * state.expect(term.pauli, term.qubit);
  return acc;
}

CircuitGradient circuit_gradient(const Circuit& circuit, std::size_t param_count, int input_count,
                                 const Observable& observable, GradientMethod method, double shift) {
  check_observable(observable, circuit.n_qubits);
  CircuitGradient grad;
  grad.angle_grads.assign(circuit.gates.size(), 0.0);
  grad.params.assign(param_count, 0.0);
  grad.inputs.assign(static_cast<std::size_t>(input_count), 0.0);

  if (method == GradientMethod::ParameterShift) {
    grad.value = expectation(run_circuit(circuit), observable);
    Circuit shifted = circuit;
    for (std::size_t k = 0; k < circuit.gates.size(); ++k) {
      if (circuit.gates[k].kind == GateKind::CNOT) continue;
      const double base = circuit.gates[k].angle;
      shifted.gates[k].angle = base + shift;
      const double plus = expectation(run_circuit(shifted), observable);
      shifted.gates[k].angle = base - shift;
      const double minus = expectation(run_circuit(shifted), observable);
      shifted.gates[k].angle = base;
      grad.angle_grads[k] = 0.5 * (plus - minus);
    }
  } else {
    StateVector psi = run_circuit(circuit);
    grad.value = expectation(psi, observable);
    std::vector<Complex> lambda_amps;
    apply_observable(psi, observable, lambda_amps);
    StateVector lambda = StateVector::from_amplitudes(std::move(lambda_amps));
    for (std::size_t k = circuit.gates.size(); k-- > 0;) {
      const Gate& g = circuit.gates[k];
      if (g.kind != GateKind::CNOT) {
        grad.angle_grads[k] = generator_overlap(lambda.amplitudes(), psi, g.kind, g.qubit);
      }
      apply_inverse(psi, g);
      apply_inverse(lambda, g);
    }
  }
  assemble(grad, circuit);
  return grad;
}

CircuitGradient param_shift_grad(const AnsatzLayout& layout, const ParameterSet& params,
                                 std::span<const double> inputs, const Observable& observable,
                                 double shift) {
  return circuit_gradient(build_circuit(layout, params, inputs), params.size(), layout.input_dim,
                          observable, GradientMethod::ParameterShift, shift);
}

CircuitGradient adjoint_grad(const AnsatzLayout& layout, const ParameterSet& params,
                             std::span<const double> inputs, const Observable& observable) {
  return circuit_gradient(build_circuit(layout, params, inputs), params.size(), layout.input_dim,
                          observable, GradientMethod::Adjoint);
}

}  // namespace qdsc::quantum
