#pragma once

#include <numbers>
#include <span>
#include <vector>

#include "qdsc/quantum/ansatz.hpp"
#include "qdsc/quantum/state_vector.hpp"

namespace qdsc::quantum {

struct PauliTerm {
  Pauli pauli = Pauli::Z;
  int qubit = 0;
  double weight = 1.0;
};

/// Weighted sum of single-qubit Pauli expectations.
using Observable = std::vector<PauliTerm>;

double expectation(const StateVector& state, const Observable& observable);

enum class GradientMethod {
  // Literal two-term shift rule: 1/2 [f(angle + s) - f(angle - s)] per gate.
  ParameterShift,
  // Reverse sweep over the gate list. For exp(-i angle P / 2) rotations this
  // yields the same derivative as the shift rule at O(gates) cost.
  Adjoint,
};

struct CircuitGradient {
  double value = 0.0;
  // d f / d (effective angle) for every gate; zero for CNOTs.
  std::vector<double> angle_grads;
  // Shaped like ParameterSet::values(): [theta | alpha | beta].
  std::vector<double> params;
  // d f / d input, through the encoding angles.
  std::vector<double> inputs;
};

/// Derivative of `observable` w.r.t. every rotation angle in `circuit`,
/// assembled into parameter and input gradients by the chain rule.
/// `shift` is only used by the parameter-shift method; values other than pi/2
/// give a wrong gradient and exist so the checking tools can run a negative
/// control.
CircuitGradient circuit_gradient(const Circuit& circuit, std::size_t param_count, int input_count,
                                 const Observable& observable, GradientMethod method,
                                 double shift = std::numbers::pi / 2);

CircuitGradient param_shift_grad(const AnsatzLayout& layout, const ParameterSet& params,
                                 std::span<const double> inputs, const Observable& observable,
                                 double shift = std::numbers::pi / 2);

CircuitGradient adjoint_grad(const AnsatzLayout& layout, const ParameterSet& params,
                             std::span<const double> inputs, const Observable& observable);

}  // namespace qdsc::quantum
