#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "qdsc/common/random.hpp"
#include "qdsc/quantum/state_vector.hpp"

namespace qdsc::quantum {

using QubitPair = std::pair<int, int>;

/// CNOT ladder 0->1, 1->2, ..., n-2->n-1, applied in that order.
std::vector<QubitPair> linear_chain(int n_qubits);

/// Same pairs as linear_chain, applied from the bottom of the register up
/// (n-2->n-1 first, 0->1 last). With this order an X observable on qubit 0
/// picks up support on every qubit within one layer.
std::vector<QubitPair> reversed_chain(int n_qubits);

/// Layered ansatz structure. Each layer applies, in order:
///   1. RY(alpha[l][j] * x_j) then RZ(beta[l][j] * x_j) on qubit j < input_dim
///   2. RZ(theta[l][j][0]) then RY(theta[l][j][1]) on every qubit
///   3. the entangler CNOTs in listed order
struct AnsatzLayout {
  int n_qubits = 1;
  int n_layers = 1;
  int input_dim = 0;
  std::vector<QubitPair> entangler;
  // Output groups for the actor read-out. Empty for circuits that do not
  // group measurements (the critic).
  std::vector<std::vector<int>> qubit_groups;

  static AnsatzLayout chain(int n_qubits, int n_layers, int input_dim);

  void validate() const;

  [[nodiscard]] std::size_t theta_count() const {
    return static_cast<std::size_t>(n_layers) * static_cast<std::size_t>(n_qubits) * 2;
  }
  [[nodiscard]] std::size_t scaling_count() const {
    return static_cast<std::size_t>(n_layers) * static_cast<std::size_t>(input_dim);
  }
  /// theta + alpha + beta.
  [[nodiscard]] std::size_t parameter_count() const { return theta_count() + 2 * scaling_count(); }
};

/// Contiguous equal partition of `n_qubits` into `n_groups` groups. The first
/// n_qubits % n_groups groups receive one extra qubit.
std::vector<std::vector<int>> contiguous_groups(int n_qubits, int n_groups);

/// Trainable angles and input scalings of one ansatz, stored flat as
/// [theta | alpha | beta] so optimizers and soft updates can treat it as one
/// tensor.
class ParameterSet {
 public:
  ParameterSet() = default;
  explicit ParameterSet(const AnsatzLayout& layout);

  /// theta ~ U(-pi, pi); alpha, beta ~ U(0.5, 1.5) so inputs start out encoded.
  static ParameterSet random(const AnsatzLayout& layout, Rng& rng);

  [[nodiscard]] double theta(int layer, int qubit, int k) const { return data_[theta_index(layer, qubit, k)]; }
  double& theta(int layer, int qubit, int k) { return data_[theta_index(layer, qubit, k)]; }
  [[nodiscard]] double alpha(int layer, int j) const { return data_[alpha_index(layer, j)]; }
  double& alpha(int layer, int j) { return data_[alpha_index(layer, j)]; }
  [[nodiscard]] double beta(int layer, int j) const { return data_[beta_index(layer, j)]; }
  double& beta(int layer, int j) { return data_[beta_index(layer, j)]; }

  [[nodiscard]] std::size_t theta_index(int layer, int qubit, int k) const {
    return (static_cast<std::size_t>(layer) * static_cast<std::size_t>(n_qubits_) +
            static_cast<std::size_t>(qubit)) * 2 + static_cast<std::size_t>(k);
  }
  [[nodiscard]] std::size_t alpha_index(int layer, int j) const {
    return theta_size() + static_cast<std::size_t>(layer) * static_cast<std::size_t>(input_dim_) +
           static_cast<std::size_t>(j);
  }
  [[nodiscard]] std::size_t beta_index(int layer, int j) const {
    return alpha_index(layer, j) + static_cast<std::size_t>(n_layers_) * static_cast<std::size_t>(input_dim_);
  }

  [[nodiscard]] std::size_t theta_size() const {
    return static_cast<std::size_t>(n_layers_) * static_cast<std::size_t>(n_qubits_) * 2;
  }
  [[nodiscard]] std::size_t size() const noexcept { return data_.size(); }
  [[nodiscard]] std::span<const double> values() const noexcept { return data_; }
  [[nodiscard]] std::span<double> values() noexcept { return data_; }

  /// Throws std::invalid_argument unless the shape matches `layout` and all
  /// entries are finite.
  void check(const AnsatzLayout& layout) const;

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  int n_layers_ = 0;
  int n_qubits_ = 0;
  int input_dim_ = 0;
  std::vector<double> data_;
};

enum class GateKind : unsigned char { RY, RZ, CNOT };

/// One compiled gate. For rotations, `angle` is the effective rotation and
/// the derivative bookkeeping records how it depends on the flat parameter
/// index and on the classical input.
struct Gate {
  GateKind kind = GateKind::RY;
  int qubit = 0;   // rotation qubit or CNOT control
  int target = -1; // CNOT target
  double angle = 0.0;
  std::ptrdiff_t param = -1;  // flat ParameterSet index, -1 if none
  double param_coeff = 0.0;   // d angle / d param
  int input = -1;             // input feature index, -1 if none
  double input_coeff = 0.0;   // d angle / d input
};

struct Circuit {
  int n_qubits = 1;
  std::vector<Gate> gates;
};

Circuit build_circuit(const AnsatzLayout& layout, const ParameterSet& params,
                      std::span<const double> inputs);

void apply_gate(StateVector& state, const Gate& gate);

StateVector run_circuit(const Circuit& circuit);

/// U_L ... U_1 |0...0>.
StateVector run_ansatz(const AnsatzLayout& layout, const ParameterSet& params,
                       std::span<const double> inputs);

}  // namespace qdsc::quantum
