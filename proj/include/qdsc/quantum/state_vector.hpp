#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace qdsc::quantum {

using Complex = std::complex<double>;

// Hard ceiling on what a StateVector will allocate. Per-experiment limits
// are enforced separately by the memory guard (see memory_guard.hpp).
inline constexpr int kAbsoluteMaxQubits = 30;

enum class Pauli { X, Y, Z };

/// Dense statevector over n qubits.
///
/// Qubit 0 is the most significant bit of the basis index, so for two qubits
/// |10> is index 2. Every gate and expectation in this module uses that
/// convention.
class StateVector {
 public:
  /// |0...0> on `n_qubits` qubits.
  explicit StateVector(int n_qubits);

  /// Takes ownership of explicit amplitudes; length must be a power of two.
  static StateVector from_amplitudes(std::vector<Complex> amplitudes);

  [[nodiscard]] int num_qubits() const noexcept { return n_qubits_; }
  [[nodiscard]] std::size_t dimension() const noexcept { return amps_.size(); }
  [[nodiscard]] std::span<const Complex> amplitudes() const noexcept { return amps_; }
  [[nodiscard]] std::span<Complex> amplitudes() noexcept { return amps_; }
  [[nodiscard]] double norm() const;

  void apply_ry(int qubit, double angle);
  void apply_rz(int qubit, double angle);
  void apply_cnot(int control, int target);
  void apply_pauli(Pauli p, int qubit);

  [[nodiscard]] double expect_z(int qubit) const;
  [[nodiscard]] double expect_x(int qubit) const;
  [[nodiscard]] double expect(Pauli p, int qubit) const;

  /// Bit mask of `qubit` inside a basis index.
  [[nodiscard]] std::size_t mask(int qubit) const noexcept {
    return std::size_t{1} << (n_qubits_ - 1 - qubit);
  }

  /// One line per basis state: "bitstring\treal\timag". The bitstring is
  /// printed qubit 0 first.
  void dump(std::ostream& os) const;

  friend bool operator==(const StateVector&, const StateVector&) = default;

 private:
  StateVector(int n_qubits, std::vector<Complex> amps);
  void check_qubit(int qubit) const;

  int n_qubits_;
  std::vector<Complex> amps_;
};

/// <a|b>
Complex inner_product(const StateVector& a, const StateVector& b);

/// |<a|b>|^2
double fidelity(const StateVector& a, const StateVector& b);

}  // namespace qdsc::quantum
