#include "qdsc/quantum/state_vector.hpp"

#include <bit>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>
#include <string>

namespace qdsc::quantum {

StateVector::StateVector(int n_qubits) : n_qubits_(n_qubits) {
  if (n_qubits < 1 || n_qubits > kAbsoluteMaxQubits) {
    throw std::invalid_argument("StateVector: qubit count " + std::to_string(n_qubits) +
                                " outside [1, " + std::to_string(kAbsoluteMaxQubits) + "]");
  }
  amps_.assign(std::size_t{1} << n_qubits, Complex{0.0, 0.0});
  amps_[0] = 1.0;
}

StateVector::StateVector(int n_qubits, std::vector<Complex> amps)
    : n_qubits_(n_qubits), amps_(std::move(amps)) {}

StateVector StateVector::from_amplitudes(std::vector<Complex> amplitudes) {
  const std::size_t dim = amplitudes.size();
  if (dim < 2 || !std::has_single_bit(dim)) {
    throw std::invalid_argument("StateVector: amplitude count must be a power of two >= 2");
  }
  const int n = std::countr_zero(dim);
  if (n > kAbsoluteMaxQubits) {
    throw std::invalid_argument("StateVector: too many qubits");
  }
  return StateVector(n, std::move(amplitudes));
}

double StateVector::norm() const {
  double s = 0.0;
  for (const auto& a : amps_) s += std::norm(a);
  return std::sqrt(s);
}

void StateVector::check_qubit(int qubit) const {
  if (qubit < 0 || qubit >= n_qubits_) {
    throw std::invalid_argument("qubit index " + std::to_string(qubit) + " out of range for " +
                                std::to_string(n_qubits_) + " qubits");
  }
}

void StateVector::apply_ry(int qubit, double angle) {
  check_qubit(qubit);
  const double c = std::cos(0.5 * angle);
  const double s = std::sin(0.5 * angle);
  const std::size_t m = mask(qubit);
  const std::size_t dim = amps_.size();
  for (std::size_t hi = 0; hi < dim; hi += 2 * m) {
    for (std::size_t i = hi; i < hi + m; ++i) {
      const Complex a0 = amps_[i];
      const Complex a1 = amps_[i | m];
      amps_[i] = c * a0 - s * a1;
      amps_[i | m] = s * a0 + c * a1;
    }
  }
}

void StateVector::apply_rz(int qubit, double angle) {
  check_qubit(qubit);
  const Complex p0 = std::polar(1.0, -0.5 * angle);
  const Complex p1 = std::conj(p0);
  const std::size_t m = mask(qubit);
  const std::size_t dim = amps_.size();
  for (std::size_t hi = 0; hi < dim; hi += 2 * m) {
    for (std::size_t i = hi; i < hi + m; ++i) {
      amps_[i] *= p0;
      amps_[i | m] *= p1;
    }
  }
}

void StateVector::apply_cnot(int control, int target) {
  check_qubit(control);
  check_qubit(target);
  if (control == target) {
    throw std::invalid_argument("CNOT control and target must differ");
  }
  const std::size_t cm = mask(control);
  const std::size_t tm = mask(target);
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    if ((i & cm) && !(i & tm)) std::swap(amps_[i], amps_[i | tm]);
  }
}

void StateVector::apply_pauli(Pauli p, int qubit) {
  check_qubit(qubit);
  const std::size_t m = mask(qubit);
  const std::size_t dim = amps_.size();
  const Complex i_unit{0.0, 1.0};
  for (std::size_t hi = 0; hi < dim; hi += 2 * m) {
    for (std::size_t i = hi; i < hi + m; ++i) {
      Complex& a0 = amps_[i];
      Complex& a1 = amps_[i | m];
      switch (p) {
        case Pauli::X:
          std::swap(a0, a1);
          break;
        case Pauli::Y: {
          const Complex t0 = a0;
          a0 = -i_unit * a1;
          a1 = i_unit * t0;
          break;
        }
        case Pauli::Z:
          a1 = -a1;
          break;
      }
    }
  }
}

double StateVector::expect_z(int qubit) const {
  check_qubit(qubit);
  const std::size_t m = mask(qubit);
  double acc = 0.0;
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    acc += (i & m) ? -std::norm(amps_[i]) : std::norm(amps_[i]);
  }
  return acc;
}

double StateVector::expect_x(int qubit) const {
  check_qubit(qubit);
  const std::size_t m = mask(qubit);
  const std::size_t dim = amps_.size();
  double acc = 0.0;
  for (std::size_t hi = 0; hi < dim; hi += 2 * m) {
    for (std::size_t i = hi; i < hi + m; ++i) {
      acc += 2.0 * (std::conj(amps_[i]) * amps_[i | m]).real();
    }
  }
  return acc;
}

double StateVector::expect(Pauli p, int qubit) const {
  switch (p) {
    case Pauli::Z:
      return expect_z(qubit);
    case Pauli::X:
      return expect_x(qubit);
    case Pauli::Y: {
      check_qubit(qubit);
      const std::size_t m = mask(qubit);
      double acc = 0.0;
      for (std::size_t i = 0; i < amps_.size(); ++i) {
        if (!(i & m)) acc += 2.0 * (std::conj(amps_[i]) * amps_[i | m]).imag();
      }
      return acc;
    }
  }
  return 0.0;
}

void StateVector::dump(std::ostream& os) const {
  const auto old_precision = os.precision(17);
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    std::string bits(static_cast<std::size_t>(n_qubits_), '0');
    for (int q = 0; q < n_qubits_; ++q) {
      if (i & mask(q)) bits[static_cast<std::size_t>(q)] = '1';
    }
    os << bits << '\t' << amps_[i].real() << '\t' << amps_[i].imag() << '\n';
  }
  os.precision(old_precision);
}

Complex inner_product(const StateVector& a, const StateVector& b) {
  if (a.dimension() != b.dimension()) {
    throw std::invalid_argument("inner_product: dimension mismatch");
  }
  Complex acc{0.0, 0.0};
  const auto aa = a.amplitudes();
  const auto bb = b.amplitudes();
  for (std::size_t i = 0; i < aa.size(); ++i) acc += std::conj(aa[i]) * bb[i];
  return acc;
}

double fidelity(const StateVector& a, const StateVector& b) {
  return std::norm(inner_product(a, b));
}

}  // namespace qdsc::quantum
