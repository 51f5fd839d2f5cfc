#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <vector>

#include "qdsc/common/random.hpp"

namespace qdsc::neural {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class Activation { Linear, Tanh, Sigmoid };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Σ (in·out + out) over consecutive layer pairs.
std::size_t param_count(const std::vector<int>& layer_sizes);

/// Fully connected network: tanh on hidden layers, configurable output.
/// Batched calls take one sample per column.
class DenseNetwork {
 public:
  /// Zero-initialized.
  DenseNetwork(std::vector<int> layer_sizes, Activation output);
  /// Weights and biases uniform in ±1/sqrt(fan_in).
  DenseNetwork(std::vector<int> layer_sizes, Activation output, Rng& rng);

  /// Cached per-layer outputs of a forward pass; outputs[0] is the input.
  struct Tape {
    std::vector<Matrix> outputs;
  };

  struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    Matrix input;  // dL/dx, one column per sample

    /// Same layout as DenseNetwork::parameters().
    [[nodiscard]] Vector flat() const;
  };

  [[nodiscard]] Vector forward(const Vector& x) const;
  [[nodiscard]] Matrix forward_batch(const Matrix& x) const;
  Matrix forward_batch(const Matrix& x, Tape& tape) const;

  /// Reverse pass for upstream dL/dy (one column per sample). Parameter
  /// gradients are summed over the batch.
  [[nodiscard]] Gradients backward(const Tape& tape, const Matrix& upstream) const;

  [[nodiscard]] const std::vector<int>& layer_sizes() const { return sizes_; }
  [[nodiscard]] Activation output_activation() const { return output_; }
  [[nodiscard]] int input_size() const { return sizes_.front(); }
  [[nodiscard]] int output_size() const { return sizes_.back(); }
  [[nodiscard]] std::size_t param_count() const;

  [[nodiscard]] const Matrix& weights(std::size_t layer) const { return weights_.at(layer); }
  [[nodiscard]] const Vector& bias(std::size_t layer) const { return biases_.at(layer); }
  Matrix& weights(std::size_t layer) { return weights_.at(layer); }
  Vector& bias(std::size_t layer) { return biases_.at(layer); }
  [[nodiscard]] std::size_t layer_count() const { return weights_.size(); }

  /// Flat view: per layer, weights row-major then bias.
  [[nodiscard]] Vector parameters() const;
  void set_parameters(const Vector& flat);

  /// Text format: header, layer sizes, activation, then every parameter at
  /// 17 significant digits (exact round trip).
  void write(std::ostream& out) const;
  static DenseNetwork read(std::istream& in);

  bool operator==(const DenseNetwork& other) const;

 private:
  std::vector<int> sizes_;
  Activation output_;
  std::vector<Matrix> weights_;  // [out × in]
  std::vector<Vector> biases_;
};

/// Adam with bias correction over a flat parameter vector.
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t size, double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

  void step(Vector& params, const Vector& grad, double step_size);

  [[nodiscard]] const Vector& first_moment() const { return m_; }
  [[nodiscard]] const Vector& second_moment() const { return v_; }
  [[nodiscard]] long steps() const { return t_; }

  void write(std::ostream& out) const;
  static Adam read(std::istream& in);

  bool operator==(const Adam& other) const = default;

 private:
  double beta1_ = 0.9, beta2_ = 0.999, epsilon_ = 1e-8;
  Vector m_, v_;
  long t_ = 0;
};

}  // namespace qdsc::neural
