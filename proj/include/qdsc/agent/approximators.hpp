#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "qdsc/common/random.hpp"
#include "qdsc/neural/dense.hpp"
#include "qdsc/quantum/ansatz.hpp"
#include "qdsc/quantum/noise.hpp"

namespace qdsc::agent {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Actions live in [bias - scale, bias + scale] componentwise.
struct ActionScale {
  Vector scale;
  Vector bias;

  [[nodiscard]] int size() const { return static_cast<int>(scale.size()); }
  void validate() const;
  [[nodiscard]] Vector clip(const Vector& a) const;
  /// (a - bias) / scale, the form the critics consume.
  [[nodiscard]] Vector normalize(const Vector& a) const;
};

// Batched calls take one sample per column.

class Actor {
 public:
  virtual ~Actor() = default;

  [[nodiscard]] virtual int state_dim() const = 0;
  [[nodiscard]] int action_dim() const { return scale().size(); }
  [[nodiscard]] virtual const ActionScale& scale() const = 0;

  [[nodiscard]] virtual Vector act(const Vector& state) const = 0;
  /// Evaluation under hardware noise; noiseless approximators ignore it.
  [[nodiscard]] virtual Vector act_noisy(const Vector& state, const quantum::NoiseModel& noise, Rng& rng) const;
  [[nodiscard]] virtual Matrix act_batch(const Matrix& states) const;

  /// Σ_b upstream_b · dμ(s_b)/dθ.
  [[nodiscard]] virtual Vector parameter_gradient(const Matrix& states, const Matrix& upstream) const = 0;

  [[nodiscard]] virtual Vector parameters() const = 0;
  virtual void set_parameters(const Vector& flat) = 0;
  [[nodiscard]] std::size_t param_count() const { return static_cast<std::size_t>(parameters().size()); }

  [[nodiscard]] virtual std::unique_ptr<Actor> clone() const = 0;
  [[nodiscard]] virtual std::string kind() const = 0;
  virtual void write(std::ostream& out) const = 0;
};

class Critic {
 public:
  virtual ~Critic() = default;

  [[nodiscard]] virtual int state_dim() const = 0;
  [[nodiscard]] virtual int action_dim() const = 0;

  [[nodiscard]] virtual double value(const Vector& state, const Vector& action) const = 0;
  [[nodiscard]] virtual Vector values(const Matrix& states, const Matrix& actions) const;

  struct BatchGradient {
    Vector values;   // Q per sample
    Vector params;   // Σ_b upstream_b · dQ_b/dθ
    Matrix actions;  // column b: dQ_b/da_b (not weighted)
  };
  /// `upstream` weights the parameter gradient per sample. Action gradients
  /// are only filled when `want_actions` is set; parameter gradients only
  /// when `upstream` is non-empty.
  [[nodiscard]] virtual BatchGradient gradient(const Matrix& states, const Matrix& actions, const Vector& upstream,
                                               bool want_actions) const = 0;

  [[nodiscard]] virtual Vector parameters() const = 0;
  virtual void set_parameters(const Vector& flat) = 0;
  [[nodiscard]] std::size_t param_count() const { return static_cast<std::size_t>(parameters().size()); }

  [[nodiscard]] virtual std::unique_ptr<Critic> clone() const = 0;
  [[nodiscard]] virtual std::string kind() const = 0;
  virtual void write(std::ostream& out) const = 0;
};

enum class Readout {
  Grouped,    // a_g = A_g tanh(Σ_{i∈g} <Z_i> / |g|) + B_g
  SharedSum,  // a_g = A_g tanh(Σ_i <Z_i> / n) + B_g
};

struct QuantumActorConfig {
  int n_qubits = 6;
  int n_layers = 3;
  int state_dim = 0;
  std::vector<int> features;  // state indices encoded, one per qubit
  Readout readout = Readout::Grouped;
  ActionScale scale;
};

/// Layered-ansatz policy with Z read-out.
class QuantumActor final : public Actor {
 public:
  QuantumActor(QuantumActorConfig config, Rng& rng);
  QuantumActor(QuantumActorConfig config, quantum::ParameterSet params);

  [[nodiscard]] int state_dim() const override { return config_.state_dim; }
  [[nodiscard]] const ActionScale& scale() const override { return config_.scale; }
  [[nodiscard]] Vector act(const Vector& state) const override;
  [[nodiscard]] Vector act_noisy(const Vector& state, const quantum::NoiseModel& noise, Rng& rng) const override;
  [[nodiscard]] Vector parameter_gradient(const Matrix& states, const Matrix& upstream) const override;
  [[nodiscard]] Vector parameters() const override;
  void set_parameters(const Vector& flat) override;
  [[nodiscard]] std::unique_ptr<Actor> clone() const override { return std::make_unique<QuantumActor>(*this); }
  [[nodiscard]] std::string kind() const override { return "quantum-actor"; }
  void write(std::ostream& out) const override;
  static std::unique_ptr<QuantumActor> read(std::istream& in);

  [[nodiscard]] const quantum::AnsatzLayout& layout() const { return layout_; }
  [[nodiscard]] const quantum::ParameterSet& params() const { return params_; }
  [[nodiscard]] const QuantumActorConfig& config() const { return config_; }
  [[nodiscard]] std::vector<double> encode(const Vector& state) const;
  /// Maps per-qubit <Z> values to actions.
  [[nodiscard]] Vector readout(std::span<const double> z) const;

 private:
  QuantumActorConfig config_;
  quantum::AnsatzLayout layout_;
  quantum::ParameterSet params_;
};

struct QuantumCriticConfig {
  int n_qubits = 8;
  int n_layers = 3;
  int state_dim = 0;
  std::vector<int> features;  // state indices encoded before the actions
  ActionScale scale;          // actions are encoded normalized
};

/// Q = w <X_0> + b on the layered ansatz fed [state features; actions].
class QuantumCritic final : public Critic {
 public:
  QuantumCritic(QuantumCriticConfig config, Rng& rng);

  [[nodiscard]] int state_dim() const override { return config_.state_dim; }
  [[nodiscard]] int action_dim() const override { return config_.scale.size(); }
  [[nodiscard]] double value(const Vector& state, const Vector& action) const override;
  [[nodiscard]] BatchGradient gradient(const Matrix& states, const Matrix& actions, const Vector& upstream,
                                       bool want_actions) const override;
  [[nodiscard]] Vector parameters() const override;
  void set_parameters(const Vector& flat) override;
  [[nodiscard]] std::unique_ptr<Critic> clone() const override { return std::make_unique<QuantumCritic>(*this); }
  [[nodiscard]] std::string kind() const override { return "quantum-critic"; }
  void write(std::ostream& out) const override;
  static std::unique_ptr<QuantumCritic> read(std::istream& in);

  [[nodiscard]] const quantum::AnsatzLayout& layout() const { return layout_; }
  [[nodiscard]] quantum::ParameterSet& params() { return params_; }
  [[nodiscard]] double w_out() const { return w_out_; }
  [[nodiscard]] double b_out() const { return b_out_; }
  void set_output(double w, double b) {
    w_out_ = w;
    b_out_ = b;
  }
  [[nodiscard]] std::vector<double> encode(const Vector& state, const Vector& action) const;

 private:
  QuantumCriticConfig config_;
  quantum::AnsatzLayout layout_;
  quantum::ParameterSet params_;
  double w_out_ = 1.0;
  double b_out_ = 0.0;
};

/// Baseline policy: state-128-128-action, tanh output scaled to the bounds.
class ClassicalActor final : public Actor {
 public:
  ClassicalActor(int state_dim, ActionScale scale, std::vector<int> hidden, Rng& rng);
  ClassicalActor(neural::DenseNetwork net, ActionScale scale);

  [[nodiscard]] int state_dim() const override { return net_.input_size(); }
  [[nodiscard]] const ActionScale& scale() const override { return scale_; }
  [[nodiscard]] Vector act(const Vector& state) const override;
  [[nodiscard]] Matrix act_batch(const Matrix& states) const override;
  [[nodiscard]] Vector parameter_gradient(const Matrix& states, const Matrix& upstream) const override;
  [[nodiscard]] Vector parameters() const override { return net_.parameters(); }
  void set_parameters(const Vector& flat) override { net_.set_parameters(flat); }
  [[nodiscard]] std::unique_ptr<Actor> clone() const override { return std::make_unique<ClassicalActor>(*this); }
  [[nodiscard]] std::string kind() const override { return "classical-actor"; }
  void write(std::ostream& out) const override;
  static std::unique_ptr<ClassicalActor> read(std::istream& in);

  [[nodiscard]] const neural::DenseNetwork& network() const { return net_; }

 private:
  neural::DenseNetwork net_;
  ActionScale scale_;
};

/// Baseline critic: (state + action)-128-128-128-1, linear output.
class ClassicalCritic final : public Critic {
 public:
  ClassicalCritic(int state_dim, ActionScale scale, std::vector<int> hidden, Rng& rng);
  ClassicalCritic(neural::DenseNetwork net, ActionScale scale, int state_dim);

  [[nodiscard]] int state_dim() const override { return state_dim_; }
  [[nodiscard]] int action_dim() const override { return scale_.size(); }
  [[nodiscard]] double value(const Vector& state, const Vector& action) const override;
  [[nodiscard]] Vector values(const Matrix& states, const Matrix& actions) const override;
  [[nodiscard]] BatchGradient gradient(const Matrix& states, const Matrix& actions, const Vector& upstream,
                                       bool want_actions) const override;
  [[nodiscard]] Vector parameters() const override { return net_.parameters(); }
  void set_parameters(const Vector& flat) override { net_.set_parameters(flat); }
  [[nodiscard]] std::unique_ptr<Critic> clone() const override { return std::make_unique<ClassicalCritic>(*this); }
  [[nodiscard]] std::string kind() const override { return "classical-critic"; }
  void write(std::ostream& out) const override;
  static std::unique_ptr<ClassicalCritic> read(std::istream& in);

  [[nodiscard]] const neural::DenseNetwork& network() const { return net_; }

 private:
  [[nodiscard]] Matrix inputs(const Matrix& states, const Matrix& actions) const;

  neural::DenseNetwork net_;
  ActionScale scale_;
  int state_dim_;
};

/// Dispatch on the kind tag written by Actor::write / Critic::write.
std::unique_ptr<Actor> read_actor(std::istream& in);
std::unique_ptr<Critic> read_critic(std::istream& in);

}  // namespace qdsc::agent
