#include "qdsc/agent/approximators.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "qdsc/quantum/gradient.hpp"

namespace qdsc::agent {

namespace {

using quantum::Observable;
using quantum::Pauli;
using quantum::PauliTerm;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

void expect_token(std::istream& in, const std::string& expected) {
  std::string tok;
  in >> tok;
  require(in && tok == expected, "checkpoint: expected '" + expected + "', found '" + tok + "'");
}

template <typename Range>
void write_list(std::ostream& out, const char* tag, const Range& values) {
  out << tag << ' ' << values.size();
  for (const auto& v : values) out << ' ' << v;
  out << '\n';
}

double parse_double(const std::string& tok) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  require(pos > 0 && pos == tok.size(), "checkpoint: bad number '" + tok + "'");
  return v;
}

std::vector<double> read_doubles(std::istream& in, const std::string& tag) {
  expect_token(in, tag);
  long n = -1;
  in >> n;
  require(in && n >= 0, "checkpoint: bad length for '" + tag + "'");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& v : out) {
    std::string tok;
    in >> tok;
    require(static_cast<bool>(in), "checkpoint: truncated '" + tag + "'");
    v = parse_double(tok);
  }
  return out;
}

std::vector<int> read_ints(std::istream& in, const std::string& tag) {
  std::vector<int> out;
  for (double v : read_doubles(in, tag)) out.push_back(static_cast<int>(v));
  return out;
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

void write_scale(std::ostream& out, const ActionScale& s) {
  write_list(out, "scale", to_std(s.scale));
  write_list(out, "bias", to_std(s.bias));
}

ActionScale read_scale(std::istream& in) {
  ActionScale s{to_vector(read_doubles(in, "scale")), to_vector(read_doubles(in, "bias"))};
  s.validate();
  return s;
}

void check_features(const std::vector<int>& features, int state_dim, const char* who) {
  for (int f : features) {
    require(f >= 0 && f < state_dim, std::string(who) + ": feature index " + std::to_string(f) +
                                         " outside state of size " + std::to_string(state_dim));
  }
}

Vector column(const Matrix& m, Eigen::Index c) { return m.col(c); }

}  // namespace

void ActionScale::validate() const {
  require(scale.size() == bias.size() && scale.size() > 0, "action scale and bias must be non-empty and equal length");
  require((scale.array() > 0.0).all() && scale.allFinite() && bias.allFinite(),
          "action scale entries must be finite and positive");
}

Vector ActionScale::clip(const Vector& a) const {
  return a.cwiseMax(bias - scale).cwiseMin(bias + scale);
}

Vector ActionScale::normalize(const Vector& a) const { return (a - bias).cwiseQuotient(scale); }

Vector Actor::act_noisy(const Vector& state, const quantum::NoiseModel&, Rng&) const { return act(state); }

Matrix Actor::act_batch(const Matrix& states) const {
  Matrix out(action_dim(), states.cols());
  for (Eigen::Index c = 0; c < states.cols(); ++c) out.col(c) = act(column(states, c));
  return out;
}

Vector Critic::values(const Matrix& states, const Matrix& actions) const {
  Vector out(states.cols());
  for (Eigen::Index c = 0; c < states.cols(); ++c) out(c) = value(column(states, c), column(actions, c));
  return out;
}

// ---------------------------------------------------------------- quantum actor

namespace {

quantum::AnsatzLayout actor_layout(const QuantumActorConfig& c) {
  c.scale.validate();
  require(c.state_dim >= 1, "quantum actor: state_dim must be positive");
  require(static_cast<int>(c.features.size()) <= c.n_qubits, "quantum actor: more features than qubits");
  check_features(c.features, c.state_dim, "quantum actor");
  auto layout = quantum::AnsatzLayout::chain(c.n_qubits, c.n_layers, static_cast<int>(c.features.size()));
  if (c.readout == Readout::Grouped) {
    require(c.scale.size() <= c.n_qubits, "quantum actor: more actions than qubits for grouped read-out");
    layout.qubit_groups = quantum::contiguous_groups(c.n_qubits, c.scale.size());
  } else {
    layout.qubit_groups = quantum::contiguous_groups(c.n_qubits, 1);
  }
  layout.validate();
  return layout;
}

}  // namespace

QuantumActor::QuantumActor(QuantumActorConfig config, Rng& rng)
    : config_(std::move(config)), layout_(actor_layout(config_)),
      params_(quantum::ParameterSet::random(layout_, rng)) {}

QuantumActor::QuantumActor(QuantumActorConfig config, quantum::ParameterSet params)
    : config_(std::move(config)), layout_(actor_layout(config_)), params_(std::move(params)) {
  params_.check(layout_);
}

std::vector<double> QuantumActor::encode(const Vector& state) const {
  require(state.size() == config_.state_dim, "quantum actor: state has " + std::to_string(state.size()) +
                                                 " entries, expected " + std::to_string(config_.state_dim));
  std::vector<double> x;
  x.reserve(config_.features.size());
  for (int f : config_.features) x.push_back(state(f));
  return x;
}

Vector QuantumActor::readout(std::span<const double> z) const {
  const int na = action_dim();
  Vector a(na);
  if (config_.readout == Readout::SharedSum) {
    double s = 0.0;
    for (double v : z) s += v;
    const double t = std::tanh(s / static_cast<double>(config_.n_qubits));
    for (int g = 0; g < na; ++g) a(g) = config_.scale.scale(g) * t + config_.scale.bias(g);
    return a;
  }
  for (int g = 0; g < na; ++g) {
    const auto& group = layout_.qubit_groups[static_cast<std::size_t>(g)];
    double s = 0.0;
    for (int q : group) s += z[static_cast<std::size_t>(q)];
    a(g) = config_.scale.scale(g) * std::tanh(s / static_cast<double>(group.size())) + config_.scale.bias(g);
  }
  return a;
}

Vector QuantumActor::act(const Vector& state) const {
  const auto psi = quantum::run_ansatz(layout_, params_, encode(state));
  std::vector<double> z(static_cast<std::size_t>(config_.n_qubits));
  for (int q = 0; q < config_.n_qubits; ++q) z[static_cast<std::size_t>(q)] = psi.expect_z(q);
  return readout(z);
}

Vector QuantumActor::act_noisy(const Vector& state, const quantum::NoiseModel& noise, Rng& rng) const {
  if (!noise.enabled()) return act(state);
  const auto circuit = quantum::build_circuit(layout_, params_, encode(state));
  Observable terms;
  for (int q = 0; q < config_.n_qubits; ++q) terms.push_back({Pauli::Z, q, 1.0});
  const auto z = quantum::averaged_expectations(circuit, terms, noise, rng);
  return readout(z);
}

Vector QuantumActor::parameter_gradient(const Matrix& states, const Matrix& upstream) const {
  require(upstream.rows() == action_dim() && upstream.cols() == states.cols(),
          "quantum actor: upstream gradient shape mismatch");
  Vector total = Vector::Zero(static_cast<Eigen::Index>(params_.size()));
  const int n = config_.n_qubits;
  for (Eigen::Index c = 0; c < states.cols(); ++c) {
    const auto x = encode(column(states, c));
    const auto psi = quantum::run_ansatz(layout_, params_, x);
    std::vector<double> z(static_cast<std::size_t>(n));
    for (int q = 0; q < n; ++q) z[static_cast<std::size_t>(q)] = psi.expect_z(q);
    // Chain rule through the tanh read-out gives one weighted Z observable.
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    if (config_.readout == Readout::SharedSum) {
      double s = 0.0;
      for (double v : z) s += v;
      const double t = std::tanh(s / n);
      double acc = 0.0;
      for (int g = 0; g < action_dim(); ++g) acc += upstream(g, c) * config_.scale.scale(g);
      for (auto& wi : w) wi = acc * (1.0 - t * t) / n;
    } else {
      for (int g = 0; g < action_dim(); ++g) {
        const auto& group = layout_.qubit_groups[static_cast<std::size_t>(g)];
        const double k = static_cast<double>(group.size());
        double s = 0.0;
        for (int q : group) s += z[static_cast<std::size_t>(q)];
        const double t = std::tanh(s / k);
        for (int q : group) w[static_cast<std::size_t>(q)] += upstream(g, c) * config_.scale.scale(g) * (1.0 - t * t) / k;
      }
    }
    Observable obs;
    for (int q = 0; q < n; ++q) {
      if (w[static_cast<std::size_t>(q)] != 0.0) obs.push_back({Pauli::Z, q, w[static_cast<std::size_t>(q)]});
    }
    if (obs.empty()) continue;
    const auto g = quantum::adjoint_grad(layout_, params_, x, obs);
    total += Eigen::Map<const Vector>(g.params.data(), static_cast<Eigen::Index>(g.params.size()));
  }
  return total;
}

Vector QuantumActor::parameters() const {
  const auto v = params_.values();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void QuantumActor::set_parameters(const Vector& flat) {
  require(static_cast<std::size_t>(flat.size()) == params_.size(), "quantum actor: parameter size mismatch");
  auto v = params_.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = flat(static_cast<Eigen::Index>(i));
}

void QuantumActor::write(std::ostream& out) const {
  const auto old = out.precision(17);
  out << kind() << " v1\n"
      << config_.n_qubits << ' ' << config_.n_layers << ' ' << config_.state_dim << ' '
      << (config_.readout == Readout::Grouped ? "grouped" : "shared-sum") << '\n';
  write_list(out, "features", config_.features);
  write_scale(out, config_.scale);
  write_list(out, "params", params_.values());
  out.precision(old);
}

std::unique_ptr<QuantumActor> QuantumActor::read(std::istream& in) {
  expect_token(in, "v1");
  QuantumActorConfig c;
  std::string mode;
  in >> c.n_qubits >> c.n_layers >> c.state_dim >> mode;
  require(in && (mode == "grouped" || mode == "shared-sum"), "checkpoint: bad quantum actor header");
  c.readout = mode == "grouped" ? Readout::Grouped : Readout::SharedSum;
  c.features = read_ints(in, "features");
  c.scale = read_scale(in);
  const auto values = read_doubles(in, "params");
  const auto layout = actor_layout(c);
  quantum::ParameterSet p(layout);
  require(values.size() == p.size(), "checkpoint: quantum actor parameter count mismatch");
  std::copy(values.begin(), values.end(), p.values().begin());
  return std::make_unique<QuantumActor>(std::move(c), std::move(p));
}

// --------------------------------------------------------------- quantum critic

namespace {

quantum::AnsatzLayout critic_layout(const QuantumCriticConfig& c) {
  c.scale.validate();
  require(c.state_dim >= 1, "quantum critic: state_dim must be positive");
  check_features(c.features, c.state_dim, "quantum critic");
  const int m = static_cast<int>(c.features.size()) + c.scale.size();
  require(m <= c.n_qubits, "quantum critic: " + std::to_string(m) + " encoded inputs exceed " +
                               std::to_string(c.n_qubits) + " qubits");
  quantum::AnsatzLayout layout;
  layout.n_qubits = c.n_qubits;
  layout.n_layers = c.n_layers;
  layout.input_dim = m;
  layout.entangler = quantum::reversed_chain(c.n_qubits);
  layout.validate();
  return layout;
}

}  // namespace

QuantumCritic::QuantumCritic(QuantumCriticConfig config, Rng& rng)
    : config_(std::move(config)), layout_(critic_layout(config_)),
      params_(quantum::ParameterSet::random(layout_, rng)) {}

std::vector<double> QuantumCritic::encode(const Vector& state, const Vector& action) const {
  require(state.size() == config_.state_dim && action.size() == action_dim(), "quantum critic: input size mismatch");
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(layout_.input_dim));
  for (int f : config_.features) x.push_back(state(f));
  const Vector a = config_.scale.normalize(action);
  for (double v : a) x.push_back(v);
  return x;
}

double QuantumCritic::value(const Vector& state, const Vector& action) const {
  return w_out_ * quantum::run_ansatz(layout_, params_, encode(state, action)).expect_x(0) + b_out_;
}

Critic::BatchGradient QuantumCritic::gradient(const Matrix& states, const Matrix& actions, const Vector& upstream,
                                              bool want_actions) const {
  require(states.cols() == actions.cols(), "quantum critic: batch size mismatch");
  require(upstream.size() == 0 || upstream.size() == states.cols(), "quantum critic: upstream size mismatch");
  const Eigen::Index batch = states.cols();
  const auto np = static_cast<Eigen::Index>(params_.size());
  BatchGradient out;
  out.values.resize(batch);
  if (upstream.size() > 0) out.params = Vector::Zero(np + 2);
  if (want_actions) out.actions.resize(action_dim(), batch);
  const Observable x0{{Pauli::X, 0, 1.0}};
  const auto nf = static_cast<Eigen::Index>(config_.features.size());
  for (Eigen::Index c = 0; c < batch; ++c) {
    const auto x = encode(column(states, c), column(actions, c));
    if (upstream.size() == 0 && !want_actions) {
      out.values(c) = w_out_ * quantum::run_ansatz(layout_, params_, x).expect_x(0) + b_out_;
      continue;
    }
    const auto g = quantum::adjoint_grad(layout_, params_, x, x0);
    out.values(c) = w_out_ * g.value + b_out_;
    if (upstream.size() > 0) {
      const double u = upstream(c);
      out.params.head(np) += u * w_out_ * Eigen::Map<const Vector>(g.params.data(), np);
      out.params(np) += u * g.value;
      out.params(np + 1) += u;
    }
    if (want_actions) {
      for (int k = 0; k < action_dim(); ++k) {
        out.actions(k, c) = w_out_ * g.inputs[static_cast<std::size_t>(nf + k)] / config_.scale.scale(k);
      }
    }
  }
  return out;
}

Vector QuantumCritic::parameters() const {
  const auto v = params_.values();
  Vector out(static_cast<Eigen::Index>(v.size()) + 2);
  out.head(static_cast<Eigen::Index>(v.size())) = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
  out(out.size() - 2) = w_out_;
  out(out.size() - 1) = b_out_;
  return out;
}

void QuantumCritic::set_parameters(const Vector& flat) {
  require(static_cast<std::size_t>(flat.size()) == params_.size() + 2, "quantum critic: parameter size mismatch");
  auto v = params_.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = flat(static_cast<Eigen::Index>(i));
  w_out_ = flat(flat.size() - 2);
  b_out_ = flat(flat.size() - 1);
}

void QuantumCritic::write(std::ostream& out) const {
  const auto old = out.precision(17);
  out << kind() << " v1\n" << config_.n_qubits << ' ' << config_.n_layers << ' ' << config_.state_dim << '\n';
  write_list(out, "features", config_.features);
  write_scale(out, config_.scale);
  write_list(out, "params", to_std(parameters()));
  out.precision(old);
}

std::unique_ptr<QuantumCritic> QuantumCritic::read(std::istream& in) {
  expect_token(in, "v1");
  QuantumCriticConfig c;
  in >> c.n_qubits >> c.n_layers >> c.state_dim;
  require(static_cast<bool>(in), "checkpoint: bad quantum critic header");
  c.features = read_ints(in, "features");
  c.scale = read_scale(in);
  const auto values = read_doubles(in, "params");
  Rng unused(0);
  auto critic = std::make_unique<QuantumCritic>(std::move(c), unused);
  require(values.size() == critic->param_count(), "checkpoint: quantum critic parameter count mismatch");
  critic->set_parameters(to_vector(values));
  return critic;
}

// ------------------------------------------------------------------ classical

namespace {

std::vector<int> with_ends(int in, const std::vector<int>& hidden, int out) {
  std::vector<int> sizes{in};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(out);
  return sizes;
}

}  // namespace

ClassicalActor::ClassicalActor(int state_dim, ActionScale scale, std::vector<int> hidden, Rng& rng)
    : net_(with_ends(state_dim, hidden, scale.size()), neural::Activation::Tanh, rng), scale_(std::move(scale)) {
  scale_.validate();
}

ClassicalActor::ClassicalActor(neural::DenseNetwork net, ActionScale scale)
    : net_(std::move(net)), scale_(std::move(scale)) {
  scale_.validate();
  require(net_.output_size() == scale_.size(), "classical actor: output size differs from action size");
  require(net_.output_activation() == neural::Activation::Tanh, "classical actor: output must be tanh");
}

Vector ClassicalActor::act(const Vector& state) const {
  return scale_.scale.cwiseProduct(net_.forward(state)) + scale_.bias;
}

Matrix ClassicalActor::act_batch(const Matrix& states) const {
  Matrix y = scale_.scale.asDiagonal() * net_.forward_batch(states);
  y.colwise() += scale_.bias;
  return y;
}

Vector ClassicalActor::parameter_gradient(const Matrix& states, const Matrix& upstream) const {
  neural::DenseNetwork::Tape tape;
  (void)net_.forward_batch(states, tape);
  return net_.backward(tape, scale_.scale.asDiagonal() * upstream).flat();
}

void ClassicalActor::write(std::ostream& out) const {
  const auto old = out.precision(17);
  out << kind() << " v1\n";
  write_scale(out, scale_);
  net_.write(out);
  out.precision(old);
}

std::unique_ptr<ClassicalActor> ClassicalActor::read(std::istream& in) {
  expect_token(in, "v1");
  ActionScale s = read_scale(in);
  return std::make_unique<ClassicalActor>(neural::DenseNetwork::read(in), std::move(s));
}

ClassicalCritic::ClassicalCritic(int state_dim, ActionScale scale, std::vector<int> hidden, Rng& rng)
    : net_(with_ends(state_dim + scale.size(), hidden, 1), neural::Activation::Linear, rng),
      scale_(std::move(scale)), state_dim_(state_dim) {
  scale_.validate();
}

ClassicalCritic::ClassicalCritic(neural::DenseNetwork net, ActionScale scale, int state_dim)
    : net_(std::move(net)), scale_(std::move(scale)), state_dim_(state_dim) {
  scale_.validate();
  require(net_.input_size() == state_dim_ + scale_.size() && net_.output_size() == 1,
          "classical critic: network shape does not match state and action sizes");
}

Matrix ClassicalCritic::inputs(const Matrix& states, const Matrix& actions) const {
  require(states.rows() == state_dim_ && actions.rows() == scale_.size() && states.cols() == actions.cols(),
          "classical critic: input size mismatch");
  Matrix x(state_dim_ + scale_.size(), states.cols());
  x.topRows(state_dim_) = states;
  x.bottomRows(scale_.size()) = scale_.scale.cwiseInverse().asDiagonal() * (actions.colwise() - scale_.bias);
  return x;
}

double ClassicalCritic::value(const Vector& state, const Vector& action) const {
  return values(Matrix(state), Matrix(action))(0);
}

Vector ClassicalCritic::values(const Matrix& states, const Matrix& actions) const {
  return net_.forward_batch(inputs(states, actions)).row(0).transpose();
}

Critic::BatchGradient ClassicalCritic::gradient(const Matrix& states, const Matrix& actions, const Vector& upstream,
                                                bool want_actions) const {
  neural::DenseNetwork::Tape tape;
  BatchGradient out;
  out.values = net_.forward_batch(inputs(states, actions), tape).row(0).transpose();
  if (upstream.size() > 0) {
    require(upstream.size() == states.cols(), "classical critic: upstream size mismatch");
    out.params = net_.backward(tape, upstream.transpose()).flat();
  }
  if (want_actions) {
    const auto g = net_.backward(tape, Matrix::Ones(1, states.cols()));
    out.actions = scale_.scale.cwiseInverse().asDiagonal() * g.input.bottomRows(scale_.size());
  }
  return out;
}

void ClassicalCritic::write(std::ostream& out) const {
  const auto old = out.precision(17);
  out << kind() << " v1\n" << state_dim_ << '\n';
  write_scale(out, scale_);
  net_.write(out);
  out.precision(old);
}

std::unique_ptr<ClassicalCritic> ClassicalCritic::read(std::istream& in) {
  expect_token(in, "v1");
  int state_dim = 0;
  in >> state_dim;
  require(in && state_dim > 0, "checkpoint: bad classical critic header");
  ActionScale s = read_scale(in);
  return std::make_unique<ClassicalCritic>(neural::DenseNetwork::read(in), std::move(s), state_dim);
}

std::unique_ptr<Actor> read_actor(std::istream& in) {
  std::string kind;
  in >> kind;
  if (kind == "quantum-actor") return QuantumActor::read(in);
  if (kind == "classical-actor") return ClassicalActor::read(in);
  throw std::invalid_argument("checkpoint: unknown actor kind '" + kind + "'");
}

std::unique_ptr<Critic> read_critic(std::istream& in) {
  std::string kind;
  in >> kind;
  if (kind == "quantum-critic") return QuantumCritic::read(in);
  if (kind == "classical-critic") return ClassicalCritic::read(in);
  throw std::invalid_argument("checkpoint: unknown critic kind '" + kind + "'");
}

}  // namespace qdsc::agent
