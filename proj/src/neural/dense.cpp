#include "qdsc/neural/dense.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace qdsc::neural {

namespace {

constexpr const char* kNetworkHeader = "qdsc-dense-v1";
constexpr const char* kAdamHeader = "qdsc-adam-v1";

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

Matrix activate(const Matrix& z, Activation a) {
  switch (a) {
    case Activation::Linear:
      return z;
    case Activation::Tanh:
      return z.array().tanh().matrix();
    case Activation::Sigmoid:
      return (1.0 / (1.0 + (-z.array()).exp())).matrix();
  }
  return z;
}

// Derivative expressed through the activation's output y.
Matrix activation_slope(const Matrix& y, Activation a) {
  switch (a) {
    case Activation::Linear:
      return Matrix::Ones(y.rows(), y.cols());
    case Activation::Tanh:
      return (1.0 - y.array().square()).matrix();
    case Activation::Sigmoid:
      return (y.array() * (1.0 - y.array())).matrix();
  }
  return y;
}

void read_token(std::istream& in, const std::string& expected) {
  std::string tok;
  in >> tok;
  require(in && tok == expected, "checkpoint: expected '" + expected + "', found '" + tok + "'");
}

double read_double(std::istream& in) {
  std::string tok;
  in >> tok;
  require(static_cast<bool>(in), "checkpoint: truncated parameter list");
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  require(pos == tok.size() && pos > 0, "checkpoint: bad number '" + tok + "'");
  return v;
}

void write_vector(std::ostream& out, const Vector& v) {
  out << v.size();
  for (double x : v) out << ' ' << x;
  out << '\n';
}

Vector read_vector(std::istream& in) {
  long n = -1;
  in >> n;
  require(in && n >= 0, "checkpoint: bad vector length");
  Vector v(n);
  for (long i = 0; i < n; ++i) v(i) = read_double(in);
  return v;
}

}  // namespace

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Linear:
      return "linear";
    case Activation::Tanh:
      return "tanh";
    case Activation::Sigmoid:
      return "sigmoid";
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "linear") return Activation::Linear;
  if (name == "tanh") return Activation::Tanh;
  if (name == "sigmoid") return Activation::Sigmoid;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::size_t param_count(const std::vector<int>& layer_sizes) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    const auto in = static_cast<std::size_t>(layer_sizes[i]);
    const auto out = static_cast<std::size_t>(layer_sizes[i + 1]);
    n += in * out + out;
  }
  return n;
}

DenseNetwork::DenseNetwork(std::vector<int> layer_sizes, Activation output)
    : sizes_(std::move(layer_sizes)), output_(output) {
  require(sizes_.size() >= 2, "network: need at least input and output sizes");
  for (int s : sizes_) require(s >= 1, "network: layer sizes must be positive");
  for (std::size_t i = 0; i + 1 < sizes_.size(); ++i) {
    weights_.push_back(Matrix::Zero(sizes_[i + 1], sizes_[i]));
    biases_.push_back(Vector::Zero(sizes_[i + 1]));
  }
}

DenseNetwork::DenseNetwork(std::vector<int> layer_sizes, Activation output, Rng& rng)
    : DenseNetwork(std::move(layer_sizes), output) {
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    const double r = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    std::uniform_real_distribution<double> u(-r, r);
    for (Eigen::Index i = 0; i < weights_[l].rows(); ++i)
      for (Eigen::Index j = 0; j < weights_[l].cols(); ++j) weights_[l](i, j) = u(rng);
    for (auto& b : biases_[l]) b = u(rng);
  }
}

std::size_t DenseNetwork::param_count() const { return neural::param_count(sizes_); }

Vector DenseNetwork::forward(const Vector& x) const { return forward_batch(Matrix(x)).col(0); }

Matrix DenseNetwork::forward_batch(const Matrix& x) const {
  Tape tape;
  return forward_batch(x, tape);
}

Matrix DenseNetwork::forward_batch(const Matrix& x, Tape& tape) const {
  require(x.rows() == sizes_.front(), "network: input has " + std::to_string(x.rows()) + " rows, expected " +
                                          std::to_string(sizes_.front()));
  tape.outputs.clear();
  tape.outputs.reserve(weights_.size() + 1);
  tape.outputs.push_back(x);
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix z = weights_[l] * tape.outputs.back();
    z.colwise() += biases_[l];
    const bool last = l + 1 == weights_.size();
    tape.outputs.push_back(activate(z, last ? output_ : Activation::Tanh));
  }
  return tape.outputs.back();
}

DenseNetwork::Gradients DenseNetwork::backward(const Tape& tape, const Matrix& upstream) const {
  require(tape.outputs.size() == weights_.size() + 1, "network: tape does not match this network");
  require(upstream.rows() == sizes_.back() && upstream.cols() == tape.outputs.back().cols(),
          "network: upstream gradient shape mismatch");
  Gradients g;
  g.weights.resize(weights_.size());
  g.biases.resize(weights_.size());
  Matrix delta = upstream;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    const bool last = l + 1 == weights_.size();
    delta = delta.cwiseProduct(activation_slope(tape.outputs[l + 1], last ? output_ : Activation::Tanh));
    g.weights[l] = delta * tape.outputs[l].transpose();
    g.biases[l] = delta.rowwise().sum();
    delta = weights_[l].transpose() * delta;
  }
  g.input = std::move(delta);
  return g;
}

Vector DenseNetwork::Gradients::flat() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  Vector out(n);
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    for (Eigen::Index i = 0; i < weights[l].rows(); ++i)
      for (Eigen::Index j = 0; j < weights[l].cols(); ++j) out(k++) = weights[l](i, j);
    out.segment(k, biases[l].size()) = biases[l];
    k += biases[l].size();
  }
  return out;
}

Vector DenseNetwork::parameters() const {
  Gradients view;
  view.weights = weights_;
  view.biases = biases_;
  return view.flat();
}

void DenseNetwork::set_parameters(const Vector& flat) {
  require(static_cast<std::size_t>(flat.size()) == param_count(), "network: flat parameter size mismatch");
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    for (Eigen::Index i = 0; i < weights_[l].rows(); ++i)
      for (Eigen::Index j = 0; j < weights_[l].cols(); ++j) weights_[l](i, j) = flat(k++);
    biases_[l] = flat.segment(k, biases_[l].size());
    k += biases_[l].size();
  }
}

void DenseNetwork::write(std::ostream& out) const {
  const auto old = out.precision(17);
  out << kNetworkHeader << '\n' << sizes_.size();
  for (int s : sizes_) out << ' ' << s;
  out << '\n' << to_string(output_) << '\n';
  write_vector(out, parameters());
  out.precision(old);
}

DenseNetwork DenseNetwork::read(std::istream& in) {
  read_token(in, kNetworkHeader);
  std::size_t n = 0;
  in >> n;
  require(in && n >= 2 && n < 1000, "checkpoint: bad layer count");
  std::vector<int> sizes(n);
  for (auto& s : sizes) in >> s;
  require(static_cast<bool>(in), "checkpoint: truncated layer sizes");
  std::string act;
  in >> act;
  DenseNetwork net(std::move(sizes), activation_from_string(act));
  net.set_parameters(read_vector(in));
  return net;
}

bool DenseNetwork::operator==(const DenseNetwork& other) const {
  return sizes_ == other.sizes_ && output_ == other.output_ && parameters() == other.parameters();
}

Adam::Adam(std::size_t size, double beta1, double beta2, double epsilon)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon),
      m_(Vector::Zero(static_cast<Eigen::Index>(size))),
      v_(Vector::Zero(static_cast<Eigen::Index>(size))) {}

void Adam::step(Vector& params, const Vector& grad, double step_size) {
  require(params.size() == m_.size() && grad.size() == m_.size(), "adam: size mismatch");
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= step_size * (m_.array() / c1) / ((v_.array() / c2).sqrt() + epsilon_);
}

void Adam::write(std::ostream& out) const {
  const auto old = out.precision(17);
  out << kAdamHeader << '\n' << beta1_ << ' ' << beta2_ << ' ' << epsilon_ << ' ' << t_ << '\n';
  write_vector(out, m_);
  write_vector(out, v_);
  out.precision(old);
}

Adam Adam::read(std::istream& in) {
  read_token(in, kAdamHeader);
  Adam a;
  a.beta1_ = read_double(in);
  a.beta2_ = read_double(in);
  a.epsilon_ = read_double(in);
  in >> a.t_;
  require(in && a.t_ >= 0, "checkpoint: bad adam step count");
  a.m_ = read_vector(in);
  a.v_ = read_vector(in);
  require(a.m_.size() == a.v_.size(), "checkpoint: adam moment sizes differ");
  return a;
}

}  // namespace qdsc::neural
