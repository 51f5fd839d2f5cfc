#include <doctest.h>

#include <cmath>
#include <sstream>

#include "qdsc/neural/dense.hpp"
#include "support/finite_difference.hpp"

using namespace qdsc::neural;

namespace {

// Straight-line evaluation with explicit loops, independent of the batched path.
std::vector<double> oracle_forward(const DenseNetwork& net, std::vector<double> x) {
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    const Matrix& w = net.weights(l);
    std::vector<double> y(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      double acc = net.bias(l)(i);
      for (Eigen::Index j = 0; j < w.cols(); ++j) acc += w(i, j) * x[static_cast<std::size_t>(j)];
      const bool last = l + 1 == net.layer_count();
      const Activation a = last ? net.output_activation() : Activation::Tanh;
      if (a == Activation::Tanh) acc = std::tanh(acc);
      if (a == Activation::Sigmoid) acc = 1.0 / (1.0 + std::exp(-acc));
      y[static_cast<std::size_t>(i)] = acc;
    }
    x = std::move(y);
  }
  return x;
}

DenseNetwork random_net(qdsc::Rng& rng, int max_width) {
  std::uniform_int_distribution<int> depth(1, 3), width(1, max_width), act(0, 2);
  std::vector<int> sizes{width(rng)};
  const int hidden = depth(rng);
  for (int i = 0; i < hidden; ++i) sizes.push_back(width(rng));
  sizes.push_back(width(rng) % 4 + 1);
  DenseNetwork net(sizes, static_cast<Activation>(act(rng)), rng);
  // Spread the weights so activations leave the linear regime.
  Vector p = net.parameters();
  net.set_parameters(1.5 * p);
  return net;
}

}  // namespace

TEST_CASE("param_count") {
  // 3968 + 16512 + 16512 + 129
  CHECK(param_count({30, 128, 128, 128, 1}) == 37121);
  CHECK(param_count({1, 1}) == 2);
  CHECK(param_count({3, 4, 2}) == 26);
  qdsc::Rng rng(1);
  CHECK(DenseNetwork({3, 4, 2}, Activation::Linear, rng).parameters().size() == 26);
}

TEST_CASE("construction validates sizes") {
  CHECK_THROWS_AS(DenseNetwork({3}, Activation::Linear), std::invalid_argument);
  CHECK_THROWS_AS(DenseNetwork({3, 0, 1}, Activation::Linear), std::invalid_argument);
}

TEST_CASE("forward: trivial networks") {
  const DenseNetwork zero({3, 5, 2}, Activation::Linear);
  CHECK(zero.forward(Vector(Vector::Ones(3))).norm() == 0.0);

  DenseNetwork id({1, 1, 1}, Activation::Linear);
  id.weights(0)(0, 0) = 1.0;
  id.weights(1)(0, 0) = 1.0;
  for (double x : {-2.0, -0.3, 0.0, 0.8}) CHECK(id.forward(Vector(Vector::Constant(1, x)))(0) == doctest::Approx(std::tanh(x)));
  CHECK_THROWS_AS((void)id.forward(Vector(Vector::Ones(2))), std::invalid_argument);
}

TEST_CASE("forward matches straight-line oracle on random 3-4-2 nets") {
  qdsc::Rng rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (Activation a : {Activation::Linear, Activation::Tanh, Activation::Sigmoid}) {
    const DenseNetwork net({3, 4, 2}, a, rng);
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> x{g(rng), g(rng), g(rng)};
      const Vector y = net.forward(Vector(Eigen::Map<Vector>(x.data(), 3)));
      const auto ref = oracle_forward(net, x);
      for (int i = 0; i < 2; ++i) CHECK(std::abs(y(i) - ref[static_cast<std::size_t>(i)]) < 1e-12);
    }
  }
}

TEST_CASE("batched forward equals per-column forward") {
  qdsc::Rng rng(2);
  const DenseNetwork net({5, 8, 3}, Activation::Tanh, rng);
  const Matrix x = Matrix::Random(5, 7);
  const Matrix y = net.forward_batch(x);
  for (Eigen::Index c = 0; c < 7; ++c) CHECK((y.col(c) - net.forward(Vector(x.col(c)))).norm() < 1e-15);
}

TEST_CASE("backward: closed-form cases") {
  DenseNetwork lin({3, 1}, Activation::Linear);
  lin.weights(0) << 0.5, -1.0, 2.0;
  DenseNetwork::Tape tape;
  const Vector x{{1.0, 2.0, 3.0}};
  (void)lin.forward_batch(Matrix(x), tape);
  auto g = lin.backward(tape, Matrix::Ones(1, 1));
  CHECK((g.weights[0].transpose() - x).norm() == 0.0);
  CHECK(g.biases[0](0) == 1.0);
  CHECK((g.input.col(0) - lin.weights(0).transpose()).norm() == 0.0);

  DenseNetwork chain({1, 1, 1}, Activation::Linear);
  chain.weights(0)(0, 0) = 0.7;
  chain.weights(1)(0, 0) = -1.3;
  (void)chain.forward_batch(Matrix::Zero(1, 1), tape);
  g = chain.backward(tape, Matrix::Ones(1, 1));
  CHECK(g.input(0, 0) == doctest::Approx(0.7 * -1.3));
}

TEST_CASE("backward matches finite differences on 50 random nets") {
  qdsc::Rng rng(2024);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    DenseNetwork net = random_net(rng, 12);
    Vector x(net.input_size()), w(net.output_size());
    for (auto& v : x) v = g(rng);
    for (auto& v : w) v = g(rng);
    // Scalar loss L = w · y.
    DenseNetwork::Tape tape;
    (void)net.forward_batch(Matrix(x), tape);
    const auto grads = net.backward(tape, Matrix(w));
    const Vector analytic = grads.flat();
    const Vector p0 = net.parameters();
    for (Eigen::Index k = 0; k < p0.size(); ++k) {
      const double fd = fd::central(
          [&](double v) {
            Vector p = p0;
            p(k) = v;
            net.set_parameters(p);
            return w.dot(net.forward(x));
          },
          p0(k), 1e-6);
      REQUIRE_MESSAGE(fd::close(analytic(k), fd, 1e-5, 1e-9), "trial " << trial << " param " << k);
    }
    net.set_parameters(p0);
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      const double fd = fd::central(
          [&](double v) {
            Vector xx = x;
            xx(k) = v;
            return w.dot(net.forward(xx));
          },
          x(k), 1e-6);
      REQUIRE(fd::close(grads.input(k, 0), fd, 1e-5, 1e-9));
    }
  }
}

TEST_CASE("batched backward sums parameter gradients over columns") {
  qdsc::Rng rng(8);
  const DenseNetwork net({4, 6, 2}, Activation::Sigmoid, rng);
  const Matrix x = Matrix::Random(4, 5), up = Matrix::Random(2, 5);
  DenseNetwork::Tape tape;
  (void)net.forward_batch(x, tape);
  const auto batched = net.backward(tape, up);
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(net.param_count()));
  for (Eigen::Index c = 0; c < 5; ++c) {
    (void)net.forward_batch(Matrix(x.col(c)), tape);
    const auto one = net.backward(tape, Matrix(up.col(c)));
    sum += one.flat();
    CHECK((one.input.col(0) - batched.input.col(c)).norm() < 1e-14);
  }
  CHECK((sum - batched.flat()).norm() < 1e-12);
}

TEST_CASE("tanh output is bounded") {
  qdsc::Rng rng(4);
  DenseNetwork net({3, 16, 4}, Activation::Tanh, rng);
  net.set_parameters(20.0 * net.parameters());
  const Matrix y = net.forward_batch(Matrix(Matrix::Random(3, 200) * 10.0));
  CHECK(y.cwiseAbs().maxCoeff() <= 1.0);
}

TEST_CASE("initialization is seeded and within ±1/sqrt(fan_in)") {
  qdsc::Rng a(99), b(99);
  const DenseNetwork n1({9, 16, 1}, Activation::Linear, a), n2({9, 16, 1}, Activation::Linear, b);
  CHECK(n1 == n2);
  CHECK(n1.weights(0).cwiseAbs().maxCoeff() <= 1.0 / 3.0);
  CHECK(n1.weights(1).cwiseAbs().maxCoeff() <= 0.25);
  CHECK(n1.bias(1).cwiseAbs().maxCoeff() <= 0.25);
}

TEST_CASE("adam: zero gradient, first step, scalar reference") {
  Adam opt(2);
  Vector p{{1.0, -2.0}};
  opt.step(p, Vector::Zero(2), 0.1);
  CHECK(p(0) == 1.0);
  CHECK(p(1) == -2.0);

  Adam first(3);
  Vector q = Vector::Zero(3);
  first.step(q, Vector{{0.3, -5.0, 1e-3}}, 0.01);
  CHECK(q(0) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(q(1) == doctest::Approx(0.01).epsilon(1e-6));
  CHECK(q(2) == doctest::Approx(-0.01).epsilon(1e-4));

  // Scalar reference with a constant gradient.
  Adam run(1);
  Vector x = Vector::Constant(1, 0.5);
  double m = 0, v = 0, ref = 0.5, prev = 0.5;
  for (int t = 1; t <= 100; ++t) {
    const double grad = 0.2;
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    ref -= 0.003 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    run.step(x, Vector::Constant(1, grad), 0.003);
    REQUIRE(x(0) < prev);
    REQUIRE(x(0) == doctest::Approx(ref).epsilon(1e-14));
    prev = x(0);
  }
  CHECK(run.steps() == 100);
}

TEST_CASE("checkpoint text round trip is exact") {
  qdsc::Rng rng(31);
  const DenseNetwork net({6, 10, 3}, Activation::Sigmoid, rng);
  std::stringstream ss;
  net.write(ss);
  const DenseNetwork back = DenseNetwork::read(ss);
  CHECK(back == net);

  Adam opt(net.param_count());
  Vector p = net.parameters();
  for (int i = 0; i < 3; ++i) opt.step(p, Vector::Random(p.size()), 1e-3);
  std::stringstream so;
  opt.write(so);
  CHECK(Adam::read(so) == opt);

  std::stringstream bad("qdsc-dense-v1\n2 3 1\ntanh\n4 0.1 0.2 oops 0.4\n");
  CHECK_THROWS_AS(DenseNetwork::read(bad), std::invalid_argument);
  std::stringstream wrong("something-else");
  CHECK_THROWS_AS(DenseNetwork::read(wrong), std::invalid_argument);
}
