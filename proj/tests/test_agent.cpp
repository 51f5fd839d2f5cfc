#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "doctest.h"
#include "qdsc/agent/ddpg.hpp"
#include "qdsc/agent/ensemble.hpp"
#include "qdsc/agent/environment.hpp"
#include "support/dense_oracle.hpp"
#include "support/finite_difference.hpp"

using namespace qdsc;
using namespace qdsc::agent;

namespace {

ActionScale make_scale(std::vector<double> a, std::vector<double> b) {
  return {Eigen::Map<Vector>(a.data(), static_cast<Eigen::Index>(a.size())),
          Eigen::Map<Vector>(b.data(), static_cast<Eigen::Index>(b.size()))};
}

QuantumActorConfig small_actor_config(Readout readout = Readout::Grouped) {
  QuantumActorConfig c;
  c.n_qubits = 4;
  c.n_layers = 2;
  c.state_dim = 5;
  c.features = {0, 1, 3};
  c.readout = readout;
  c.scale = make_scale({0.5, 2.0}, {0.1, -1.0});
  return c;
}

QuantumCriticConfig small_critic_config() {
  QuantumCriticConfig c;
  c.n_qubits = 5;
  c.n_layers = 2;
  c.state_dim = 5;
  c.features = {2, 4};
  c.scale = make_scale({0.5, 2.0}, {0.1, -1.0});
  return c;
}

Vector random_vector(Eigen::Index n, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
  Matrix m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) m.col(j) = random_vector(r, rng);
  return m;
}

// Q(s, a) = offset - Σ_k (a_k - target_k)^2, independent of s.
class QuadraticCritic final : public Critic {
 public:
  QuadraticCritic(int state_dim, Vector target, double offset = 0.0, double curvature = 1.0)
      : state_dim_(state_dim), target_(std::move(target)), offset_(offset), curvature_(curvature) {}

  int state_dim() const override { return state_dim_; }
  int action_dim() const override { return static_cast<int>(target_.size()); }
  double value(const Vector&, const Vector& a) const override {
    return offset_ - curvature_ * (a - target_).squaredNorm();
  }
  BatchGradient gradient(const Matrix& s, const Matrix& a, const Vector&, bool want_actions) const override {
    BatchGradient g;
    g.values = values(s, a);
    g.params = Vector::Zero(1);
    if (want_actions) g.actions = -2.0 * curvature_ * (a.colwise() - target_);
    return g;
  }
  Vector parameters() const override { return Vector::Constant(1, offset_); }
  void set_parameters(const Vector& flat) override { offset_ = flat(0); }
  std::unique_ptr<Critic> clone() const override { return std::make_unique<QuadraticCritic>(*this); }
  std::string kind() const override { return "quadratic"; }
  void write(std::ostream&) const override {}

 private:
  int state_dim_;
  Vector target_;
  double offset_, curvature_;
};

std::vector<Transition> random_transitions(int count, int sdim, const ActionScale& scale, Rng& rng) {
  std::vector<Transition> out;
  std::bernoulli_distribution done(0.1);
  for (int i = 0; i < count; ++i) {
    Transition t;
    t.state = random_vector(sdim, rng);
    t.action = scale.clip(scale.bias + scale.scale.cwiseProduct(random_vector(scale.size(), rng)));
    t.reward = random_vector(1, rng)(0);
    t.next_state = random_vector(sdim, rng);
    t.done = done(rng);
    out.push_back(std::move(t));
  }
  return out;
}

Batch as_batch(const std::vector<Transition>& ts) {
  Batch b;
  for (const auto& t : ts) b.push_back(&t);
  return b;
}

std::unique_ptr<DdpgAgent> small_agent(std::uint64_t seed, int batch = 8) {
  Rng rng(seed);
  AgentConfig cfg;
  cfg.batch_size = batch;
  cfg.warmup = batch;
  cfg.replay_capacity = 100;
  return std::make_unique<DdpgAgent>(std::make_unique<QuantumActor>(small_actor_config(), rng),
                                     std::make_unique<QuantumCritic>(small_critic_config(), rng), cfg, seed);
}

}  // namespace

// ------------------------------------------------------------------ reward

TEST_CASE("tis label switches exactly past a full turn") {
  for (int k = 0; k <= 1440; ++k) {
    const double d = 0.5 * k;
    CHECK(tis_label(d) == (d > 360.0 ? 1 : 0));
  }
  CHECK(tis_label(360.0) == 0);
  CHECK(tis_label(std::nextafter(360.0, 1e9)) == 1);
}

TEST_CASE("ensemble statistics") {
  const std::vector<double> y{0.2, 0.4, 0.6};
  const auto p = ensemble_predict(y);
  CHECK(p.tis_hat == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(p.sigma == doctest::Approx(0.16329932).epsilon(1e-7));
  CHECK(p.confidence == doctest::Approx(0.83670068).epsilon(1e-7));

  const std::vector<double> wild{-0.5, 1.5};
  const auto q = ensemble_predict(wild);
  CHECK(q.tis_hat == doctest::Approx(0.5));
  CHECK(q.sigma == doctest::Approx(0.5));

  const std::vector<double> one{0.3};
  CHECK_THROWS_AS((void)ensemble_predict(one), std::invalid_argument);
}

TEST_CASE("augmented state round trip") {
  Rng rng(3);
  const Vector obs = random_vector(12, rng);
  const auto aug = augment_state(obs, {0.25, 0.1, 0.9});
  REQUIRE(aug.size() == 14);
  CHECK(aug(12) == 0.25);
  CHECK(aug(13) == 0.9);
  const auto [back, p] = split_augmented(aug);
  CHECK(back == obs);
  CHECK(p.tis_hat == 0.25);
  CHECK(p.confidence == 0.9);
  CHECK(p.sigma == doctest::Approx(0.1));
}

TEST_CASE("reward terms") {
  const RewardWeights w;
  const std::vector<double> zero(6, 0.0);
  StepSignals s;

  s.omega_dev = 0.1;
  CHECK(reward_base(s, zero, zero, w) == doctest::Approx(-1.0));
  s = {};
  s.rocof = 1.0;
  CHECK(reward_base(s, zero, zero, w) == doctest::Approx(-0.1));
  s = {};
  s.metrics.delta_max_deg = 130.0;
  s.metrics.delta_coi_deg = 30.0;
  CHECK(reward_base(s, zero, zero, w) == doctest::Approx(-1.0));
  s = {};
  const std::vector<double> a{1, 0, 0, 0, 2, 0};
  CHECK(reward_base(s, a, zero, w) == doctest::Approx(-0.001 - 0.004));

  CHECK(reward_pred({0.05, 0.0, 1.0}, w) == doctest::Approx(-90.25));
  CHECK(reward_pred({0.05, 0.1, 0.9}, w) == doctest::Approx(10.0));
  CHECK(reward_pred({0.5, 0.0, 1.0}, w) == doctest::Approx(10.0));
  CHECK(reward_pred({0.0, 0.0, 1.0}, w) == doctest::Approx(-100.0));
  CHECK(reward_pred({0.95, 0.0, 1.0}, w) == doctest::Approx(10.0));
  CHECK(reward_pred({0.05, 0.0, 0.95}, w) == doctest::Approx(-90.25));

  // Inverted condition penalises confident instability instead.
  CHECK(reward_pred({0.0, 0.0, 1.0}, w, true) == doctest::Approx(10.0));
  CHECK(reward_pred({0.95, 0.0, 1.0}, w, true) == doctest::Approx(-0.25));
  CHECK(reward_pred({1.0, 0.0, 1.0}, w, true) == doctest::Approx(0.0));

  CHECK_THROWS_AS((void)reward_base(s, std::vector<double>(5), std::vector<double>(5), w), std::invalid_argument);
}

TEST_CASE("base reward is never positive") {
  Rng rng(11);
  const RewardWeights w;
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  for (int i = 0; i < 1000; ++i) {
    StepSignals s;
    s.omega_dev = u(rng) / 100;
    s.rocof = u(rng);
    s.metrics.delta_max_deg = std::abs(u(rng));
    s.metrics.delta_coi_deg = u(rng);
    const Vector a = random_vector(6, rng), b = random_vector(6, rng);
    CHECK(reward_base(s, std::span<const double>(a.data(), 6), std::span<const double>(b.data(), 6), w) <= 0.0);
  }
}

TEST_CASE("reward weight validation") {
  RewardWeights w;
  w.xi1 = -1;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
  w = {};
  w.eta = 1.0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
}

// ------------------------------------------------------------------ replay

TEST_CASE("replay ring overwrites the oldest entry") {
  ReplayBuffer buf(3, 1);
  for (int i = 0; i < 5; ++i) buf.add({Vector::Constant(1, i), Vector::Zero(1), double(i), Vector::Zero(1), false});
  REQUIRE(buf.size() == 3);
  std::set<double> rewards;
  for (std::size_t i = 0; i < buf.size(); ++i) rewards.insert(buf.at(i).reward);
  CHECK(rewards == std::set<double>{2, 3, 4});
  CHECK_THROWS_AS(buf.add({Vector::Zero(1), Vector::Zero(1), NAN, Vector::Zero(1), false}), std::invalid_argument);
  CHECK_THROWS_AS((void)buf.sample_indices(4), std::invalid_argument);
}

TEST_CASE("replay sampling is uniform and distinct within a batch") {
  ReplayBuffer buf(100, 7);
  for (int i = 0; i < 100; ++i) buf.add({Vector::Zero(1), Vector::Zero(1), double(i), Vector::Zero(1), false});
  std::vector<int> counts(100, 0);
  const int batches = 10000, batch = 10;
  for (int k = 0; k < batches; ++k) {
    const auto idx = buf.sample_indices(batch);
    REQUIRE(std::set<std::size_t>(idx.begin(), idx.end()).size() == idx.size());
    for (auto i : idx) ++counts[i];
  }
  const double expected = double(batches) * batch / 100.0;
  const double sd = std::sqrt(expected * 0.99);
  double chi2 = 0.0;
  for (int c : counts) {
    CHECK(std::abs(c - expected) < 5 * sd);
    chi2 += (c - expected) * (c - expected) / expected;
  }
  // 99 degrees of freedom: mean 99, sd 14.
  CHECK(chi2 < 99 + 4 * 14.07);
}

// --------------------------------------------------------------- DDPG core

TEST_CASE("critic target") {
  Rng rng(2);
  const auto cfg = small_actor_config();
  QuantumActor actor(cfg, rng);
  QuantumCritic critic(small_critic_config(), rng);
  critic.set_output(0.0, 2.0);

  Transition t{Vector::Zero(5), Vector::Constant(2, 0.1), 1.0, Vector::Zero(5), false};
  const std::vector<Transition> one{t};
  CHECK(critic_target(as_batch(one), actor, critic, 0.99)(0) == doctest::Approx(2.98));
  CHECK(critic_target(as_batch(one), actor, critic, 0.0)(0) == doctest::Approx(1.0));
  t.done = true;
  const std::vector<Transition> term{t};
  CHECK(critic_target(as_batch(term), actor, critic, 0.99)(0) == doctest::Approx(1.0));
}

TEST_CASE("soft update") {
  Vector target = Vector::Zero(3);
  const Vector online = Vector::Ones(3);
  soft_update(target, online, 0.005);
  CHECK(target(0) == doctest::Approx(0.005));
  Vector copy = Vector::Constant(3, -4.0);
  soft_update(copy, online, 1.0);
  CHECK(copy == online);

  Vector t = Vector::Zero(1);
  for (int k = 1; k <= 1000; ++k) {
    soft_update(t, Vector::Ones(1), 0.005);
    if (k % 100 == 0) CHECK(1.0 - t(0) == doctest::Approx(std::pow(0.995, k)).epsilon(1e-10));
  }

  Rng rng(4);
  QuantumActor a(small_actor_config(), rng), b(small_actor_config(), rng);
  const Vector before = b.parameters();
  soft_update(b, a, 0.25);
  CHECK((b.parameters() - (0.25 * a.parameters() + 0.75 * before)).norm() < 1e-14);
  CHECK_THROWS_AS(soft_update(t, Vector::Ones(2), 0.1), std::invalid_argument);
}

// ---------------------------------------------------------- approximators

TEST_CASE("quantum actor with zero parameters") {
  const auto cfg = small_actor_config();
  Rng rng(1);
  QuantumActor seed(cfg, rng);
  QuantumActor actor(cfg, quantum::ParameterSet(seed.layout()));
  const Vector a = actor.act(random_vector(5, rng));
  CHECK(a(0) == doctest::Approx(0.5 * std::tanh(1.0) + 0.1));
  CHECK(a(1) == doctest::Approx(2.0 * std::tanh(1.0) - 1.0));

  QuantumActor shared(small_actor_config(Readout::SharedSum), quantum::ParameterSet(seed.layout()));
  CHECK(shared.act(Vector::Zero(5))(1) == doctest::Approx(2.0 * std::tanh(1.0) - 1.0));
}

TEST_CASE("quantum actor outputs stay inside the bounds") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    QuantumActor actor(small_actor_config(trial % 2 ? Readout::SharedSum : Readout::Grouped), rng);
    const Vector a = actor.act(random_vector(5, rng, -3, 3));
    const auto& s = actor.scale();
    CHECK(((a - s.bias).cwiseAbs().array() <= s.scale.array()).all());
  }
}

TEST_CASE("quantum actor matches the dense-matrix pipeline") {
  Rng rng(6);
  QuantumActor actor(small_actor_config(), rng);
  const Vector s = random_vector(5, rng);
  const auto x = actor.encode(s);
  REQUIRE(x == std::vector<double>{s(0), s(1), s(3)});
  const oracle::Vec psi = oracle::ansatz_unitary(actor.layout(), actor.params(), x) * oracle::zero_state(4);
  std::vector<double> z;
  for (int q = 0; q < 4; ++q) z.push_back(oracle::expect(psi, oracle::embed(oracle::pauli_z(), q, 4)));
  const double a0 = 0.5 * std::tanh((z[0] + z[1]) / 2) + 0.1;
  const double a1 = 2.0 * std::tanh((z[2] + z[3]) / 2) - 1.0;
  const Vector a = actor.act(s);
  CHECK(a(0) == doctest::Approx(a0).epsilon(1e-12));
  CHECK(a(1) == doctest::Approx(a1).epsilon(1e-12));
}

TEST_CASE("quantum critic read-out") {
  Rng rng(7);
  QuantumCritic critic(small_critic_config(), rng);
  const Vector s = random_vector(5, rng);
  const Vector a = Vector{{0.3, -2.5}};
  const auto x = critic.encode(s, a);
  REQUIRE(x.size() == 4);
  CHECK(x[2] == doctest::Approx(0.4));
  CHECK(x[3] == doctest::Approx(-0.75));
  const oracle::Vec psi = oracle::ansatz_unitary(critic.layout(), critic.params(), x) * oracle::zero_state(5);
  const double ex = oracle::expect(psi, oracle::embed(oracle::pauli_x(), 0, 5));

  CHECK(critic.w_out() == 1.0);
  CHECK(critic.b_out() == 0.0);
  critic.set_output(0.0, -3.5);
  CHECK(critic.value(s, a) == doctest::Approx(-3.5));
  critic.set_output(2.0, 0.5);
  CHECK(critic.value(s, a) == doctest::Approx(2.0 * ex + 0.5).epsilon(1e-12));
}

TEST_CASE("critic gradients match finite differences") {
  Rng rng(8);
  const auto scale = small_critic_config().scale;
  std::vector<std::unique_ptr<Critic>> critics;
  critics.push_back(std::make_unique<QuantumCritic>(small_critic_config(), rng));
  critics.push_back(std::make_unique<ClassicalCritic>(5, scale, std::vector<int>{7, 6}, rng));
  for (auto& critic : critics) {
    CAPTURE(critic->kind());
    const Matrix s = random_matrix(5, 3, rng);
    const Matrix a = random_matrix(2, 3, rng);
    const Vector up = random_vector(3, rng);
    const auto g = critic->gradient(s, a, up, true);
    CHECK((g.values - critic->values(s, a)).norm() < 1e-12);

    const Vector p0 = critic->parameters();
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < p0.size(); k += std::max<Eigen::Index>(1, p0.size() / 25)) {
      auto f = [&](double v) {
        Vector p = p0;
        p(k) = v;
        critic->set_parameters(p);
        return up.dot(critic->values(s, a));
      };
      CHECK(fd::close(g.params(k), fd::central(f, p0(k), h), 1e-5, 1e-7));
    }
    critic->set_parameters(p0);

    for (Eigen::Index b = 0; b < 3; ++b) {
      for (Eigen::Index j = 0; j < 2; ++j) {
        auto f = [&](double v) {
          Vector act = a.col(b);
          act(j) = v;
          return critic->value(s.col(b), act);
        };
        CHECK(fd::close(g.actions(j, b), fd::central(f, a(j, b), h), 1e-5, 1e-7));
      }
    }
  }
}

TEST_CASE("actor gradients match finite differences") {
  Rng rng(9);
  std::vector<std::unique_ptr<Actor>> actors;
  actors.push_back(std::make_unique<QuantumActor>(small_actor_config(), rng));
  actors.push_back(std::make_unique<QuantumActor>(small_actor_config(Readout::SharedSum), rng));
  actors.push_back(std::make_unique<ClassicalActor>(5, small_actor_config().scale, std::vector<int>{6, 4}, rng));
  for (auto& actor : actors) {
    CAPTURE(actor->kind());
    const Matrix s = random_matrix(5, 3, rng);
    const Matrix up = random_matrix(2, 3, rng);
    const Vector g = actor->parameter_gradient(s, up);
    const Vector p0 = actor->parameters();
    for (Eigen::Index k = 0; k < p0.size(); k += std::max<Eigen::Index>(1, p0.size() / 25)) {
      auto f = [&](double v) {
        Vector p = p0;
        p(k) = v;
        actor->set_parameters(p);
        return (up.array() * actor->act_batch(s).array()).sum();
      };
      CHECK(fd::close(g(k), fd::central(f, p0(k), 1e-6), 1e-5, 1e-7));
    }
    actor->set_parameters(p0);
  }
}

TEST_CASE("actor update climbs a quadratic critic") {
  for (const bool quantum : {true, false}) {
    CAPTURE(quantum);
    Rng rng(10);
    auto cfg = small_actor_config();
    cfg.scale = make_scale({1.0}, {0.0});
    cfg.features = {0};
    cfg.state_dim = 1;
    std::unique_ptr<Actor> actor;
    if (quantum) {
      actor = std::make_unique<QuantumActor>(cfg, rng);
    } else {
      actor = std::make_unique<ClassicalActor>(1, cfg.scale, std::vector<int>{8}, rng);
    }
    const QuadraticCritic critic(1, Vector::Constant(1, 0.3));
    const std::vector<Transition> data{{Vector::Constant(1, 0.5), Vector::Zero(1), 0.0, Vector::Zero(1), false}};
    neural::Adam opt(actor->param_count());
    int steps = 0;
    while (std::abs(actor->act(data[0].state)(0) - 0.3) >= 1e-3 && steps < 5000) {
      update_actor(as_batch(data), *actor, critic, opt, 1e-2);
      ++steps;
    }
    CHECK(steps < 5000);
    CHECK(std::abs(actor->act(data[0].state)(0) - 0.3) < 1e-3);
  }
}

TEST_CASE("actor update ignores action-independent critic terms") {
  Rng rng(12);
  const std::vector<Transition> data = random_transitions(4, 5, small_actor_config().scale, rng);
  QuantumActor base(small_actor_config(), rng);

  QuantumActor flat = base;
  neural::Adam opt(flat.param_count());
  update_actor(as_batch(data), flat, QuadraticCritic(5, Vector::Zero(2), 4.0, 0.0), opt, 1e-2);
  CHECK(flat.parameters() == base.parameters());

  QuantumActor a = base, b = base;
  neural::Adam oa(a.param_count()), ob(b.param_count());
  const Vector target{{0.2, -0.7}};
  update_actor(as_batch(data), a, QuadraticCritic(5, target, 0.0), oa, 1e-2);
  update_actor(as_batch(data), b, QuadraticCritic(5, target, 123.0), ob, 1e-2);
  CHECK(a.parameters() == b.parameters());
}

TEST_CASE("critic update reduces the loss on a fixed batch") {
  Rng rng(13);
  QuantumCritic critic(small_critic_config(), rng);
  const auto data = random_transitions(16, 5, small_critic_config().scale, rng);
  const Vector y = Vector::Constant(16, 0.3);
  neural::Adam opt(critic.param_count());
  const double first = update_critic(as_batch(data), critic, y, opt, 1e-2);
  double last = first;
  for (int k = 0; k < 50; ++k) last = update_critic(as_batch(data), critic, y, opt, 1e-2);
  CHECK(last < first);
}

TEST_CASE("exploration is seeded and bounded") {
  Rng r0(14);
  QuantumActor actor(small_actor_config(), r0);
  const Vector s = random_vector(5, r0);
  Rng a(99), b(99);
  for (int k = 0; k < 50; ++k) {
    const Vector x = select_action(actor, s, 3.0, a);
    CHECK(x == select_action(actor, s, 3.0, b));
    CHECK(x == actor.scale().clip(x));
  }
  Rng c(1);
  CHECK(select_action(actor, s, 0.0, c) == actor.act(s));
}

TEST_CASE("agent updates are deterministic and checkpoints round-trip exactly") {
  Rng rng(15);
  const auto data = random_transitions(30, 5, small_actor_config().scale, rng);
  auto a = small_agent(42), b = small_agent(42);
  for (const auto& t : data) {
    a->observe(t);
    b->observe(t);
  }
  a->end_episode();
  b->end_episode();
  CHECK(a->actor().parameters() == b->actor().parameters());
  CHECK(a->critic().parameters() == b->critic().parameters());
  CHECK(a->actor().parameters() != a->target_actor().parameters());

  std::stringstream first;
  a->save(first, "abc123");
  const std::string text = first.str();

  auto c = small_agent(7);
  std::stringstream in(text);
  c->load(in, "abc123");
  std::stringstream second;
  c->save(second, "abc123");
  CHECK(second.str() == text);
  CHECK(c->actor().parameters() == a->actor().parameters());
  CHECK(c->target_critic().parameters() == a->target_critic().parameters());
  CHECK(c->noise_fraction() == a->noise_fraction());

  std::stringstream hash_only(text);
  CHECK(checkpoint_hash(hash_only) == "abc123");
  std::stringstream wrong(text);
  CHECK_THROWS_AS(c->load(wrong, "other"), std::invalid_argument);
  std::stringstream garbage("not a checkpoint");
  CHECK_THROWS_AS(c->load(garbage, ""), std::invalid_argument);
}

TEST_CASE("agent configuration validation") {
  AgentConfig c;
  c.gamma = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.warmup = 10;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

// ------------------------------------------------------------- environment

TEST_CASE("lookahead oracle") {
  grid::GridSimulation sim(grid::three_machine_fixture());
  sim.reset();
  CHECK(lookahead_oracle(sim, 0.15).tis_hat == 0.0);
  CHECK(lookahead_oracle(sim, 0.15).confidence == 1.0);
  while (!sim.cleared()) sim.advance_control_step();
  const double t = sim.state().t;
  // Left alone the fixture separates by a full turn about 0.85 s after clearing.
  CHECK(lookahead_oracle(sim, 0.15).tis_hat == 0.0);
  CHECK(lookahead_oracle(sim, 1.5).tis_hat == 1.0);
  CHECK(sim.state().t == t);
  CHECK_THROWS_AS((void)lookahead_oracle(sim, -1.0), std::invalid_argument);
}

TEST_CASE("environment episode structure") {
  EnvironmentConfig cfg;
  cfg.max_steps = 20;
  cfg.terminate_on_violation = false;
  DscEnvironment env(grid::three_machine_fixture(), cfg);
  REQUIRE(env.state_dim() == 14);
  REQUIRE(env.action_dim() == 6);
  Trajectory traj;
  const Vector s = env.reset(&traj);
  CHECK(s.size() == 14);
  CHECK(env.simulation().cleared());
  CHECK(env.simulation().state().t == doctest::Approx(2.30));
  CHECK(traj.size() == 231);

  const auto stats = run_episode(env, [](const Vector&) { return Vector::Zero(6); }, {}, &traj);
  CHECK(stats.steps == 20);
  CHECK(stats.clip_events == 0);
  CHECK(stats.final_delta_max > 360.0);
  CHECK(env.simulation().finished());
  CHECK(traj.size() == 501);
  CHECK(traj.back().t == doctest::Approx(5.0));
  CHECK(traj[100].delta_deg.size() == 3);
}

TEST_CASE("environment step reward and termination") {
  EnvironmentConfig cfg;
  cfg.max_steps = 5;
  DscEnvironment env(grid::three_machine_fixture(), cfg);
  env.reset();
  Vector big = Vector::Zero(6);
  big(0) = 100.0;  // far beyond the ramp limit
  const auto r = env.step(big);
  CHECK(r.clip_events == 1);
  CHECK(r.reward == doctest::Approx(r.reward_base + r.reward_pred - (r.terminal ? 100.0 : 0.0)));
  CHECK(r.reward_base <= 0.0);
  CHECK_THROWS_AS((void)env.step(Vector::Zero(3)), std::invalid_argument);

  int n = 1;
  StepResult last = r;
  while (!last.done()) {
    last = env.step(Vector::Zero(6));
    ++n;
  }
  CHECK(n <= 5);
  if (!last.terminal) CHECK(last.truncated);
  CHECK_THROWS_AS((void)env.step(Vector::Zero(6)), std::logic_error);
}

TEST_CASE("violations terminate with the safety penalty") {
  auto sc = grid::three_machine_fixture();
  sc.limits.omega_max_dev = 1e-6;
  EnvironmentConfig cfg;
  DscEnvironment env(sc, cfg);
  env.reset();
  const auto r = env.step(Vector::Zero(6));
  CHECK(r.violated);
  CHECK(r.terminal);
  CHECK(r.reward == doctest::Approx(r.reward_base + r.reward_pred - 100.0));
  CHECK(env.monitor().violated());
}

// ---------------------------------------------------------------- ensemble

TEST_CASE("ensemble learns a separable rule and round-trips") {
  Rng rng(16);
  TisDataset data;
  data.features = random_matrix(4, 400, rng);
  data.labels.resize(400);
  for (Eigen::Index i = 0; i < 400; ++i) data.labels(i) = data.features(0, i) + data.features(2, i) > 0.2 ? 1.0 : 0.0;
  EnsembleConfig cfg;
  cfg.hidden = {16, 16};
  cfg.epochs = 150;
  cfg.batch_size = 32;
  cfg.learning_rate = 5e-3;
  TisEnsemble ens(4, cfg, rng);
  REQUIRE(ens.members().size() == 5);
  ens.train(data, cfg, rng);
  CHECK(ens.accuracy(data) > 0.95);

  const auto p = ens.predict(Vector{{0.9, 0.0, 0.9, 0.0}});
  CHECK(p.tis_hat > 0.8);
  CHECK(p.confidence == doctest::Approx(1.0 - p.sigma));

  std::stringstream ss;
  ens.write(ss);
  const auto back = TisEnsemble::read(ss);
  CHECK(back.predict(Vector{{0.1, 0.2, 0.3, 0.4}}).tis_hat == ens.predict(Vector{{0.1, 0.2, 0.3, 0.4}}).tis_hat);

  EnsembleConfig bad;
  bad.members = 1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
