#include "qdsc/agent/ddpg.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace qdsc::agent {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

struct Stacked {
  Matrix states, actions, next_states;
  Vector rewards;
  std::vector<bool> done;
};

Stacked stack(const Batch& batch) {
  require(!batch.empty(), "empty batch");
  const auto b = static_cast<Eigen::Index>(batch.size());
  Stacked s;
  s.states.resize(batch.front()->state.size(), b);
  s.actions.resize(batch.front()->action.size(), b);
  s.next_states.resize(batch.front()->next_state.size(), b);
  s.rewards.resize(b);
  for (Eigen::Index i = 0; i < b; ++i) {
    const Transition& t = *batch[static_cast<std::size_t>(i)];
    s.states.col(i) = t.state;
    s.actions.col(i) = t.action;
    s.next_states.col(i) = t.next_state;
    s.rewards(i) = t.reward;
    s.done.push_back(t.done);
  }
  return s;
}

}  // namespace

void AgentConfig::validate() const {
  require(gamma >= 0.0 && gamma < 1.0, "agent: gamma must lie in [0, 1)");
  require(tau > 0.0 && tau <= 1.0, "agent: tau must lie in (0, 1]");
  require(batch_size >= 1, "agent: batch_size must be positive");
  require(actor_lr >= 0.0 && critic_lr >= 0.0, "agent: step sizes must be non-negative");
  require(noise_scale >= 0.0 && noise_decay > 0.0 && noise_decay <= 1.0, "agent: bad exploration noise settings");
  require(episode_max_steps >= 1, "agent: episode_max_steps must be positive");
  require(replay_capacity >= static_cast<std::size_t>(batch_size), "agent: replay capacity below batch size");
  require(warmup >= batch_size, "agent: warmup must be at least the batch size");
  require(update_every >= 1, "agent: update_every must be positive");
  require(reward_scale > 0.0 && std::isfinite(reward_scale), "agent: reward_scale must be positive");
}

Vector critic_target(const Batch& batch, const Actor& target_actor, const Critic& target_critic, double gamma) {
  const Stacked s = stack(batch);
  const Vector q = gamma == 0.0 ? Vector::Zero(s.rewards.size())
                                : target_critic.values(s.next_states, target_actor.act_batch(s.next_states));
  Vector y = s.rewards;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!s.done[static_cast<std::size_t>(i)]) y(i) += gamma * q(i);
  }
  return y;
}

double update_critic(const Batch& batch, Critic& critic, const Vector& y, neural::Adam& opt, double step_size) {
  const Stacked s = stack(batch);
  require(y.size() == s.rewards.size(), "update_critic: target size mismatch");
  const Vector q = critic.values(s.states, s.actions);
  const double n = static_cast<double>(y.size());
  const Vector upstream = 2.0 * (q - y) / n;
  const auto g = critic.gradient(s.states, s.actions, upstream, false);
  Vector p = critic.parameters();
  opt.step(p, g.params, step_size);
  critic.set_parameters(p);
  return (q - y).squaredNorm() / n;
}

double update_actor(const Batch& batch, Actor& actor, const Critic& critic, neural::Adam& opt, double step_size) {
  const Stacked s = stack(batch);
  const Matrix mu = actor.act_batch(s.states);
  const auto qg = critic.gradient(s.states, mu, Vector(), true);
  const double n = static_cast<double>(s.states.cols());
  // Minimize -mean Q.
  const Vector grad = actor.parameter_gradient(s.states, -qg.actions / n);
  Vector p = actor.parameters();
  opt.step(p, grad, step_size);
  actor.set_parameters(p);
  return qg.values.mean();
}

void soft_update(Vector& target, const Vector& online, double tau) {
  require(target.size() == online.size(), "soft_update: size mismatch");
  target = tau * online + (1.0 - tau) * target;
}

void soft_update(Actor& target, const Actor& online, double tau) {
  Vector t = target.parameters();
  soft_update(t, online.parameters(), tau);
  target.set_parameters(t);
}

void soft_update(Critic& target, const Critic& online, double tau) {
  Vector t = target.parameters();
  soft_update(t, online.parameters(), tau);
  target.set_parameters(t);
}

Vector select_action(const Actor& actor, const Vector& state, double noise_std_fraction, Rng& rng) {
  Vector a = actor.act(state);
  if (noise_std_fraction > 0.0) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (Eigen::Index i = 0; i < a.size(); ++i) a(i) += noise_std_fraction * actor.scale().scale(i) * n(rng);
  }
  return actor.scale().clip(a);
}

DdpgAgent::DdpgAgent(std::unique_ptr<Actor> actor, std::unique_ptr<Critic> critic, AgentConfig config,
                     std::uint64_t seed)
    : actor_(std::move(actor)), critic_(std::move(critic)), config_(config),
      buffer_(config.replay_capacity, derive_seed(seed, 1)), rng_(derive_seed(seed, 2)), noise_(config.noise_scale) {
  config_.validate();
  require(actor_ && critic_, "agent: actor and critic required");
  require(actor_->action_dim() == critic_->action_dim(), "agent: actor and critic disagree on action size");
  target_actor_ = actor_->clone();
  target_critic_ = critic_->clone();
  actor_opt_ = neural::Adam(actor_->param_count());
  critic_opt_ = neural::Adam(critic_->param_count());
}

Vector DdpgAgent::select_action(const Vector& state, bool explore) {
  return agent::select_action(*actor_, state, explore ? noise_ : 0.0, rng_);
}

DdpgAgent::UpdateStats DdpgAgent::observe(Transition t) {
  t.reward *= config_.reward_scale;
  buffer_.add(std::move(t));
  ++steps_;
  if (buffer_.size() < static_cast<std::size_t>(config_.warmup) || steps_ % config_.update_every != 0) return {};
  return update();
}

DdpgAgent::UpdateStats DdpgAgent::update() {
  const Batch batch = buffer_.sample(static_cast<std::size_t>(config_.batch_size));
  UpdateStats s;
  s.updated = true;
  const Vector y = critic_target(batch, *target_actor_, *target_critic_, config_.gamma);
  s.critic_loss = update_critic(batch, *critic_, y, critic_opt_, config_.critic_lr);
  s.actor_objective = update_actor(batch, *actor_, *critic_, actor_opt_, config_.actor_lr);
  soft_update(*target_actor_, *actor_, config_.tau);
  soft_update(*target_critic_, *critic_, config_.tau);
  return s;
}

void DdpgAgent::end_episode() { noise_ *= config_.noise_decay; }

void DdpgAgent::save(std::ostream& out, const std::string& config_hash) const {
  const auto old = out.precision(17);
  out << kCheckpointHeader << ' ' << kCheckpointVersion << '\n'
      << "config_hash " << (config_hash.empty() ? "-" : config_hash) << '\n'
      << "noise " << noise_ << ' ' << steps_ << '\n';
  actor_->write(out);
  critic_->write(out);
  target_actor_->write(out);
  target_critic_->write(out);
  actor_opt_.write(out);
  critic_opt_.write(out);
  out.precision(old);
}

std::string checkpoint_hash(std::istream& in) {
  std::string tok;
  int version = 0;
  in >> tok >> version;
  require(in && tok == kCheckpointHeader, "checkpoint: not a checkpoint file");
  require(version == kCheckpointVersion, "checkpoint: unsupported version " + std::to_string(version));
  std::string key, hash;
  in >> key >> hash;
  require(in && key == "config_hash", "checkpoint: missing config hash");
  return hash == "-" ? std::string() : hash;
}

void DdpgAgent::load(std::istream& in, const std::string& expected_hash) {
  const std::string hash = checkpoint_hash(in);
  require(expected_hash.empty() || hash == expected_hash,
          "checkpoint: config hash " + hash + " does not match " + expected_hash);
  std::string key;
  double noise = 0.0;
  long steps = 0;
  in >> key >> noise >> steps;
  require(in && key == "noise", "checkpoint: missing noise line");
  auto actor = read_actor(in);
  auto critic = read_critic(in);
  auto target_actor = read_actor(in);
  auto target_critic = read_critic(in);
  auto actor_opt = neural::Adam::read(in);
  auto critic_opt = neural::Adam::read(in);
  require(actor->kind() == actor_->kind() && critic->kind() == critic_->kind(),
          "checkpoint: approximator kinds differ from the configured backend");
  require(actor->state_dim() == actor_->state_dim() && actor->action_dim() == actor_->action_dim() &&
              critic->state_dim() == critic_->state_dim() && actor->param_count() == actor_->param_count() &&
              critic->param_count() == critic_->param_count(),
          "checkpoint: dimensions do not match the configured agent");
  require(static_cast<std::size_t>(actor_opt.first_moment().size()) == actor->param_count() &&
              static_cast<std::size_t>(critic_opt.first_moment().size()) == critic->param_count(),
          "checkpoint: optimizer state does not match the networks");
  actor_ = std::move(actor);
  critic_ = std::move(critic);
  target_actor_ = std::move(target_actor);
  target_critic_ = std::move(target_critic);
  actor_opt_ = std::move(actor_opt);
  critic_opt_ = std::move(critic_opt);
  noise_ = noise;
  steps_ = steps;
}

}  // namespace qdsc::agent
