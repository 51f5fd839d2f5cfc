#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "qdsc/agent/approximators.hpp"
#include "qdsc/agent/replay.hpp"
#include "qdsc/neural/dense.hpp"

namespace qdsc::agent {

struct AgentConfig {
  double gamma = 0.99;
  double tau = 0.005;
  int batch_size = 64;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double noise_scale = 0.1;   // exploration std as a fraction of the action scale
  double noise_decay = 0.995; // per episode
  int episode_max_steps = 100;
  std::size_t replay_capacity = 50000;
  int warmup = 64;            // transitions stored before the first update
  int update_every = 1;       // environment steps per gradient update
  double reward_scale = 1.0;  // multiplies rewards before they reach the critic

  void validate() const;
};

using Batch = std::vector<const Transition*>;

/// y_t = r_t + gamma Q'(s_{t+1}, mu'(s_{t+1})), or r_t for terminal steps.
Vector critic_target(const Batch& batch, const Actor& target_actor, const Critic& target_critic, double gamma);

/// One Adam step on mean (Q(s, a) - y)^2. Returns the loss before the step.
double update_critic(const Batch& batch, Critic& critic, const Vector& y, neural::Adam& opt, double step_size);

/// One Adam step ascending mean Q(s, mu(s)) with the critic held fixed.
/// Returns that mean before the step.
double update_actor(const Batch& batch, Actor& actor, const Critic& critic, neural::Adam& opt, double step_size);

/// target <- tau * online + (1 - tau) * target.
void soft_update(Vector& target, const Vector& online, double tau);
void soft_update(Actor& target, const Actor& online, double tau);
void soft_update(Critic& target, const Critic& online, double tau);

/// Gaussian exploration around the policy output, clipped to the bounds.
Vector select_action(const Actor& actor, const Vector& state, double noise_std_fraction, Rng& rng);

class DdpgAgent {
 public:
  DdpgAgent(std::unique_ptr<Actor> actor, std::unique_ptr<Critic> critic, AgentConfig config, std::uint64_t seed);

  /// Exploration noise when `explore`, the greedy policy otherwise.
  Vector select_action(const Vector& state, bool explore);

  struct UpdateStats {
    bool updated = false;
    double critic_loss = 0.0;
    double actor_objective = 0.0;
  };
  /// Stores the transition (reward scaled) and trains when due.
  UpdateStats observe(Transition t);
  /// One critic step, one actor step, then both soft updates.
  UpdateStats update();
  void end_episode();

  [[nodiscard]] const Actor& actor() const { return *actor_; }
  [[nodiscard]] const Critic& critic() const { return *critic_; }
  [[nodiscard]] const Actor& target_actor() const { return *target_actor_; }
  [[nodiscard]] const Critic& target_critic() const { return *target_critic_; }
  [[nodiscard]] const AgentConfig& config() const { return config_; }
  [[nodiscard]] double noise_fraction() const { return noise_; }
  [[nodiscard]] const ReplayBuffer& buffer() const { return buffer_; }
  [[nodiscard]] const neural::Adam& actor_optimizer() const { return actor_opt_; }
  [[nodiscard]] const neural::Adam& critic_optimizer() const { return critic_opt_; }

  /// Versioned bundle: config hash, noise level, online and target
  /// approximators, optimizer state.
  void save(std::ostream& out, const std::string& config_hash) const;
  /// Restores networks and optimizers; throws if the stored hash differs
  /// from `expected_hash` (unless it is empty).
  void load(std::istream& in, const std::string& expected_hash);

 private:
  std::unique_ptr<Actor> actor_, target_actor_;
  std::unique_ptr<Critic> critic_, target_critic_;
  AgentConfig config_;
  neural::Adam actor_opt_, critic_opt_;
  ReplayBuffer buffer_;
  Rng rng_;
  double noise_;
  long steps_ = 0;
};

/// Reads only the hash line of a checkpoint stream.
std::string checkpoint_hash(std::istream& in);

inline constexpr const char* kCheckpointHeader = "qdsc-checkpoint";
inline constexpr int kCheckpointVersion = 1;

}  // namespace qdsc::agent
