#include "qdsc/agent/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qdsc::agent {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

void record(Trajectory* traj, const grid::GridSimulation& sim) {
  if (traj == nullptr) return;
  const auto& s = sim.state();
  const auto m = grid::stability_metrics(s, sim.machines());
  traj->push_back({s.t, s.delta * kRadToDeg, s.omega, s.p_e, m.delta_max_deg, m.delta_coi_deg});
}

}  // namespace

PredictionOutput lookahead_oracle(const grid::GridSimulation& sim, double horizon) {
  if (horizon < 0.0) throw std::invalid_argument("lookahead horizon must be non-negative");
  grid::GridSimulation ahead = sim;
  const auto& ev = ahead.scenario().events;
  const double stop = std::min(ahead.state().t + horizon, ev.horizon);
  double peak = grid::stability_metrics(ahead.state(), ahead.machines()).delta_max_deg;
  try {
    while (ahead.state().t < stop - 1e-9 && peak <= 360.0) {
      ahead.advance_control_step();
      peak = std::max(peak, grid::stability_metrics(ahead.state(), ahead.machines()).delta_max_deg);
    }
  } catch (const grid::SimulationDiverged&) {
    return {1.0, 0.0, 1.0};
  }
  return {static_cast<double>(tis_label(peak)), 0.0, 1.0};
}

DscEnvironment::DscEnvironment(grid::Scenario scenario, EnvironmentConfig config,
                               std::shared_ptr<const Predictor> predictor)
    : sim_(std::move(scenario)), config_(config), predictor_(std::move(predictor)), n_(sim_.scenario().n_machines()) {
  config_.weights.validate();
  if (config_.max_steps < 1) throw std::invalid_argument("environment: max_steps must be positive");
  if (!predictor_) throw std::invalid_argument("environment: predictor required");
  if (n_ < 2) throw std::invalid_argument("environment: need at least two machines");
}

Vector DscEnvironment::omega_dev() const {
  Vector d(n_);
  for (int i = 0; i < n_; ++i) d(i) = sim_.state().omega(i) - sim_.machines()[static_cast<std::size_t>(i)].omega_n;
  return d;
}

void DscEnvironment::advance() {
  prev_omega_dev_ = omega_dev();
  prev_coi_dev_ = grid::coi_frequency_deviation(sim_.state(), sim_.machines());
  sim_.advance_control_step();
  peak_ = std::max(peak_, grid::stability_metrics(sim_.state(), sim_.machines()).delta_max_deg);
  record(trajectory_, sim_);
}

Vector DscEnvironment::current_state() const {
  const auto& sc = sim_.scenario();
  const Vector obs = grid::observe(sim_.state(), sim_.machines(), prev_omega_dev_, sc.events.control_dt, sc.scales);
  return augment_state(obs, predictor_->predict(sim_, obs));
}

Vector DscEnvironment::reset(Trajectory* trajectory) {
  trajectory_ = trajectory;
  if (trajectory_ != nullptr) trajectory_->clear();
  sim_.reset();
  monitor_.reset();
  steps_ = 0;
  diverged_ = false;
  peak_ = grid::stability_metrics(sim_.state(), sim_.machines()).delta_max_deg;
  prev_omega_dev_ = Vector::Zero(n_);
  prev_action_ = Vector::Zero(2 * n_);
  record(trajectory_, sim_);
  while (!sim_.cleared()) advance();
  state_ = current_state();
  return state_;
}

StepResult DscEnvironment::step(const Vector& action) {
  if (action.size() != 2 * n_) throw std::invalid_argument("environment: action has wrong length");
  if (diverged_ || steps_ >= config_.max_steps) throw std::logic_error("environment: step after episode end");
  StepResult r;
  const auto& sc = sim_.scenario();
  r.clip_events = grid::apply_action(sim_.machines(), std::span<const double>(action.data(), action.size()),
                                     sc.events.control_dt).clip_events;
  try {
    advance();
  } catch (const grid::SimulationDiverged&) {
    diverged_ = true;
    r.diverged = r.terminal = true;
    r.reward = r.reward_base = -config_.weights.k_s;
    r.next_state = state_;
    ++steps_;
    return r;
  }
  ++steps_;

  StepSignals sig;
  sig.metrics = grid::stability_metrics(sim_.state(), sim_.machines());
  sig.omega_dev = grid::coi_frequency_deviation(sim_.state(), sim_.machines());
  sig.rocof = (sig.omega_dev - prev_coi_dev_) / sc.events.control_dt;
  if (config_.frequency_in_hz) {
    sig.omega_dev /= 2.0 * std::numbers::pi;
    sig.rocof /= 2.0 * std::numbers::pi;
  }
  r.reward_base = reward_base(sig, std::span<const double>(action.data(), action.size()),
                              std::span<const double>(prev_action_.data(), prev_action_.size()), config_.weights);
  prev_action_ = action;

  state_ = current_state();
  r.next_state = state_;
  const auto [obs, pred] = split_augmented(r.next_state);
  r.reward_pred = reward_pred(pred, config_.weights, config_.invert_pred_condition);
  r.reward = r.reward_base + r.reward_pred;

  const auto report = grid::check_constraints(sim_.state(), sim_.machines(), sc.limits);
  monitor_.record(report);
  r.violated = !report.empty();
  if (r.violated && config_.terminate_on_violation) {
    r.terminal = true;
    r.reward -= config_.weights.k_s;
  }
  r.truncated = !r.terminal && (steps_ >= config_.max_steps || sim_.finished());
  return r;
}

double DscEnvironment::finish_uncontrolled() {
  if (diverged_) return std::numeric_limits<double>::infinity();
  try {
    while (!sim_.finished()) advance();
  } catch (const grid::SimulationDiverged&) {
    diverged_ = true;
    return std::numeric_limits<double>::infinity();
  }
  return peak_;
}

EpisodeStats run_episode(DscEnvironment& env, const Policy& policy,
                         const std::function<void(const Vector&, const Vector&, const StepResult&)>& on_step,
                         Trajectory* trajectory) {
  EpisodeStats stats;
  Vector s = env.reset(trajectory);
  while (true) {
    const Vector a = policy(s);
    StepResult r = env.step(a);
    stats.ret += r.reward;
    stats.clip_events += r.clip_events;
    stats.diverged = stats.diverged || r.diverged;
    if (on_step) on_step(s, a, r);
    ++stats.steps;
    if (r.done()) break;
    s = std::move(r.next_state);
  }
  stats.violations = static_cast<int>(env.monitor().first_violations().violations.size());
  stats.final_delta_max = env.finish_uncontrolled();
  return stats;
}

}  // namespace qdsc::agent
