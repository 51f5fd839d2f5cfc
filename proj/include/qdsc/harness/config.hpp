#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "qdsc/agent/ddpg.hpp"
#include "qdsc/agent/ensemble.hpp"
#include "qdsc/agent/environment.hpp"
#include "qdsc/grid/scenario.hpp"

namespace qdsc::harness {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Every harness failure carries a short category ("config", "io", "memory",
/// "csv", ...) that the CLI prints as `qdsc-error: <category>: <message>`.
class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& message)
      : std::runtime_error(message), category_(std::move(category)) {}
  [[nodiscard]] const std::string& category() const { return category_; }

 private:
  std::string category_;
};

struct QuantumSettings {
  int actor_qubits = 6;
  int actor_layers = 3;
  std::vector<int> actor_features;  // empty: derived from the machine count
  agent::Readout readout = agent::Readout::Grouped;
  int critic_qubits = 8;
  int critic_layers = 3;
  std::vector<int> critic_features;  // empty: derived
};

struct ClassicalSettings {
  std::vector<int> actor_hidden{128, 128};
  std::vector<int> critic_hidden{128, 128, 128};
};

struct PredictorSettings {
  std::string kind = "oracle";  // "oracle" | "ensemble"
  double lookahead = 0.15;      // s
  agent::EnsembleConfig ensemble;
  int dataset_episodes = 20;    // random-policy rollouts labelled by the oracle
};

struct NoiseSettings {
  double p = 0.0;  // depolarizing probability at evaluation time
  int trajectories = 32;
  std::vector<double> sweep{0.0, 0.01, 0.05};
  int sweep_seeds = 10;
};

struct ExperimentConfig {
  std::string scenario = "builtin:three-machine";
  std::string backend = "quantum";  // "quantum" | "classical"
  std::vector<std::uint64_t> seeds{1};
  int episodes = 300;
  int eval_repeats = 1;
  std::string out = "runs/default";
  bool runnable = true;
  std::string note;
  std::vector<double> action_scale;  // empty: 0.1 pu per step for P_ref, 0.01 for J
  std::vector<double> action_bias;   // empty: zeros
  QuantumSettings quantum;
  ClassicalSettings classical;
  agent::AgentConfig agent;
  agent::EnvironmentConfig environment;
  PredictorSettings predictor;
  NoiseSettings noise;
  std::optional<std::size_t> memory_cap_bytes;  // unset: QDSC_MEM_CAP_BYTES or the default

  ExperimentConfig();
};

nlohmann::json to_json(const ExperimentConfig& c);
/// Strict: unknown keys and wrong types are config errors.
ExperimentConfig config_from_json(const nlohmann::json& j);

/// Flag values that override everything else.
struct Overrides {
  std::optional<std::string> scenario;
  std::optional<std::string> backend;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<std::string> out;
  std::optional<double> noise_p;
};

struct ResolvedConfig {
  ExperimentConfig config;
  grid::Scenario scenario;
  nlohmann::json scenario_json;
  std::string hash;  // independent of seeds, output directory and memory cap

  [[nodiscard]] std::size_t memory_cap() const;
  /// Config plus the resolved scenario and hash, as echoed next to results.
  [[nodiscard]] nlohmann::json echo() const;
};

/// Layers defaults, the scenario's optional "experiment" block, the config
/// file and the flag overrides, in that order, then validates the result.
ResolvedConfig resolve_config(const std::optional<std::filesystem::path>& config_file, const Overrides& overrides);
ResolvedConfig resolve_config(const nlohmann::json& config, const Overrides& overrides = {},
                              const std::filesystem::path& base_dir = {});

/// Loads "builtin:three-machine", "builtin:smib" or a JSON file.
nlohmann::json load_scenario_json(const std::string& ref, const std::filesystem::path& base_dir = {});

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

// ----------------------------------------------------------------- builders

agent::ActionScale action_scale(const ExperimentConfig& c, int n_machines);
agent::QuantumActorConfig quantum_actor_config(const ExperimentConfig& c, int n_machines);
agent::QuantumCriticConfig quantum_critic_config(const ExperimentConfig& c, int n_machines);

std::unique_ptr<agent::Actor> make_actor(const ResolvedConfig& rc, Rng& rng);
std::unique_ptr<agent::Critic> make_critic(const ResolvedConfig& rc, Rng& rng);
/// Fresh agent whose initialization is fixed by `seed`.
std::unique_ptr<agent::DdpgAgent> make_agent(const ResolvedConfig& rc, std::uint64_t seed);
/// Oracle, or an ensemble trained on oracle-labelled random rollouts.
std::shared_ptr<const agent::Predictor> make_predictor(const ResolvedConfig& rc, std::uint64_t seed);

struct ParameterCounts {
  std::size_t quantum_actor = 0;
  std::size_t quantum_critic = 0;
  std::size_t classical_actor = 0;
  std::size_t classical_critic = 0;
};
ParameterCounts parameter_counts(const ResolvedConfig& rc);

}  // namespace qdsc::harness
