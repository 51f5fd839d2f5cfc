#include "qdsc/harness/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "qdsc/quantum/memory_guard.hpp"

namespace qdsc::harness {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error("config", what); }

void require(bool ok, const std::string& what) {
  if (!ok) config_error(what);
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require(j.is_object(), where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    require(ok.count(k) != 0, "unknown key '" + k + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

std::string readout_name(agent::Readout r) { return r == agent::Readout::Grouped ? "grouped" : "shared_sum"; }

agent::Readout readout_from(const std::string& s) {
  if (s == "grouped") return agent::Readout::Grouped;
  if (s == "shared_sum") return agent::Readout::SharedSum;
  config_error("readout must be 'grouped' or 'shared_sum', got '" + s + "'");
}

json read_json_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw Error("io", std::string("cannot open ") + what + " " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    config_error(std::string(what) + " " + path.string() + " is not valid JSON: " + e.what());
  }
}

Vector to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  // Desk-scale defaults; see the README for how these were chosen.
  agent.gamma = 0.95;
  agent.batch_size = 32;
  agent.warmup = 32;
  agent.update_every = 2;
  agent.reward_scale = 0.01;
  environment.invert_pred_condition = true;
  environment.terminate_on_violation = true;
  environment.frequency_in_hz = true;
}

json to_json(const ExperimentConfig& c) {
  const auto& a = c.agent;
  const auto& e = c.environment;
  const auto& w = e.weights;
  const auto& p = c.predictor;
  json j;
  j["scenario"] = c.scenario;
  j["backend"] = c.backend;
  j["seeds"] = c.seeds;
  j["episodes"] = c.episodes;
  j["eval_repeats"] = c.eval_repeats;
  j["out"] = c.out;
  j["runnable"] = c.runnable;
  j["note"] = c.note;
  j["action_scale"] = c.action_scale;
  j["action_bias"] = c.action_bias;
  j["quantum"] = {{"actor_qubits", c.quantum.actor_qubits},     {"actor_layers", c.quantum.actor_layers},
                  {"actor_features", c.quantum.actor_features}, {"readout", readout_name(c.quantum.readout)},
                  {"critic_qubits", c.quantum.critic_qubits},   {"critic_layers", c.quantum.critic_layers},
                  {"critic_features", c.quantum.critic_features}};
  j["classical"] = {{"actor_hidden", c.classical.actor_hidden}, {"critic_hidden", c.classical.critic_hidden}};
  j["agent"] = {{"gamma", a.gamma},
                {"tau", a.tau},
                {"batch_size", a.batch_size},
                {"actor_lr", a.actor_lr},
                {"critic_lr", a.critic_lr},
                {"noise_scale", a.noise_scale},
                {"noise_decay", a.noise_decay},
                {"replay_capacity", a.replay_capacity},
                {"warmup", a.warmup},
                {"update_every", a.update_every},
                {"reward_scale", a.reward_scale}};
  j["environment"] = {{"max_steps", e.max_steps},
                      {"terminate_on_violation", e.terminate_on_violation},
                      {"invert_pred_condition", e.invert_pred_condition},
                      {"frequency_in_hz", e.frequency_in_hz},
                      {"reward",
                       {{"xi1", w.xi1},
                        {"xi2", w.xi2},
                        {"zeta", w.zeta},
                        {"gamma1", w.gamma1},
                        {"gamma2", w.gamma2},
                        {"k_s", w.k_s},
                        {"eta", w.eta},
                        {"c_th", w.c_th}}}};
  j["predictor"] = {{"kind", p.kind},
                    {"lookahead", p.lookahead},
                    {"dataset_episodes", p.dataset_episodes},
                    {"ensemble",
                     {{"members", p.ensemble.members},
                      {"hidden", p.ensemble.hidden},
                      {"epochs", p.ensemble.epochs},
                      {"batch_size", p.ensemble.batch_size},
                      {"learning_rate", p.ensemble.learning_rate},
                      {"bootstrap", p.ensemble.bootstrap}}}};
  j["noise"] = {{"p", c.noise.p},
                {"trajectories", c.noise.trajectories},
                {"sweep", c.noise.sweep},
                {"sweep_seeds", c.noise.sweep_seeds}};
  j["memory_cap_bytes"] = c.memory_cap_bytes ? json(*c.memory_cap_bytes) : json(nullptr);
  return j;
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    check_keys(j,
               {"scenario", "backend", "seeds", "episodes", "eval_repeats", "out", "runnable", "note", "action_scale",
                "action_bias", "quantum", "classical", "agent", "environment", "predictor", "noise",
                "memory_cap_bytes"},
               "config");
    read(j, "scenario", c.scenario);
    read(j, "backend", c.backend);
    read(j, "seeds", c.seeds);
    read(j, "episodes", c.episodes);
    read(j, "eval_repeats", c.eval_repeats);
    read(j, "out", c.out);
    read(j, "runnable", c.runnable);
    read(j, "note", c.note);
    read(j, "action_scale", c.action_scale);
    read(j, "action_bias", c.action_bias);
    if (j.contains("quantum")) {
      const auto& q = j["quantum"];
      check_keys(q,
                 {"actor_qubits", "actor_layers", "actor_features", "readout", "critic_qubits", "critic_layers",
                  "critic_features"},
                 "quantum");
      read(q, "actor_qubits", c.quantum.actor_qubits);
      read(q, "actor_layers", c.quantum.actor_layers);
      read(q, "actor_features", c.quantum.actor_features);
      if (q.contains("readout")) c.quantum.readout = readout_from(q["readout"].get<std::string>());
      read(q, "critic_qubits", c.quantum.critic_qubits);
      read(q, "critic_layers", c.quantum.critic_layers);
      read(q, "critic_features", c.quantum.critic_features);
    }
    if (j.contains("classical")) {
      const auto& k = j["classical"];
      check_keys(k, {"actor_hidden", "critic_hidden"}, "classical");
      read(k, "actor_hidden", c.classical.actor_hidden);
      read(k, "critic_hidden", c.classical.critic_hidden);
    }
    if (j.contains("agent")) {
      const auto& a = j["agent"];
      check_keys(a,
                 {"gamma", "tau", "batch_size", "actor_lr", "critic_lr", "noise_scale", "noise_decay",
                  "replay_capacity", "warmup", "update_every", "reward_scale"},
                 "agent");
      read(a, "gamma", c.agent.gamma);
      read(a, "tau", c.agent.tau);
      read(a, "batch_size", c.agent.batch_size);
      read(a, "actor_lr", c.agent.actor_lr);
      read(a, "critic_lr", c.agent.critic_lr);
      read(a, "noise_scale", c.agent.noise_scale);
      read(a, "noise_decay", c.agent.noise_decay);
      read(a, "replay_capacity", c.agent.replay_capacity);
      read(a, "warmup", c.agent.warmup);
      read(a, "update_every", c.agent.update_every);
      read(a, "reward_scale", c.agent.reward_scale);
    }
    if (j.contains("environment")) {
      const auto& e = j["environment"];
      check_keys(e, {"max_steps", "terminate_on_violation", "invert_pred_condition", "frequency_in_hz", "reward"},
                 "environment");
      read(e, "max_steps", c.environment.max_steps);
      read(e, "terminate_on_violation", c.environment.terminate_on_violation);
      read(e, "invert_pred_condition", c.environment.invert_pred_condition);
      read(e, "frequency_in_hz", c.environment.frequency_in_hz);
      if (e.contains("reward")) {
        const auto& r = e["reward"];
        auto& w = c.environment.weights;
        check_keys(r, {"xi1", "xi2", "zeta", "gamma1", "gamma2", "k_s", "eta", "c_th"}, "environment.reward");
        read(r, "xi1", w.xi1);
        read(r, "xi2", w.xi2);
        read(r, "zeta", w.zeta);
        read(r, "gamma1", w.gamma1);
        read(r, "gamma2", w.gamma2);
        read(r, "k_s", w.k_s);
        read(r, "eta", w.eta);
        read(r, "c_th", w.c_th);
      }
    }
    if (j.contains("predictor")) {
      const auto& p = j["predictor"];
      check_keys(p, {"kind", "lookahead", "dataset_episodes", "ensemble"}, "predictor");
      read(p, "kind", c.predictor.kind);
      read(p, "lookahead", c.predictor.lookahead);
      read(p, "dataset_episodes", c.predictor.dataset_episodes);
      if (p.contains("ensemble")) {
        const auto& en = p["ensemble"];
        auto& ec = c.predictor.ensemble;
        check_keys(en, {"members", "hidden", "epochs", "batch_size", "learning_rate", "bootstrap"},
                   "predictor.ensemble");
        read(en, "members", ec.members);
        read(en, "hidden", ec.hidden);
        read(en, "epochs", ec.epochs);
        read(en, "batch_size", ec.batch_size);
        read(en, "learning_rate", ec.learning_rate);
        read(en, "bootstrap", ec.bootstrap);
      }
    }
    if (j.contains("noise")) {
      const auto& n = j["noise"];
      check_keys(n, {"p", "trajectories", "sweep", "sweep_seeds"}, "noise");
      read(n, "p", c.noise.p);
      read(n, "trajectories", c.noise.trajectories);
      read(n, "sweep", c.noise.sweep);
      read(n, "sweep_seeds", c.noise.sweep_seeds);
    }
    if (j.contains("memory_cap_bytes") && !j["memory_cap_bytes"].is_null())
      c.memory_cap_bytes = j["memory_cap_bytes"].get<std::size_t>();
  } catch (const json::exception& e) {
    config_error(e.what());
  }
  return c;
}

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

json load_scenario_json(const std::string& ref, const std::filesystem::path& base_dir) {
  if (ref == "builtin:three-machine") return grid::scenario_to_json(grid::three_machine_fixture());
  if (ref == "builtin:smib") return grid::scenario_to_json(grid::smib_fixture(10.0, 0.0, 0.2));
  if (ref.rfind("builtin:", 0) == 0) config_error("unknown built-in scenario '" + ref + "'");
  std::filesystem::path path(ref);
  if (path.is_relative() && !base_dir.empty() && !std::filesystem::exists(path)) path = base_dir / path;
  return read_json_file(path, "scenario file");
}

std::size_t ResolvedConfig::memory_cap() const {
  return config.memory_cap_bytes ? *config.memory_cap_bytes : quantum::memory_cap_from_env();
}

json ResolvedConfig::echo() const {
  json j = to_json(config);
  j["resolved_scenario"] = scenario_json;
  j["config_hash"] = hash;
  return j;
}

namespace {

void validate(const ResolvedConfig& rc) {
  const auto& c = rc.config;
  const int n = rc.scenario.n_machines();
  require(c.backend == "quantum" || c.backend == "classical",
          "backend must be 'quantum' or 'classical', got '" + c.backend + "'");
  require(!c.seeds.empty(), "seeds must not be empty");
  require(c.episodes >= 1, "episodes must be positive");
  require(c.eval_repeats >= 1, "eval_repeats must be positive");
  require(n >= 2, "the agent needs a scenario with at least two machines");
  require(c.quantum.actor_layers >= 1 && c.quantum.critic_layers >= 1, "circuit layers must be at least 1");
  require(c.predictor.kind == "oracle" || c.predictor.kind == "ensemble",
          "predictor.kind must be 'oracle' or 'ensemble'");
  require(c.predictor.lookahead >= 0.0, "predictor.lookahead must be non-negative");
  require(c.noise.p >= 0.0 && c.noise.p <= 1.0 && c.noise.trajectories >= 1, "bad noise settings");
  for (double p : c.noise.sweep) require(p >= 0.0 && p <= 1.0, "noise sweep probabilities must lie in [0, 1]");
  require(c.noise.sweep_seeds >= 1, "noise.sweep_seeds must be positive");

  // The memory guard explains paper-scale requests before anything else.
  const std::size_t cap = rc.memory_cap();
  try {
    quantum::check_memory_guard(c.quantum.actor_qubits, cap, "actor circuit");
    quantum::check_memory_guard(c.quantum.critic_qubits, cap, "critic circuit");
  } catch (const std::invalid_argument& e) {
    throw Error("memory", e.what());
  }
  require(c.runnable, "config is marked non-runnable (documentation only)" +
                          (c.note.empty() ? std::string() : ": " + c.note));
  try {
    c.agent.validate();
    rc.scenario.validate();
    agent::DscEnvironment probe(rc.scenario, c.environment);
    action_scale(c, n).validate();
    (void)quantum_actor_config(c, n);
    (void)quantum_critic_config(c, n);
    c.predictor.ensemble.validate();
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    config_error(e.what());
  }
}

}  // namespace

ResolvedConfig resolve_config(const json& config, const Overrides& o, const std::filesystem::path& base_dir) {
  json merged = to_json(ExperimentConfig{});
  require(config.is_object() || config.is_null(), "config file must hold a JSON object");

  std::string scenario_ref = merged["scenario"];
  if (config.is_object() && config.contains("scenario")) scenario_ref = config["scenario"].get<std::string>();
  std::filesystem::path scenario_base = base_dir;
  if (o.scenario) {
    scenario_ref = *o.scenario;
    scenario_base.clear();
  }
  json scenario_json = load_scenario_json(scenario_ref, scenario_base);
  if (scenario_json.is_object() && scenario_json.contains("experiment")) {
    merged.merge_patch(scenario_json["experiment"]);
    scenario_json.erase("experiment");
  }
  if (config.is_object()) merged.merge_patch(config);
  merged["scenario"] = scenario_ref;
  if (o.backend) merged["backend"] = *o.backend;
  if (o.seed) merged["seeds"] = json::array({*o.seed});
  if (o.episodes) merged["episodes"] = *o.episodes;
  if (o.out) merged["out"] = *o.out;
  if (o.noise_p) merged["noise"]["p"] = *o.noise_p;

  ResolvedConfig rc;
  rc.config = config_from_json(merged);
  try {
    rc.scenario = grid::scenario_from_json(scenario_json);
  } catch (const std::exception& e) {
    throw Error("scenario", e.what());
  }
  rc.scenario_json = grid::scenario_to_json(rc.scenario);

  json hashed = to_json(rc.config);
  hashed.erase("seeds");
  hashed.erase("out");
  hashed.erase("memory_cap_bytes");
  hashed.erase("scenario");
  hashed.erase("note");
  hashed["resolved_scenario"] = rc.scenario_json;
  rc.hash = fnv1a_hex(hashed.dump());
  validate(rc);
  return rc;
}

ResolvedConfig resolve_config(const std::optional<std::filesystem::path>& config_file, const Overrides& o) {
  if (!config_file) return resolve_config(json(nullptr), o, {});
  return resolve_config(read_json_file(*config_file, "config file"), o, config_file->parent_path());
}

// ----------------------------------------------------------------- builders

agent::ActionScale action_scale(const ExperimentConfig& c, int n) {
  std::vector<double> scale = c.action_scale, bias = c.action_bias;
  if (scale.empty()) {
    scale.assign(static_cast<std::size_t>(n), 0.1);
    scale.insert(scale.end(), static_cast<std::size_t>(n), 0.01);
  }
  if (bias.empty()) bias.assign(scale.size(), 0.0);
  require(static_cast<int>(scale.size()) == 2 * n && bias.size() == scale.size(),
          "action_scale and action_bias need 2 x machines = " + std::to_string(2 * n) + " entries");
  agent::ActionScale s{to_vector(scale), to_vector(bias)};
  try {
    s.validate();
  } catch (const std::exception& e) {
    config_error(e.what());
  }
  return s;
}

agent::QuantumActorConfig quantum_actor_config(const ExperimentConfig& c, int n) {
  agent::QuantumActorConfig q;
  q.n_qubits = c.quantum.actor_qubits;
  q.n_layers = c.quantum.actor_layers;
  q.state_dim = 4 * n + 2;
  q.readout = c.quantum.readout;
  q.scale = action_scale(c, n);
  q.features = c.quantum.actor_features;
  if (q.features.empty()) {
    // Frequencies, then angles, then the instability estimate.
    std::vector<int> pool;
    for (int i = 0; i < n; ++i) pool.push_back(i);
    for (int i = 0; i < n; ++i) pool.push_back(n + i);
    const int room = q.n_qubits - 1;
    if (static_cast<int>(pool.size()) > room) pool.resize(static_cast<std::size_t>(std::max(room, 0)));
    pool.push_back(4 * n);
    q.features = pool;
  }
  require(static_cast<int>(q.features.size()) <= q.n_qubits, "more actor features than actor qubits");
  for (int f : q.features) require(f >= 0 && f < q.state_dim, "actor feature index out of range");
  if (q.readout == agent::Readout::Grouped)
    require(q.scale.size() <= q.n_qubits, "grouped read-out needs at least one actor qubit per action");
  return q;
}

agent::QuantumCriticConfig quantum_critic_config(const ExperimentConfig& c, int n) {
  agent::QuantumCriticConfig q;
  q.n_qubits = c.quantum.critic_qubits;
  q.n_layers = c.quantum.critic_layers;
  q.state_dim = 4 * n + 2;
  q.scale = action_scale(c, n);
  q.features = c.quantum.critic_features;
  const int room = q.n_qubits - 2 * n;
  require(room >= 0, "critic needs at least 2 x machines qubits for the actions");
  if (q.features.empty()) {
    for (int f : {0, n}) {
      if (static_cast<int>(q.features.size()) < room) q.features.push_back(f);
    }
  }
  require(static_cast<int>(q.features.size()) <= room, "critic features do not fit beside the actions");
  for (int f : q.features) require(f >= 0 && f < q.state_dim, "critic feature index out of range");
  return q;
}

std::unique_ptr<agent::Actor> make_actor(const ResolvedConfig& rc, Rng& rng) {
  const int n = rc.scenario.n_machines();
  if (rc.config.backend == "quantum")
    return std::make_unique<agent::QuantumActor>(quantum_actor_config(rc.config, n), rng);
  return std::make_unique<agent::ClassicalActor>(4 * n + 2, action_scale(rc.config, n), rc.config.classical.actor_hidden,
                                                 rng);
}

std::unique_ptr<agent::Critic> make_critic(const ResolvedConfig& rc, Rng& rng) {
  const int n = rc.scenario.n_machines();
  if (rc.config.backend == "quantum")
    return std::make_unique<agent::QuantumCritic>(quantum_critic_config(rc.config, n), rng);
  return std::make_unique<agent::ClassicalCritic>(4 * n + 2, action_scale(rc.config, n),
                                                  rc.config.classical.critic_hidden, rng);
}

std::unique_ptr<agent::DdpgAgent> make_agent(const ResolvedConfig& rc, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0));
  auto actor = make_actor(rc, rng);
  auto critic = make_critic(rc, rng);
  agent::AgentConfig ac = rc.config.agent;
  ac.episode_max_steps = rc.config.environment.max_steps;
  return std::make_unique<agent::DdpgAgent>(std::move(actor), std::move(critic), ac, seed);
}

std::shared_ptr<const agent::Predictor> make_predictor(const ResolvedConfig& rc, std::uint64_t seed) {
  const auto& p = rc.config.predictor;
  auto oracle = std::make_shared<agent::LookaheadPredictor>(p.lookahead);
  if (p.kind == "oracle") return oracle;

  agent::EnvironmentConfig ec = rc.config.environment;
  ec.terminate_on_violation = false;
  agent::DscEnvironment env(rc.scenario, ec, oracle);
  Rng rng(derive_seed(seed, 3));
  const auto scale = action_scale(rc.config, rc.scenario.n_machines());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const agent::Policy random_policy = [&](const Vector&) {
    Vector a(scale.size());
    for (auto& v : a) v = u(rng);
    return Vector(scale.bias + scale.scale.cwiseProduct(a));
  };
  const auto data = agent::collect_tis_dataset(env, random_policy, p.dataset_episodes);
  agent::TisEnsemble ensemble(4 * rc.scenario.n_machines(), p.ensemble, rng);
  if (data.size() > 0) ensemble.train(data, p.ensemble, rng);
  return std::make_shared<agent::EnsemblePredictor>(std::move(ensemble));
}

ParameterCounts parameter_counts(const ResolvedConfig& rc) {
  const int n = rc.scenario.n_machines();
  Rng rng(0);
  ParameterCounts pc;
  pc.quantum_actor = agent::QuantumActor(quantum_actor_config(rc.config, n), rng).param_count();
  pc.quantum_critic = agent::QuantumCritic(quantum_critic_config(rc.config, n), rng).param_count();
  const auto scale = action_scale(rc.config, n);
  pc.classical_actor = agent::ClassicalActor(4 * n + 2, scale, rc.config.classical.actor_hidden, rng).param_count();
  pc.classical_critic = agent::ClassicalCritic(4 * n + 2, scale, rc.config.classical.critic_hidden, rng).param_count();
  return pc;
}

}  // namespace qdsc::harness
