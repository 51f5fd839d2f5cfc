#include "qdsc/harness/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "qdsc/harness/plot.hpp"
#include "qdsc/quantum/gradient.hpp"

namespace qdsc::harness {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::mutex log_mutex;

void log_line(std::ostream* log, const std::string& line) {
  if (log == nullptr) return;
  std::lock_guard lock(log_mutex);
  *log << line << '\n' << std::flush;
}

std::string csv_text(const std::function<void(std::ostream&)>& write) {
  std::ostringstream os;
  write(os);
  return os.str();
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

json eval_json(const EvalSummary& e) {
  json runs = json::array();
  for (const auto& r : e.runs) {
    runs.push_back({{"steps", r.steps},
                    {"return", r.ret},
                    {"clip_events", r.clip_events},
                    {"violations", r.violations},
                    {"final_delta_max", std::isfinite(r.final_delta_max) ? json(r.final_delta_max) : json("inf")},
                    {"diverged", r.diverged}});
  }
  return {{"return_mean", e.return_mean},
          {"return_std", e.return_std},
          {"final_delta_max", std::isfinite(e.final_delta_max) ? json(e.final_delta_max) : json("inf")},
          {"stable", e.stable},
          {"runs", runs}};
}

}  // namespace

std::vector<double> RunRecord::returns() const {
  std::vector<double> r;
  for (const auto& e : episodes) r.push_back(e.ret);
  return r;
}

void run_parallel(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& job) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

agent::Policy actor_policy(const agent::Actor& actor, const quantum::NoiseModel& noise, Rng& rng) {
  if (!noise.enabled()) return [&actor](const Vector& s) { return actor.act(s); };
  return [&actor, noise, &rng](const Vector& s) { return actor.act_noisy(s, noise, rng); };
}

EvalSummary evaluate(const ResolvedConfig& rc, const std::function<agent::Policy(int)>& policy_for, int repeats,
                     std::uint64_t seed, const std::optional<fs::path>& dir) {
  EvalSummary out;
  agent::DscEnvironment env(rc.scenario, rc.config.environment, make_predictor(rc, seed));
  std::vector<double> returns;
  for (int r = 0; r < repeats; ++r) {
    agent::Trajectory traj;
    const auto stats = agent::run_episode(env, policy_for(r), {}, &traj);
    if (dir) write_text_file(*dir / ("trajectory_" + std::to_string(r) + ".csv"),
                             csv_text([&](std::ostream& os) { write_trajectory_csv(os, traj); }));
    out.runs.push_back(stats);
    returns.push_back(stats.ret);
  }
  out.return_mean = mean_of(returns);
  out.return_std = sample_std(returns);
  out.stable = true;
  for (const auto& r : out.runs) {
    out.final_delta_max = std::max(out.final_delta_max, r.final_delta_max);
    out.stable = out.stable && std::isfinite(r.final_delta_max) && agent::tis_label(r.final_delta_max) == 0;
  }
  return out;
}

RunRecord train_seed(const ResolvedConfig& rc, std::uint64_t seed, const fs::path& dir, std::ostream* log) {
  const auto start = std::chrono::steady_clock::now();
  RunRecord rec;
  rec.config_hash = rc.hash;
  rec.seed = seed;
  rec.dir = dir;
  auto agent = make_agent(rc, seed);
  agent::DscEnvironment env(rc.scenario, rc.config.environment, make_predictor(rc, seed));
  const agent::Policy explore = [&](const Vector& s) { return agent->select_action(s, true); };
  const auto learn = [&](const Vector& s, const Vector& a, const agent::StepResult& r) {
    agent->observe({s, a, r.reward, r.next_state, r.terminal});
  };
  for (int e = 0; e < rc.config.episodes; ++e) {
    const auto stats = agent::run_episode(env, explore, learn);
    if (stats.diverged)
      log_line(log, "seed " + std::to_string(seed) + " episode " + std::to_string(e) +
                        ": simulation diverged, episode terminated");
    agent->end_episode();
    rec.episodes.push_back(stats);
  }

  rec.telemetry = dir / "telemetry.csv";
  write_text_file(rec.telemetry, csv_text([&](std::ostream& os) { write_telemetry_csv(os, rec.episodes); }));
  rec.checkpoint = dir / "checkpoint.txt";
  write_text_file(rec.checkpoint, csv_text([&](std::ostream& os) { agent->save(os, rc.hash); }));

  Rng unused(0);
  const quantum::NoiseModel off;
  rec.eval = evaluate(rc, [&](int) { return actor_policy(agent->actor(), off, unused); }, 1, seed, dir);
  rec.trajectory = dir / "trajectory_0.csv";
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  json run = {{"config_hash", rec.config_hash},
              {"seed", seed},
              {"returns", rec.returns()},
              {"wall_time_s", rec.wall_time_s},
              {"eval", eval_json(rec.eval)},
              {"telemetry", rec.telemetry.filename().string()},
              {"checkpoint", rec.checkpoint.filename().string()},
              {"trajectory", rec.trajectory.filename().string()}};
  write_text_file(dir / "run.json", run.dump(2) + "\n");
  return rec;
}

std::vector<RunRecord> cmd_train(const ResolvedConfig& rc, std::ostream& log, unsigned workers) {
  const fs::path out(rc.config.out);
  write_text_file(out / "resolved_config.json", rc.echo().dump(2) + "\n");
  std::vector<std::uint64_t> seeds = rc.config.seeds;
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  std::vector<RunRecord> records(seeds.size());
  run_parallel(seeds.size(), workers, [&](std::size_t i) {
    records[i] = train_seed(rc, seeds[i], out / ("seed_" + std::to_string(seeds[i])), &log);
    const auto ret = records[i].returns();
    const std::size_t tail = std::min<std::size_t>(30, ret.size());
    const std::vector<double> last(ret.end() - static_cast<std::ptrdiff_t>(tail), ret.end());
    std::ostringstream os;
    os << "seed " << seeds[i] << ": mean return (last " << tail << ") " << fmt9(mean_of(last)) << ", greedy return "
       << fmt9(records[i].eval.return_mean) << ", final delta_max " << fmt9(records[i].eval.final_delta_max)
       << (records[i].eval.stable ? " (stable)" : " (unstable)");
    log_line(&log, os.str());
  });

  json summary = {{"config_hash", rc.hash}, {"runs", json::array()}};
  std::vector<double> finals;
  for (const auto& r : records) {
    const auto ret = r.returns();
    const std::size_t tail = std::min<std::size_t>(30, ret.size());
    const double first = mean_of({ret.begin(), ret.begin() + static_cast<std::ptrdiff_t>(tail)});
    const double last = mean_of({ret.end() - static_cast<std::ptrdiff_t>(tail), ret.end()});
    finals.push_back(last);
    summary["runs"].push_back({{"seed", r.seed},
                               {"dir", r.dir.filename().string()},
                               {"mean_return_first", first},
                               {"mean_return_last", last},
                               {"eval", eval_json(r.eval)},
                               {"wall_time_s", r.wall_time_s}});
  }
  summary["final_mean_return"] = mean_of(finals);
  write_text_file(out / "summary.json", summary.dump(2) + "\n");
  log_line(&log, "final mean return: " + fmt9(mean_of(finals)));
  return records;
}

std::unique_ptr<agent::DdpgAgent> load_checkpoint(const ResolvedConfig& rc, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open checkpoint " + path.string());
  auto agent = make_agent(rc, rc.config.seeds.front());
  try {
    // Compatibility is structural: a run with more episodes or another
    // output directory still evaluates fine.
    agent->load(in, "");
  } catch (const std::exception& e) {
    throw Error("config", path.string() + ": " + e.what());
  }
  return agent;
}

EvalSummary cmd_eval(const ResolvedConfig& rc, const std::optional<fs::path>& checkpoint, std::ostream& log) {
  const fs::path out(rc.config.out);
  write_text_file(out / "resolved_config.json", rc.echo().dump(2) + "\n");
  const std::uint64_t seed = rc.config.seeds.front();
  std::unique_ptr<agent::DdpgAgent> agent;
  if (checkpoint) agent = load_checkpoint(rc, *checkpoint);
  const quantum::NoiseModel noise{rc.config.noise.p, rc.config.noise.trajectories};
  if (noise.enabled() && rc.config.backend != "quantum")
    throw Error("config", "noise applies to the quantum backend only");
  std::vector<Rng> rngs;
  for (int r = 0; r < rc.config.eval_repeats; ++r) rngs.emplace_back(derive_seed(seed, 1000 + static_cast<unsigned>(r)));
  const int n_actions = 2 * rc.scenario.n_machines();
  const auto policy_for = [&](int r) -> agent::Policy {
    if (!agent) return [n_actions](const Vector&) { return Vector(Vector::Zero(n_actions)); };
    return actor_policy(agent->actor(), noise, rngs[static_cast<std::size_t>(r)]);
  };
  auto summary = evaluate(rc, policy_for, rc.config.eval_repeats, seed, out);
  json j = eval_json(summary);
  j["config_hash"] = rc.hash;
  j["policy"] = checkpoint ? checkpoint->string() : std::string("zero-action");
  j["noise_p"] = noise.probability;
  write_text_file(out / "eval.json", j.dump(2) + "\n");
  log << "eval: return " << fmt9(summary.return_mean) << " +- " << fmt9(summary.return_std) << ", final delta_max "
      << fmt9(summary.final_delta_max) << (summary.stable ? " (stable)" : " (unstable)") << '\n';
  return summary;
}

// -------------------------------------------------------------- gradcheck

bool GradcheckReport::pass() const {
  return std::all_of(items.begin(), items.end(), [](const auto& i) { return i.pass; });
}

namespace {

struct Comparison {
  std::vector<double> got, want;
  std::vector<std::string> names;
};

GradcheckItem judge(std::string name, const Comparison& c, double rel, double abs_floor) {
  GradcheckItem item;
  item.name = std::move(name);
  item.tolerance = rel;
  std::vector<std::pair<double, std::size_t>> errs;
  for (std::size_t i = 0; i < c.got.size(); ++i) {
    const double e = std::abs(c.got[i] - c.want[i]) / std::max(std::abs(c.want[i]), abs_floor / rel);
    errs.emplace_back(std::isfinite(e) ? e : std::numeric_limits<double>::infinity(), i);
    item.max_rel_error = std::max(item.max_rel_error, errs.back().first);
  }
  item.pass = item.max_rel_error <= rel;
  std::stable_sort(errs.begin(), errs.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; k < std::min<std::size_t>(5, errs.size()); ++k) {
    const auto i = errs[k].second;
    item.worst.push_back(c.names[i] + ": " + fmt9(c.got[i]) + " vs " + fmt9(c.want[i]));
  }
  return item;
}

void circuit_checks(const std::string& label, const quantum::AnsatzLayout& layout, const quantum::Observable& obs,
                    Rng& rng, double shift, std::vector<GradcheckItem>& items) {
  auto params = quantum::ParameterSet::random(layout, rng);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x(static_cast<std::size_t>(layout.input_dim));
  for (auto& v : x) v = u(rng);
  const auto ps = quantum::param_shift_grad(layout, params, x, obs, shift);
  const auto adj = quantum::adjoint_grad(layout, params, x, obs);
  const double h = 1e-5;
  auto f = [&](const quantum::ParameterSet& p, const std::vector<double>& in) {
    return quantum::expectation(quantum::run_ansatz(layout, p, in), obs);
  };
  Comparison vs_fd, vs_ps;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto plus = params, minus = params;
    plus.values()[k] += h;
    minus.values()[k] -= h;
    const double fd = (f(plus, x) - f(minus, x)) / (2 * h);
    const std::string name = "param " + std::to_string(k);
    vs_fd.got.push_back(ps.params[k]);
    vs_fd.want.push_back(fd);
    vs_fd.names.push_back(name);
    vs_ps.got.push_back(adj.params[k]);
    vs_ps.want.push_back(ps.params[k]);
    vs_ps.names.push_back(name);
  }
  for (std::size_t j = 0; j < x.size(); ++j) {
    auto plus = x, minus = x;
    plus[j] += h;
    minus[j] -= h;
    vs_fd.got.push_back(ps.inputs[j]);
    vs_fd.want.push_back((f(params, plus) - f(params, minus)) / (2 * h));
    vs_fd.names.push_back("input " + std::to_string(j));
  }
  items.push_back(judge(label + ": parameter shift vs finite difference", vs_fd, 1e-6, 1e-9));
  items.push_back(judge(label + ": adjoint vs parameter shift", vs_ps, 1e-9, 1e-12));
}

void dense_check(const std::string& label, const neural::DenseNetwork& proto, Rng& rng,
                 std::vector<GradcheckItem>& items) {
  neural::DenseNetwork net = proto;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix x(net.input_size(), 3), up(net.output_size(), 3);
  for (auto& v : x.reshaped()) v = u(rng);
  for (auto& v : up.reshaped()) v = u(rng);
  neural::DenseNetwork::Tape tape;
  net.forward_batch(x, tape);
  const Vector g = net.backward(tape, up).flat();
  const Vector p0 = net.parameters();
  const Eigen::Index stride = std::max<Eigen::Index>(1, p0.size() / 2000);
  const double h = 1e-6;
  Comparison c;
  for (Eigen::Index k = 0; k < p0.size(); k += stride) {
    Vector p = p0;
    p(k) += h;
    net.set_parameters(p);
    const double fp = (up.array() * net.forward_batch(x).array()).sum();
    p(k) -= 2 * h;
    net.set_parameters(p);
    const double fm = (up.array() * net.forward_batch(x).array()).sum();
    c.got.push_back(g(k));
    c.want.push_back((fp - fm) / (2 * h));
    c.names.push_back("param " + std::to_string(k));
  }
  items.push_back(judge(label + ": backprop vs finite difference", c, 1e-5, 1e-8));
}

}  // namespace

GradcheckReport cmd_gradcheck(const ResolvedConfig& rc, std::ostream& log, double shift) {
  GradcheckReport report;
  const int n = rc.scenario.n_machines();
  for (std::uint64_t seed : rc.config.seeds) {
    Rng rng(derive_seed(seed, 7));
    const std::string tag = " [seed " + std::to_string(seed) + "]";
    const agent::QuantumActor actor(quantum_actor_config(rc.config, n), rng);
    quantum::Observable z;
    std::uniform_real_distribution<double> w(-1.0, 1.0);
    for (int q = 0; q < actor.layout().n_qubits; ++q) z.push_back({quantum::Pauli::Z, q, w(rng)});
    circuit_checks("actor circuit" + tag, actor.layout(), z, rng, shift, report.items);
    const agent::QuantumCritic critic(quantum_critic_config(rc.config, n), rng);
    circuit_checks("critic circuit" + tag, critic.layout(), {{quantum::Pauli::X, 0, 1.0}}, rng, shift,
                   report.items);

    const auto scale = action_scale(rc.config, n);
    const agent::ClassicalActor ca(4 * n + 2, scale, rc.config.classical.actor_hidden, rng);
    dense_check("classical actor" + tag, ca.network(), rng, report.items);
    const agent::ClassicalCritic cc(4 * n + 2, scale, rc.config.classical.critic_hidden, rng);
    dense_check("classical critic" + tag, cc.network(), rng, report.items);
  }

  // <Z> after RY(theta) on |0> is cos(theta).
  quantum::AnsatzLayout one = quantum::AnsatzLayout::chain(1, 1, 0);
  Comparison ry;
  for (double theta : {0.3, 1.2, 2.5, -0.8}) {
    quantum::ParameterSet p(one);
    p.theta(0, 0, 1) = theta;
    const auto g = quantum::param_shift_grad(one, p, {}, {{quantum::Pauli::Z, 0, 1.0}}, shift);
    const double got = g.params[p.theta_index(0, 0, 1)];
    report.single_ry.push_back({theta, {got, -std::sin(theta)}});
    ry.got.push_back(got);
    ry.want.push_back(-std::sin(theta));
    ry.names.push_back("theta " + fmt9(theta));
  }
  report.items.push_back(judge("single-qubit RY vs -sin(theta)", ry, 1e-10, 1e-12));

  json j = {{"pass", report.pass()}, {"shift", shift}, {"checks", json::array()}, {"single_ry", json::array()}};
  for (const auto& item : report.items) {
    log << "gradcheck " << item.name << ": max rel error " << fmt9(item.max_rel_error) << " (tol "
        << fmt9(item.tolerance) << ") " << (item.pass ? "PASS" : "FAIL") << '\n';
    if (!item.pass) {
      for (const auto& wst : item.worst) log << "    " << wst << '\n';
    }
    j["checks"].push_back({{"name", item.name},
                           {"max_rel_error", item.max_rel_error},
                           {"tolerance", item.tolerance},
                           {"pass", item.pass},
                           {"worst", item.worst}});
  }
  for (const auto& [theta, vals] : report.single_ry) {
    log << "single RY theta " << fmt9(theta) << ": shift rule " << fmt9(vals.first) << ", analytic -sin(theta) "
        << fmt9(vals.second) << '\n';
    j["single_ry"].push_back({{"theta", theta}, {"shift_rule", vals.first}, {"analytic", vals.second}});
  }
  write_text_file(fs::path(rc.config.out) / "gradcheck.json", j.dump(2) + "\n");
  return report;
}

// ------------------------------------------------------------ noise sweep

NoiseSweepResult cmd_noise_sweep(const ResolvedConfig& rc, const fs::path& checkpoint, std::ostream& log,
                                 unsigned workers) {
  if (rc.config.backend != "quantum") throw Error("config", "noise-sweep needs the quantum backend");
  const fs::path out(rc.config.out);
  write_text_file(out / "resolved_config.json", rc.echo().dump(2) + "\n");
  const auto agent = load_checkpoint(rc, checkpoint);
  const auto& ps = rc.config.noise.sweep;
  const auto seeds = static_cast<std::size_t>(rc.config.noise.sweep_seeds);
  const std::uint64_t base = rc.config.seeds.front();
  const auto predictor = make_predictor(rc, base);

  NoiseSweepResult result;
  result.returns.assign(ps.size(), std::vector<double>(seeds, 0.0));
  run_parallel(ps.size() * seeds, workers, [&](std::size_t job) {
    const std::size_t i = job / seeds, k = job % seeds;
    agent::DscEnvironment env(rc.scenario, rc.config.environment, predictor);
    Rng rng(derive_seed(base, 5000 + k));
    const quantum::NoiseModel noise{ps[i], rc.config.noise.trajectories};
    result.returns[i][k] = agent::run_episode(env, actor_policy(agent->actor(), noise, rng)).ret;
  });

  std::ostringstream runs;
  runs << "p,seed,return\n";
  for (std::size_t i = 0; i < ps.size(); ++i) {
    result.rows.push_back({ps[i], mean_of(result.returns[i]), sample_std(result.returns[i])});
    for (std::size_t k = 0; k < seeds; ++k) runs << fmt9(ps[i]) << ',' << k << ',' << fmt9(result.returns[i][k]) << '\n';
    log << "noise p " << fmt9(ps[i]) << ": return " << fmt9(result.rows.back().mean_return) << " +- "
        << fmt9(result.rows.back().std_return) << '\n';
  }
  write_text_file(out / "noise_sweep.csv", csv_text([&](std::ostream& os) { write_noise_csv(os, result.rows); }));
  write_text_file(out / "noise_sweep_runs.csv", runs.str());
  return result;
}

double sign_test_p_value(int wins, int trials) {
  double p = 0.0;
  for (int k = wins; k <= trials; ++k) {
    p += std::exp(std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials - k + 1.0) -
                  trials * std::log(2.0));
  }
  return std::min(1.0, p);
}

// ------------------------------------------------------------------- plot

void cmd_plot(const std::vector<fs::path>& inputs, const std::vector<std::string>& labels, const fs::path& output) {
  if (inputs.empty()) throw Error("usage", "plot needs at least one --input CSV");
  if (!labels.empty() && labels.size() != inputs.size())
    throw Error("usage", "give one --label per --input or none");
  std::vector<std::pair<std::string, CsvTable>> tables;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::string label = labels.empty() ? inputs[i].stem().string() : labels[i];
    if (labels.empty() && inputs.size() > 1 && inputs[i].has_parent_path())
      label = inputs[i].parent_path().filename().string() + "/" + label;
    tables.emplace_back(label, read_csv_file(inputs[i]));
  }
  write_text_file(output, render_svg(figure_from_tables(tables)));
}

}  // namespace qdsc::harness
