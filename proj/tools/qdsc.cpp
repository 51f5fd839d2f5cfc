// qdsc: train, evaluate and inspect quantum/classical DDPG dynamic security
// controllers on small VSG test systems.

#include <cstdlib>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qdsc/harness/commands.hpp"

namespace {

namespace fs = std::filesystem;
using namespace qdsc::harness;

struct CommonFlags {
  std::optional<std::string> config, scenario, backend, out;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<double> noise_p;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "Experiment config (JSON)");
    app->add_option("--scenario", scenario, "Scenario file or builtin:three-machine | builtin:smib");
    app->add_option("--backend", backend, "Agent backend")->check(CLI::IsMember({"quantum", "classical"}));
    app->add_option("--seed", seed, "Single seed (replaces the configured seed list)");
    app->add_option("--episodes", episodes, "Training episodes")->check(CLI::PositiveNumber);
    app->add_option("--out", out, "Output directory");
    app->add_option("--noise-p", noise_p, "Depolarizing probability at evaluation")->check(CLI::Range(0.0, 1.0));
  }

  [[nodiscard]] ResolvedConfig resolve() const {
    Overrides o{scenario, backend, seed, episodes, out, noise_p};
    return resolve_config(config ? std::optional<fs::path>(*config) : std::nullopt, o);
  }
};

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int fail(const std::string& category, const std::string& message) {
  std::cerr << "qdsc-error: " << category << ": " << one_line(message) << '\n';
  return category == "usage" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum-enhanced DDPG for dynamic security control"};
  app.require_subcommand(1);
  unsigned workers = 0;
  app.add_option("--workers", workers, "Parallel workers for seed sweeps (0: all cores)");

  CommonFlags train_flags, eval_flags, grad_flags, noise_flags;

  auto* train = app.add_subcommand("train", "Train one agent per seed");
  train_flags.attach(train);

  auto* eval = app.add_subcommand("eval", "Greedy rollouts of a checkpoint or the zero-action baseline");
  eval_flags.attach(eval);
  std::string eval_checkpoint;
  bool zero_action = false;
  std::optional<int> repeats;
  auto* ck = eval->add_option("--checkpoint", eval_checkpoint, "Checkpoint written by train");
  eval->add_flag("--zero-action", zero_action, "Evaluate the do-nothing policy")->excludes(ck);
  eval->add_option("--repeats", repeats, "Evaluation repeats")->check(CLI::PositiveNumber);

  auto* grad = app.add_subcommand("gradcheck", "Analytic gradients against finite differences");
  grad_flags.attach(grad);
  double shift = std::numbers::pi / 2;
  grad->add_option("--shift", shift)->group("");  // test hook

  auto* noise = app.add_subcommand("noise-sweep", "Evaluate a checkpoint across depolarizing probabilities");
  noise_flags.attach(noise);
  std::string noise_checkpoint;
  std::vector<double> sweep;
  noise->add_option("--checkpoint", noise_checkpoint, "Checkpoint written by train")->required();
  noise->add_option("--p", sweep, "Probabilities (replaces the configured list)");

  auto* plot = app.add_subcommand("plot", "Render CSV results as SVG");
  std::vector<std::string> inputs, labels;
  std::string plot_out = "plot.svg";
  plot->add_option("--input", inputs, "Telemetry, trajectory or noise-sweep CSV (repeatable)")->required();
  plot->add_option("--label", labels, "Legend label per input");
  plot->add_option("--out", plot_out, "Output SVG path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  try {
    if (train->parsed()) {
      const auto rc = train_flags.resolve();
      const auto records = cmd_train(rc, std::cout, workers);
      (void)records;
    } else if (eval->parsed()) {
      if (eval_checkpoint.empty() && !zero_action) throw Error("usage", "eval needs --checkpoint or --zero-action");
      auto rc = eval_flags.resolve();
      if (repeats) rc.config.eval_repeats = *repeats;
      cmd_eval(rc, eval_checkpoint.empty() ? std::nullopt : std::optional<fs::path>(eval_checkpoint), std::cout);
    } else if (grad->parsed()) {
      const auto rc = grad_flags.resolve();
      const auto report = cmd_gradcheck(rc, std::cout, shift);
      if (!report.pass()) throw Error("gradcheck", "analytic gradients disagree with finite differences");
    } else if (noise->parsed()) {
      auto rc = noise_flags.resolve();
      if (!sweep.empty()) rc.config.noise.sweep = sweep;
      cmd_noise_sweep(rc, noise_checkpoint, std::cout, workers);
    } else if (plot->parsed()) {
      std::vector<fs::path> paths(inputs.begin(), inputs.end());
      cmd_plot(paths, labels, plot_out);
    }
  } catch (const Error& e) {
    return fail(e.category(), e.what());
  } catch (const std::invalid_argument& e) {
    return fail("config", e.what());
  } catch (const std::exception& e) {
    return fail("internal", e.what());
  }
  return 0;
}
