#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "qdsc/harness/config.hpp"
#include "qdsc/harness/io.hpp"

namespace qdsc::harness {

struct EvalSummary {
  std::vector<agent::EpisodeStats> runs;
  double return_mean = 0.0;
  double return_std = 0.0;   // sample standard deviation over runs
  double final_delta_max = 0.0;  // worst over runs
  bool stable = false;           // TIS label 0 on every run
};

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<agent::EpisodeStats> episodes;
  double wall_time_s = 0.0;
  EvalSummary eval;  // greedy evaluation after training
  std::filesystem::path dir, telemetry, checkpoint, trajectory;

  [[nodiscard]] std::vector<double> returns() const;
};

/// Runs `count` parallel jobs on up to `workers` threads (0: hardware
/// concurrency). Jobs must only touch their own state.
void run_parallel(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& job);

/// Trains one seed and writes telemetry.csv, checkpoint.txt, trajectory.csv
/// and run.json into `dir`.
RunRecord train_seed(const ResolvedConfig& rc, std::uint64_t seed, const std::filesystem::path& dir,
                     std::ostream* log = nullptr);

/// Every configured seed into <out>/seed_<s>/, plus resolved_config.json and
/// summary.json in <out>. Records are sorted by seed.
std::vector<RunRecord> cmd_train(const ResolvedConfig& rc, std::ostream& log, unsigned workers = 0);

/// Greedy rollouts of `policy_for(repeat)`; trajectories go to
/// <dir>/trajectory_<repeat>.csv when `dir` is set.
EvalSummary evaluate(const ResolvedConfig& rc, const std::function<agent::Policy(int)>& policy_for, int repeats,
                     std::uint64_t seed, const std::optional<std::filesystem::path>& dir = {});

/// Policy of a trained actor; with noise enabled each call draws trajectories
/// from `rng`.
agent::Policy actor_policy(const agent::Actor& actor, const quantum::NoiseModel& noise, Rng& rng);

/// Loads a checkpoint written by train; a backend or dimension mismatch is a
/// config error.
std::unique_ptr<agent::DdpgAgent> load_checkpoint(const ResolvedConfig& rc, const std::filesystem::path& path);

/// Evaluates a checkpoint (or the zero-action baseline when `checkpoint` is
/// empty) and writes trajectories and eval.json into <out>.
EvalSummary cmd_eval(const ResolvedConfig& rc, const std::optional<std::filesystem::path>& checkpoint,
                     std::ostream& log);

struct GradcheckItem {
  std::string name;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool pass = true;
  std::vector<std::string> worst;  // "index: got vs reference"
};
struct GradcheckReport {
  std::vector<GradcheckItem> items;
  std::vector<std::pair<double, std::pair<double, double>>> single_ry;  // theta -> (shift rule, -sin theta)
  [[nodiscard]] bool pass() const;
};

/// Parameter shift and adjoint against central differences on the configured
/// circuits, backprop against central differences on the configured dense
/// nets, and the one-qubit RY case against -sin(theta).
GradcheckReport cmd_gradcheck(const ResolvedConfig& rc, std::ostream& log, double shift = std::numbers::pi / 2);

struct NoiseSweepResult {
  std::vector<NoiseRow> rows;
  std::vector<std::vector<double>> returns;  // [p index][seed index]
};

/// Evaluates the checkpoint at every p with `sweep_seeds` noise seeds (common
/// across p) and writes noise_sweep.csv and noise_sweep_runs.csv into <out>.
NoiseSweepResult cmd_noise_sweep(const ResolvedConfig& rc, const std::filesystem::path& checkpoint,
                                 std::ostream& log, unsigned workers = 0);

/// One SVG from CSVs of the same kind.
void cmd_plot(const std::vector<std::filesystem::path>& inputs, const std::vector<std::string>& labels,
              const std::filesystem::path& output);

/// One-sided sign test: probability of at least `wins` successes out of
/// `trials` fair coin flips.
double sign_test_p_value(int wins, int trials);

}  // namespace qdsc::harness
