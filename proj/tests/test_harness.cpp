#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>

#include "doctest.h"
#include "qdsc/harness/commands.hpp"
#include "qdsc/harness/plot.hpp"
#include "qdsc/quantum/memory_guard.hpp"

using namespace qdsc;
using namespace qdsc::harness;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("qdsc_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// One-layer circuits and ten-step episodes keep these runs to seconds.
json quick_config(const fs::path& out) {
  return {{"episodes", 2},
          {"out", out.string()},
          {"quantum", {{"actor_layers", 1}, {"critic_layers", 1}}},
          {"environment", {{"max_steps", 10}}},
          {"agent", {{"warmup", 4}, {"batch_size", 4}}},
          {"noise", {{"trajectories", 4}, {"sweep_seeds", 2}}}};
}

struct CliResult {
  int status = 0;
  std::string out, err;
};

CliResult run_cli(const std::string& args, const std::string& env = {}) {
  const fs::path dir = fs::temp_directory_path();
  const fs::path out = dir / "qdsc_cli_stdout.txt", err = dir / "qdsc_cli_stderr.txt";
  const std::string cmd = env + " \"" QDSC_CLI_PATH "\" " + args + " >\"" + out.string() + "\" 2>\"" + err.string() + "\"";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(out), slurp(err)};
}

}  // namespace

TEST_CASE("config layering: defaults, config file, then flags") {
  const auto base = resolve_config(json(nullptr));
  CHECK(base.config.backend == "quantum");
  CHECK(base.config.quantum.actor_qubits == 6);
  CHECK(base.config.quantum.actor_layers == 3);
  CHECK(base.scenario.n_machines() == 3);

  const json file = {{"backend", "classical"}, {"episodes", 7}, {"seeds", {4, 5}}};
  const auto from_file = resolve_config(file);
  CHECK(from_file.config.backend == "classical");
  CHECK(from_file.config.episodes == 7);
  CHECK(from_file.config.seeds == std::vector<std::uint64_t>{4, 5});

  Overrides o;
  o.backend = "quantum";
  o.seed = 9;
  o.noise_p = 0.02;
  const auto flagged = resolve_config(file, o);
  CHECK(flagged.config.backend == "quantum");
  CHECK(flagged.config.episodes == 7);
  CHECK(flagged.config.seeds == std::vector<std::uint64_t>{9});
  CHECK(flagged.config.noise.p == doctest::Approx(0.02));
}

TEST_CASE("config hash ignores seeds and output directory but not settings") {
  const auto a = resolve_config(json{{"seeds", {1}}, {"out", "x"}});
  const auto b = resolve_config(json{{"seeds", {2, 3}}, {"out", "y"}});
  const auto c = resolve_config(json{{"episodes", 11}});
  CHECK(a.hash == b.hash);
  CHECK(a.hash != c.hash);
  CHECK(a.hash.size() == 16);
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("config round trips through JSON and rejects unknown keys") {
  const auto rc = resolve_config(json{{"episodes", 12}, {"quantum", {{"critic_layers", 2}}}});
  const auto again = config_from_json(to_json(rc.config));
  CHECK(to_json(again) == to_json(rc.config));

  auto expect_config_error = [](const json& j) {
    try {
      (void)resolve_config(j);
      FAIL("accepted " << j.dump());
    } catch (const Error& e) {
      CHECK(e.category() == "config");
    }
  };
  expect_config_error(json{{"episodez", 3}});
  expect_config_error(json{{"quantum", {{"qubits", 3}}}});
  expect_config_error(json{{"episodes", "many"}});
  expect_config_error(json{{"backend", "analog"}});
  expect_config_error(json{{"quantum", {{"actor_layers", 0}}}});
  expect_config_error(json{{"action_scale", {0.1, 0.1}}});
}

TEST_CASE("echoed config carries the resolved scenario and hash") {
  const auto rc = resolve_config(json(nullptr));
  const json echo = rc.echo();
  CHECK(echo["config_hash"] == rc.hash);
  CHECK(echo["resolved_scenario"]["machines"].size() == 3);
  // Re-resolving the echo (minus its annotations) reproduces the hash.
  json again = echo;
  again.erase("config_hash");
  again.erase("resolved_scenario");
  CHECK(resolve_config(again).hash == rc.hash);
}

TEST_CASE("scenario files resolve relative to the config file") {
  const fs::path dir = scratch("scenario");
  fs::create_directories(dir / "cfg");
  std::ofstream(dir / "cfg" / "exp.json") << json{{"scenario", "../three.json"}}.dump();
  std::ofstream(dir / "three.json") << load_scenario_json("builtin:three-machine").dump();
  const auto rc = resolve_config(std::optional<fs::path>(dir / "cfg" / "exp.json"), {});
  CHECK(rc.hash == resolve_config(json(nullptr)).hash);

  try {
    (void)load_scenario_json("missing.json", dir);
    FAIL("missing scenario accepted");
  } catch (const Error& e) {
    CHECK(e.category() == "io");
  }
}

TEST_CASE("memory guard is exact at the configured cap") {
  const std::size_t cap17 = (std::size_t{1} << 17) * quantum::kBytesPerAmplitude;
  json j = {{"quantum", {{"actor_qubits", 17}}}, {"memory_cap_bytes", cap17}};
  CHECK_NOTHROW((void)resolve_config(j));
  j["memory_cap_bytes"] = cap17 - 1;
  try {
    (void)resolve_config(j);
    FAIL("17 qubits accepted below their footprint");
  } catch (const Error& e) {
    CHECK(e.category() == "memory");
  }

  // Default cap: 16 qubits fit, 17 do not.
  CHECK_NOTHROW((void)resolve_config(json{{"quantum", {{"actor_qubits", 16}}}}));
  CHECK_THROWS_AS((void)resolve_config(json{{"quantum", {{"actor_qubits", 17}}}}), Error);
}

TEST_CASE("QDSC_MEM_CAP_BYTES overrides the default cap") {
  const json j = {{"quantum", {{"actor_qubits", 17}}}};
  ::setenv("QDSC_MEM_CAP_BYTES", std::to_string((std::size_t{1} << 17) * quantum::kBytesPerAmplitude).c_str(), 1);
  CHECK_NOTHROW((void)resolve_config(j));
  ::setenv("QDSC_MEM_CAP_BYTES", "1024", 1);
  CHECK_THROWS_AS((void)resolve_config(json(nullptr)), Error);
  ::unsetenv("QDSC_MEM_CAP_BYTES");
  CHECK_THROWS_AS((void)resolve_config(j), Error);
}

TEST_CASE("paper-scale config is representable but not runnable") {
  const fs::path cfg = fs::path(QDSC_SOURCE_DIR) / "configs" / "paper_scale.json";
  try {
    (void)resolve_config(std::optional<fs::path>(cfg), {});
    FAIL("paper-scale config resolved");
  } catch (const Error& e) {
    CHECK(e.category() == "memory");
    CHECK(std::string(e.what()).find("20 qubits") != std::string::npos);
  }
  ::setenv("QDSC_MEM_CAP_BYTES", "1000000000000", 1);
  try {
    (void)resolve_config(std::optional<fs::path>(cfg), {});
    FAIL("paper-scale config resolved");
  } catch (const Error& e) {
    CHECK(e.category() == "config");
    CHECK(std::string(e.what()).find("non-runnable") != std::string::npos);
  }
  ::unsetenv("QDSC_MEM_CAP_BYTES");
  CHECK_NOTHROW((void)resolve_config(std::optional<fs::path>(fs::path(QDSC_SOURCE_DIR) / "configs" / "desk.json"), {}));
}

TEST_CASE("parameter counts at desk scale") {
  const auto counts = parameter_counts(resolve_config(json(nullptr)));
  // 3 layers x (2 rotations x qubits + 2 scalings x features).
  CHECK(counts.quantum_actor == 3 * (2 * 6 + 2 * 6));
  // Plus the critic's output weight and bias.
  CHECK(counts.quantum_critic == 3 * (2 * 8 + 2 * 8) + 2);
  // 14 -> 128 -> 128 -> 6 and 20 -> 128 -> 128 -> 128 -> 1.
  CHECK(counts.classical_actor == (14 * 128 + 128) + (128 * 128 + 128) + (128 * 6 + 6));
  CHECK(counts.classical_critic == (20 * 128 + 128) + 2 * (128 * 128 + 128) + (128 + 1));
}

TEST_CASE("trajectory and telemetry CSV layout") {
  agent::Trajectory traj;
  traj.push_back({0.5, Vector::Constant(2, 1.0 / 3.0), Vector::Constant(2, 2.0), Vector::Constant(2, -0.125), 12.0,
                  0.1});
  std::ostringstream os;
  write_trajectory_csv(os, traj);
  CHECK(os.str() ==
        "t,delta_0,delta_1,omega_0,omega_1,pe_0,pe_1,delta_max,delta_coi\n"
        "0.5,0.333333333,0.333333333,2,2,-0.125,-0.125,12,0.1\n");

  std::ostringstream tel;
  write_telemetry_csv(tel, {{100, -12.5, 3, 1, 123.456789012, false}});
  CHECK(tel.str() == "episode,steps,return,clip_events,violations,final_delta_max\n0,100,-12.5,3,1,123.456789\n");

  std::ostringstream noise;
  write_noise_csv(noise, {{0.0, 1.5, 0.25}, {0.05, 1.0, 0.5}});
  CHECK(noise.str() == "p,mean_return,std_return\n0,1.5,0.25\n0.05,1,0.5\n");
}

TEST_CASE("CSV parse errors name the line") {
  std::istringstream good("a,b\n1,2\n3,4\n");
  const auto t = read_csv(good, "good.csv");
  CHECK(t.values(t.column("b")) == std::vector<double>{2, 4});

  auto error_of = [](const std::string& text) {
    std::istringstream in(text);
    try {
      (void)read_csv(in, "bad.csv");
    } catch (const Error& e) {
      CHECK(e.category() == "csv");
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(error_of("a,b\n1,2\n3\n").find("bad.csv:3") != std::string::npos);
  CHECK(error_of("a,b\n1,x\n").find("bad.csv:2") != std::string::npos);
  CHECK(error_of("").find("bad.csv:1") != std::string::npos);
}

TEST_CASE("SVG rendering: axes only when empty, labelled bands, deterministic") {
  const std::string empty = render_svg({"Empty", "x", "y", {}});
  CHECK(empty.rfind("<svg", 0) == 0);
  CHECK(empty.find("</svg>") != std::string::npos);
  CHECK(empty.find("<line") != std::string::npos);
  CHECK(empty.find("<polyline") == std::string::npos);

  CsvTable a{{"episode", "steps", "return", "clip_events", "violations", "final_delta_max"}, {}};
  CsvTable b = a;
  for (int e = 0; e < 40; ++e) {
    a.rows.push_back({double(e), 100, std::sin(e * 0.3) + e, 0, 0, 100});
    b.rows.push_back({double(e), 100, std::cos(e * 0.2) + 0.5 * e, 0, 0, 100});
  }
  const auto fig = figure_from_tables({{"quantum", a}, {"classical <dense>", b}});
  const std::string svg = render_svg(fig);
  CHECK(svg == render_svg(figure_from_tables({{"quantum", a}, {"classical <dense>", b}})));
  const auto count = [&](const std::string& needle) {
    std::size_t n = 0;
    for (auto p = svg.find(needle); p != std::string::npos; p = svg.find(needle, p + 1)) ++n;
    return n;
  };
  CHECK(count("<polyline") == 2);
  CHECK(count("<polygon") == 2);
  CHECK(svg.find(">quantum<") != std::string::npos);
  CHECK(svg.find("classical &lt;dense&gt;") != std::string::npos);
}

TEST_CASE("rolling mean and std") {
  const auto [m, s] = rolling_mean_std({1, 3, 5, 7}, 2);
  CHECK(m == std::vector<double>{1, 2, 4, 6});
  CHECK(s == std::vector<double>{0, 1, 1, 1});
}

TEST_CASE("sign test tail probabilities") {
  CHECK(sign_test_p_value(10, 10) == doctest::Approx(1.0 / 1024).epsilon(1e-12));
  CHECK(sign_test_p_value(9, 10) == doctest::Approx(11.0 / 1024).epsilon(1e-12));
  CHECK(sign_test_p_value(8, 10) == doctest::Approx(56.0 / 1024).epsilon(1e-12));
  CHECK(sign_test_p_value(0, 10) == doctest::Approx(1.0));
}

TEST_CASE("run_parallel visits every index once and propagates failures") {
  std::vector<int> hits(50, 0);
  run_parallel(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  CHECK_THROWS_AS(run_parallel(8, 3, [](std::size_t i) { if (i == 5) throw std::runtime_error("boom"); }),
                  std::runtime_error);
}

TEST_CASE("training is deterministic per seed and independent of worker count") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  json j = quick_config(a);
  j["seeds"] = {2, 1};
  std::ostringstream log;
  const auto ra = cmd_train(resolve_config(j), log, 1);
  j["out"] = b.string();
  const auto rb = cmd_train(resolve_config(j), log, 2);
  REQUIRE(ra.size() == 2);
  CHECK(ra[0].seed == 1);
  CHECK(ra[1].seed == 2);
  for (const char* seed : {"seed_1", "seed_2"}) {
    CHECK(slurp(a / seed / "telemetry.csv") == slurp(b / seed / "telemetry.csv"));
    CHECK(slurp(a / seed / "checkpoint.txt") == slurp(b / seed / "checkpoint.txt"));
    CHECK(slurp(a / seed / "trajectory_0.csv") == slurp(b / seed / "trajectory_0.csv"));
  }
  CHECK(ra[0].returns() == rb[0].returns());
  CHECK(ra[0].returns() != ra[1].returns());
  CHECK(fs::exists(a / "resolved_config.json"));
  const json summary = json::parse(slurp(a / "summary.json"));
  CHECK(summary["runs"][0]["seed"] == 1);
  CHECK(log.str().find("final mean return") != std::string::npos);

  const auto tel = read_csv_file(a / "seed_1" / "telemetry.csv");
  CHECK(tel.rows.size() == 2);
  const auto traj = read_csv_file(a / "seed_1" / "trajectory_0.csv");
  CHECK(traj.header.size() == 1 + 3 * 3 + 2);
}

TEST_CASE("zero step sizes leave the checkpoint at its initialization") {
  const fs::path out = scratch("frozen");
  json j = quick_config(out);
  j["episodes"] = 1;
  j["agent"]["actor_lr"] = 0.0;
  j["agent"]["critic_lr"] = 0.0;
  j["agent"]["noise_scale"] = 0.0;
  const auto rc = resolve_config(j);
  std::ostringstream log;
  const auto rec = cmd_train(rc, log, 1).front();

  const auto fresh = make_agent(rc, 1);
  const auto loaded = load_checkpoint(rc, rec.checkpoint);
  CHECK(loaded->actor().parameters() == fresh->actor().parameters());
  CHECK(loaded->critic().parameters() == fresh->critic().parameters());

  Rng unused(0);
  const auto untrained = evaluate(rc, [&](int) { return actor_policy(fresh->actor(), {}, unused); }, 1, 1);
  CHECK(rec.returns().front() == untrained.return_mean);
}

TEST_CASE("checkpoint from another configuration is a config error") {
  const fs::path out = scratch("mismatch");
  json j = quick_config(out);
  j["episodes"] = 1;
  std::ostringstream log;
  const auto rec = cmd_train(resolve_config(j), log, 1).front();
  j["quantum"]["actor_layers"] = 2;
  try {
    (void)load_checkpoint(resolve_config(j), rec.checkpoint);
    FAIL("mismatched checkpoint loaded");
  } catch (const Error& e) {
    CHECK(e.category() == "config");
  }
}

TEST_CASE("eval: zero action is unstable and repeats are identical") {
  const fs::path out = scratch("eval");
  json j = quick_config(out);
  j["eval_repeats"] = 3;
  std::ostringstream log;
  const auto summary = cmd_eval(resolve_config(j), std::nullopt, log);
  CHECK_FALSE(summary.stable);
  CHECK(summary.final_delta_max > 360.0);
  CHECK(summary.return_std == 0.0);
  CHECK(slurp(out / "trajectory_0.csv") == slurp(out / "trajectory_1.csv"));
  CHECK(slurp(out / "trajectory_1.csv") == slurp(out / "trajectory_2.csv"));
  const json report = json::parse(slurp(out / "eval.json"));
  CHECK(report["stable"] == false);
  CHECK(report["runs"].size() == 3);
}

TEST_CASE("noise sweep: one row per p, p = 0 equals the noiseless evaluation") {
  const fs::path out = scratch("noise");
  json j = quick_config(out / "train");
  j["episodes"] = 1;
  j["noise"]["sweep"] = {0.0, 0.05, 0.2};
  std::ostringstream log;
  const auto rec = cmd_train(resolve_config(j), log, 1).front();
  j["out"] = (out / "sweep").string();
  const auto rc = resolve_config(j);
  const auto sweep = cmd_noise_sweep(rc, rec.checkpoint, log, 2);
  REQUIRE(sweep.rows.size() == 3);
  const auto agent = load_checkpoint(rc, rec.checkpoint);
  Rng unused(0);
  const auto clean = evaluate(rc, [&](int) { return actor_policy(agent->actor(), {}, unused); }, 1, 1);
  CHECK(sweep.rows[0].mean_return == clean.return_mean);
  CHECK(sweep.rows[0].std_return == 0.0);
  CHECK(read_csv_file(out / "sweep" / "noise_sweep.csv").rows.size() == 3);

  j["backend"] = "classical";
  CHECK_THROWS_AS(cmd_noise_sweep(resolve_config(j), rec.checkpoint, log, 1), Error);
}

TEST_CASE("gradcheck passes on the default circuits and fails with a corrupted shift") {
  json j = quick_config(scratch("grad"));
  j["classical"] = {{"actor_hidden", {16}}, {"critic_hidden", {16, 16}}};
  const auto rc = resolve_config(j);
  std::ostringstream log;
  const auto good = cmd_gradcheck(rc, log);
  CHECK(good.pass());
  for (const auto& item : good.items) CHECK(item.max_rel_error < 1e-6);
  REQUIRE(good.single_ry.size() == 4);
  for (const auto& [theta, vals] : good.single_ry) CHECK(vals.first == doctest::Approx(-std::sin(theta)));

  const auto bad = cmd_gradcheck(rc, log, std::numbers::pi / 3);
  CHECK_FALSE(bad.pass());
  const auto failing = std::count_if(bad.items.begin(), bad.items.end(), [](auto& i) { return !i.pass; });
  CHECK(failing >= 3);
  for (const auto& item : bad.items)
    if (!item.pass) CHECK_FALSE(item.worst.empty());
}

TEST_CASE("plot writes a deterministic SVG from telemetry files") {
  const fs::path out = scratch("plot");
  fs::create_directories(out);
  std::ofstream(out / "t.csv") << "episode,steps,return,clip_events,violations,final_delta_max\n0,10,1,0,0,5\n1,10,2,0,0,5\n";
  cmd_plot({out / "t.csv"}, {"run"}, out / "a.svg");
  cmd_plot({out / "t.csv"}, {"run"}, out / "b.svg");
  CHECK(slurp(out / "a.svg") == slurp(out / "b.svg"));
  std::ofstream(out / "bad.csv") << "episode,return\n0,1\n1\n";
  try {
    cmd_plot({out / "bad.csv"}, {}, out / "c.svg");
    FAIL("malformed CSV plotted");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find(":3") != std::string::npos);
  }
}

TEST_CASE("CLI failures print one machine-parsable line and exit nonzero") {
  const std::regex line(R"(qdsc-error: [a-z]+: [^\n]*\n)");
  auto check_failure = [&](const std::string& args, const std::string& category, const std::string& env = {}) {
    const auto r = run_cli(args, env);
    CHECK_MESSAGE(r.status != 0, args);
    CHECK_MESSAGE(std::regex_match(r.err, line), args << " -> " << r.err);
    CHECK_MESSAGE(r.err.rfind("qdsc-error: " + category + ":", 0) == 0, args << " -> " << r.err);
  };
  const std::string tmp = scratch("cli").string();
  check_failure("", "usage");
  check_failure("train --backend analog", "usage");
  check_failure("train --config /nonexistent/cfg.json", "io");
  check_failure("eval --out " + tmp, "usage");
  check_failure("eval --zero-action --out " + tmp, "memory", "QDSC_MEM_CAP_BYTES=64");
  check_failure("eval --zero-action --scenario /nonexistent.json", "io");
  check_failure("eval --checkpoint /nonexistent/ck.txt --out " + tmp, "io");
  check_failure("plot --input /nonexistent.csv --out " + tmp + "/x.svg", "io");
  check_failure("gradcheck --episodes 1 --shift 1.0471975511965976 --out " + tmp, "gradcheck");
  check_failure("train --config " QDSC_SOURCE_DIR "/configs/paper_scale.json", "memory");

  CHECK(run_cli("--help").status == 0);
  const auto ok = run_cli("eval --zero-action --out " + tmp);
  CHECK(ok.status == 0);
  CHECK(ok.out.find("unstable") != std::string::npos);
  CHECK(fs::exists(fs::path(tmp) / "resolved_config.json"));
}
