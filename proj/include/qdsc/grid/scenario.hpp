#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "qdsc/grid/dynamics.hpp"

namespace qdsc::grid {

struct LoadStep {
  int machine = 0;
  double magnitude = 0.0;  // pu of extra demand
  double time = 0.0;       // s
};

struct EventScript {
  double fault_apply = 0.0;
  double fault_clear = 0.0;
  std::optional<LoadStep> load_step;
  double horizon = 0.0;
  double control_dt = 0.01;
  double sim_dt = 0.001;

  void validate(int n_machines) const;
  /// sim_dt steps per control step.
  [[nodiscard]] int substeps() const;
};

struct Scenario {
  std::string name;
  std::vector<MachineParams> machines;
  NetworkModel network;
  EventScript events;
  ConstraintLimits limits;
  ObservationScales scales;

  [[nodiscard]] int n_machines() const { return static_cast<int>(machines.size()); }
  void validate() const;
};

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
Scenario load_scenario(const std::filesystem::path& path);

/// Built-in desk-scale fixture: three VSGs on a lossless reduced network,
/// fault near machine 0, load step on machine 1.
Scenario three_machine_fixture();

/// Single machine against an infinite bus, used for the analytic checks.
/// `inertia` also sets the bounds; `damping` may be zero.
Scenario smib_fixture(double inertia, double damping, double fault_duration);

/// Steps a scenario through its event script: picks the network variant by
/// time, applies the load step, and advances in control-step chunks.
class GridSimulation {
 public:
  explicit GridSimulation(Scenario scenario);

  /// Pre-fault equilibrium at t = 0 with the scenario's initial machines.
  void reset();

  /// Advances one control interval (sim_dt substeps). Propagates
  /// SimulationDiverged.
  void advance_control_step();

  [[nodiscard]] const GridState& state() const { return state_; }
  [[nodiscard]] const std::vector<MachineParams>& machines() const { return machines_; }
  std::vector<MachineParams>& machines() { return machines_; }
  [[nodiscard]] const Scenario& scenario() const { return scenario_; }

  [[nodiscard]] const std::string& variant_name_at(double t) const;
  [[nodiscard]] const NetworkVariant& variant_at(double t) const;
  [[nodiscard]] Vector demand_at(double t) const;

  [[nodiscard]] bool cleared() const;   // t >= fault_clear
  [[nodiscard]] bool finished() const;  // t >= horizon
  [[nodiscard]] long step_count() const { return steps_; }

  /// State and machines snapshot, for lookahead rollouts.
  struct Snapshot {
    GridState state;
    std::vector<MachineParams> machines;
    long steps;
  };
  [[nodiscard]] Snapshot snapshot() const { return {state_, machines_, steps_}; }
  void restore(const Snapshot& s);

 private:
  Scenario scenario_;
  std::vector<MachineParams> machines_;
  GridState state_;
  long steps_ = 0;
};

}  // namespace qdsc::grid
