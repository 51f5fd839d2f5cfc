#pragma once

#include <Eigen/Dense>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdsc::grid {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct Bounds {
  double min = 0.0;
  double max = 0.0;

  [[nodiscard]] double clamp(double v) const { return v < min ? min : (v > max ? max : v); }
  [[nodiscard]] bool contains(double v) const { return v >= min && v <= max; }
};

/// One virtual synchronous generator. Units: inertia in pu*s^2/rad, damping
/// in pu/(rad/s), powers in pu, omega_n in rad/s.
struct MachineParams {
  double inertia = 1.0;
  double damping = 0.0;
  double p_ref = 0.0;
  double ramp_limit = 1.0;  // |dP_ref/dt| bound, pu/s
  double omega_n = 0.0;
  double voltage = 1.0;
  Bounds inertia_bounds{1.0, 1.0};
  Bounds damping_bounds{0.0, 0.0};
  Bounds p_ref_bounds{0.0, 0.0};

  void validate() const;
};

/// Reduced admittance among machine internal nodes, optionally coupled to an
/// infinite bus held at angle 0.
struct NetworkVariant {
  Matrix conductance;
  Matrix susceptance;
  Vector bus_conductance;  // coupling to the infinite bus; empty = none
  Vector bus_susceptance;
  double bus_voltage = 1.0;

  [[nodiscard]] Eigen::Index size() const { return susceptance.rows(); }
  [[nodiscard]] bool has_infinite_bus() const { return bus_susceptance.size() > 0 || bus_conductance.size() > 0; }
  void validate() const;

  /// Lossless network with the given symmetric susceptance.
  static NetworkVariant lossless(Matrix b);
};

inline constexpr const char* kPreFault = "pre_fault";
inline constexpr const char* kFaultOn = "fault_on";
inline constexpr const char* kPostFault = "post_fault";

struct NetworkModel {
  int n_machines = 0;
  std::map<std::string, NetworkVariant> variants;

  [[nodiscard]] const NetworkVariant& variant(const std::string& name) const;
  void validate() const;
};

struct GridState {
  Vector delta;        // rad, unwrapped
  Vector omega;        // rad/s
  Vector p_e;          // pu
  double t = 0.0;      // s
  Vector energy_used;  // pu*s, running integral of |P_e - P_ref|

  [[nodiscard]] Eigen::Index size() const { return delta.size(); }
};

struct SwingDerivatives {
  Vector d_delta;
  Vector d_omega;
};

class SimulationDiverged : public std::runtime_error {
 public:
  explicit SimulationDiverged(double time);
  [[nodiscard]] double time() const noexcept { return time_; }

 private:
  double time_;
};

/// P_e,i = V_i sum_j V_j (G_ij cos d_ij + B_ij sin d_ij), plus the infinite
/// bus term when present.
Vector electrical_power(std::span<const double> delta, const NetworkVariant& network,
                        std::span<const double> voltage);

Vector machine_voltages(std::span<const MachineParams> machines);

/// d delta_i/dt = omega_i - omega_n
/// d omega_i/dt = (P_ref,i - demand_i - P_e,i - D_i (omega_i - omega_n)) / J_i
/// `demand` is an extra constant electrical load per machine (empty = none).
SwingDerivatives swing_rhs(const GridState& state, std::span<const MachineParams> machines,
                           const NetworkVariant& network, std::span<const double> demand = {});

/// One classical RK4 step. P_e is refreshed at the new angles, energy_used is
/// advanced by the trapezoidal rule on |P_e - (P_ref - demand)|, and t by dt.
/// Throws SimulationDiverged if the new state is not finite.
GridState step_rk4(const GridState& state, std::span<const MachineParams> machines,
                   const NetworkVariant& network, double dt, std::span<const double> demand = {});

/// State at rest (omega = omega_n) with the given angles; P_e consistent.
GridState make_state(const Vector& delta, std::span<const MachineParams> machines,
                     const NetworkVariant& network, double t = 0.0);

/// Newton solve for angles with P_e = P_ref - demand, machine 0 pinned at
/// `reference_angle` when there is no infinite bus.
Vector solve_equilibrium(std::span<const MachineParams> machines, const NetworkVariant& network,
                         std::span<const double> demand = {}, double reference_angle = 0.0);

struct ActionOutcome {
  int clip_events = 0;
};

/// Applies [dP_ref_0..n-1, dJ_0..n-1]. dP_ref is clipped to the ramp budget
/// R_max*control_dt, then P_ref and J are clipped to their bounds. D is
/// untouched.
ActionOutcome apply_action(std::vector<MachineParams>& machines, std::span<const double> action,
                           double control_dt);

struct StabilityMetrics {
  double delta_max_deg = 0.0;  // max_ij |delta_i - delta_j|
  double delta_coi_deg = 0.0;  // inertia-weighted mean angle
  int pair_i = 0;              // delta_i - delta_j attains the max
  int pair_j = 0;
};

StabilityMetrics stability_metrics(const GridState& state, std::span<const MachineParams> machines);

/// Inertia-weighted mean of omega - omega_n.
double coi_frequency_deviation(const GridState& state, std::span<const MachineParams> machines);

/// Wraps to (-pi, pi].
double wrap_angle(double rad);

/// Per-block divisors mapping raw observations to the encoding range.
struct ObservationScales {
  double omega = 1.0;  // rad/s
  double delta = 1.0;  // rad
  double rocof = 1.0;  // rad/s^2
  double power = 1.0;  // pu

  [[nodiscard]] Vector scale(const Vector& raw) const;
  [[nodiscard]] Vector unscale(const Vector& scaled) const;
};

/// [omega - omega_n; wrap(delta - delta_COI); (omega_dev - prev_omega_dev)/dt; P_e],
/// each block divided by its scale. `prev_omega_dev` holds omega - omega_n
/// from the previous control step.
Vector observe(const GridState& state, std::span<const MachineParams> machines,
               const Vector& prev_omega_dev, double control_dt, const ObservationScales& scales);

struct ConstraintLimits {
  double omega_max_dev = 1.0;  // rad/s
  double e_max = 1.0;          // pu*s

  void validate() const;
};

struct Violation {
  enum class Kind { Frequency, Energy };
  Kind kind;
  int machine;
  double time;
};

struct ConstraintReport {
  std::vector<Violation> violations;
  [[nodiscard]] bool empty() const { return violations.empty(); }
};

/// Flags |omega_i - omega_n| > omega_max_dev and energy_used_i > e_max
/// (strict inequalities) at the state's time.
ConstraintReport check_constraints(const GridState& state, std::span<const MachineParams> machines,
                                   const ConstraintLimits& limits);

/// Keeps the first violation time per (kind, machine) across a trajectory.
class ConstraintMonitor {
 public:
  void record(const ConstraintReport& report);
  [[nodiscard]] const ConstraintReport& first_violations() const { return first_; }
  [[nodiscard]] bool violated() const { return !first_.empty(); }
  void reset() { first_ = {}; }

 private:
  ConstraintReport first_;
};

}  // namespace qdsc::grid
