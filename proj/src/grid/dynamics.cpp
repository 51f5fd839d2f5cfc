#include "qdsc/grid/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace qdsc::grid {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument(what);
}

double demand_at(std::span<const double> demand, Eigen::Index i) {
  return demand.empty() ? 0.0 : demand[static_cast<std::size_t>(i)];
}

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

}  // namespace

void MachineParams::validate() const {
  require(inertia_bounds.min > 0.0, "machine: J_min must be positive");
  require(inertia_bounds.min <= inertia_bounds.max, "machine: J bounds out of order");
  require(damping_bounds.min <= damping_bounds.max, "machine: D bounds out of order");
  require(p_ref_bounds.min <= p_ref_bounds.max, "machine: P_ref bounds out of order");
  require(inertia_bounds.contains(inertia), "machine: initial J outside bounds");
  require(damping_bounds.contains(damping), "machine: initial D outside bounds");
  require(p_ref_bounds.contains(p_ref), "machine: initial P_ref outside bounds");
  require(ramp_limit >= 0.0, "machine: ramp limit must be non-negative");
  require(std::isfinite(omega_n) && std::isfinite(voltage), "machine: non-finite omega_n or voltage");
}

void NetworkVariant::validate() const {
  const Eigen::Index n = susceptance.rows();
  require(susceptance.cols() == n, "network: B must be square");
  require(conductance.rows() == n && conductance.cols() == n, "network: G and B dimensions differ");
  const double tol = 1e-12 * (1.0 + susceptance.norm() + conductance.norm());
  require((susceptance - susceptance.transpose()).norm() <= tol, "network: B must be symmetric");
  require((conductance - conductance.transpose()).norm() <= tol, "network: G must be symmetric");
  if (has_infinite_bus()) {
    require(bus_susceptance.size() == n && bus_conductance.size() == n,
            "network: infinite-bus coupling must have one entry per machine");
  }
}

NetworkVariant NetworkVariant::lossless(Matrix b) {
  NetworkVariant v;
  v.conductance = Matrix::Zero(b.rows(), b.cols());
  v.susceptance = std::move(b);
  return v;
}

const NetworkVariant& NetworkModel::variant(const std::string& name) const {
  const auto it = variants.find(name);
  if (it == variants.end()) throw std::invalid_argument("network: unknown variant '" + name + "'");
  return it->second;
}

void NetworkModel::validate() const {
  require(n_machines >= 1, "network: need at least one machine");
  for (const auto& [name, v] : variants) {
    v.validate();
    require(v.size() == n_machines, "network: variant '" + name + "' has wrong dimension");
  }
}

SimulationDiverged::SimulationDiverged(double time)
    : std::runtime_error("simulation diverged at t = " + std::to_string(time) + " s"), time_(time) {}

Vector electrical_power(std::span<const double> delta, const NetworkVariant& network,
                        std::span<const double> voltage) {
  const auto n = static_cast<Eigen::Index>(delta.size());
  require(network.size() == n && static_cast<Eigen::Index>(voltage.size()) == n,
          "electrical_power: dimension mismatch");
  Vector p = Vector::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double di = delta[static_cast<std::size_t>(i)];
    double acc = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double dij = di - delta[static_cast<std::size_t>(j)];
      acc += voltage[static_cast<std::size_t>(j)] *
             (network.conductance(i, j) * std::cos(dij) + network.susceptance(i, j) * std::sin(dij));
    }
    if (network.has_infinite_bus()) {
      acc += network.bus_voltage *
             (network.bus_conductance(i) * std::cos(di) + network.bus_susceptance(i) * std::sin(di));
    }
    p(i) = voltage[static_cast<std::size_t>(i)] * acc;
  }
  return p;
}

Vector machine_voltages(std::span<const MachineParams> machines) {
  Vector v(static_cast<Eigen::Index>(machines.size()));
  for (std::size_t i = 0; i < machines.size(); ++i) v(static_cast<Eigen::Index>(i)) = machines[i].voltage;
  return v;
}

namespace {

SwingDerivatives rhs_at(const Vector& delta, const Vector& omega, std::span<const MachineParams> machines,
                        const NetworkVariant& network, const Vector& voltage, std::span<const double> demand) {
  const Vector pe = electrical_power(std::span<const double>(delta.data(), static_cast<std::size_t>(delta.size())),
                                     network,
                                     std::span<const double>(voltage.data(), static_cast<std::size_t>(voltage.size())));
  SwingDerivatives d{Vector(delta.size()), Vector(delta.size())};
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    const auto& m = machines[static_cast<std::size_t>(i)];
    const double dev = omega(i) - m.omega_n;
    d.d_delta(i) = dev;
    d.d_omega(i) = (m.p_ref - demand_at(demand, i) - pe(i) - m.damping * dev) / m.inertia;
  }
  return d;
}

}  // namespace

SwingDerivatives swing_rhs(const GridState& state, std::span<const MachineParams> machines,
                           const NetworkVariant& network, std::span<const double> demand) {
  require(static_cast<Eigen::Index>(machines.size()) == state.size(), "swing_rhs: dimension mismatch");
  return rhs_at(state.delta, state.omega, machines, network, machine_voltages(machines), demand);
}

GridState step_rk4(const GridState& state, std::span<const MachineParams> machines,
                   const NetworkVariant& network, double dt, std::span<const double> demand) {
  require(dt > 0.0, "step_rk4: dt must be positive");
  require(static_cast<Eigen::Index>(machines.size()) == state.size(), "step_rk4: dimension mismatch");
  require(demand.empty() || static_cast<Eigen::Index>(demand.size()) == state.size(),
          "step_rk4: demand dimension mismatch");
  const Vector v = machine_voltages(machines);
  const auto k1 = rhs_at(state.delta, state.omega, machines, network, v, demand);
  const auto k2 = rhs_at(state.delta + 0.5 * dt * k1.d_delta, state.omega + 0.5 * dt * k1.d_omega, machines,
                         network, v, demand);
  const auto k3 = rhs_at(state.delta + 0.5 * dt * k2.d_delta, state.omega + 0.5 * dt * k2.d_omega, machines,
                         network, v, demand);
  const auto k4 = rhs_at(state.delta + dt * k3.d_delta, state.omega + dt * k3.d_omega, machines, network, v,
                         demand);

  GridState next;
  next.delta = state.delta + dt / 6.0 * (k1.d_delta + 2.0 * k2.d_delta + 2.0 * k3.d_delta + k4.d_delta);
  next.omega = state.omega + dt / 6.0 * (k1.d_omega + 2.0 * k2.d_omega + 2.0 * k3.d_omega + k4.d_omega);
  next.t = state.t + dt;
  if (!next.delta.allFinite() || !next.omega.allFinite()) throw SimulationDiverged(next.t);
  next.p_e = electrical_power(std::span<const double>(next.delta.data(), static_cast<std::size_t>(next.delta.size())),
                              network, std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
  next.energy_used = state.energy_used.size() == state.size() ? state.energy_used : Vector::Zero(state.size());
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    const double ref = machines[static_cast<std::size_t>(i)].p_ref - demand_at(demand, i);
    const double before = state.p_e.size() == state.size() ? std::abs(state.p_e(i) - ref) : 0.0;
    next.energy_used(i) += 0.5 * dt * (before + std::abs(next.p_e(i) - ref));
  }
  if (!next.p_e.allFinite() || !next.energy_used.allFinite()) throw SimulationDiverged(next.t);
  return next;
}

GridState make_state(const Vector& delta, std::span<const MachineParams> machines,
                     const NetworkVariant& network, double t) {
  require(static_cast<Eigen::Index>(machines.size()) == delta.size(), "make_state: dimension mismatch");
  GridState s;
  s.delta = delta;
  s.omega.resize(delta.size());
  for (Eigen::Index i = 0; i < delta.size(); ++i) s.omega(i) = machines[static_cast<std::size_t>(i)].omega_n;
  const Vector v = machine_voltages(machines);
  s.p_e = electrical_power(std::span<const double>(delta.data(), static_cast<std::size_t>(delta.size())), network,
                           std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
  s.t = t;
  s.energy_used = Vector::Zero(delta.size());
  return s;
}

Vector solve_equilibrium(std::span<const MachineParams> machines, const NetworkVariant& network,
                         std::span<const double> demand, double reference_angle) {
  const auto n = static_cast<Eigen::Index>(machines.size());
  require(network.size() == n, "solve_equilibrium: dimension mismatch");
  const Vector v = machine_voltages(machines);
  const bool bus = network.has_infinite_bus();
  const Eigen::Index first = bus ? 0 : 1;
  const Eigen::Index m = n - first;
  Vector delta = Vector::Constant(n, reference_angle);
  if (m == 0) return delta;
  for (int iter = 0; iter < 100; ++iter) {
    const Vector pe = electrical_power(std::span<const double>(delta.data(), static_cast<std::size_t>(n)), network,
                                       std::span<const double>(v.data(), static_cast<std::size_t>(n)));
    Vector f(m);
    for (Eigen::Index i = first; i < n; ++i) {
      f(i - first) = pe(i) - (machines[static_cast<std::size_t>(i)].p_ref - demand_at(demand, i));
    }
    if (f.lpNorm<Eigen::Infinity>() < 1e-13) return delta;
    Matrix jac = Matrix::Zero(m, m);
    for (Eigen::Index i = first; i < n; ++i) {
      double diag = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (k == i) continue;
        const double dik = delta(i) - delta(k);
        const double dpk = v(i) * v(k) * (network.conductance(i, k) * std::sin(dik) -
                                          network.susceptance(i, k) * std::cos(dik));
        diag -= dpk;
        if (k >= first) jac(i - first, k - first) = dpk;
      }
      if (bus) {
        diag += v(i) * network.bus_voltage *
                (-network.bus_conductance(i) * std::sin(delta(i)) + network.bus_susceptance(i) * std::cos(delta(i)));
      }
      jac(i - first, i - first) = diag;
    }
    const Vector step = jac.fullPivLu().solve(f);
    for (Eigen::Index i = first; i < n; ++i) delta(i) -= step(i - first);
    if (!delta.allFinite()) break;
  }
  throw std::runtime_error("solve_equilibrium: Newton iteration did not converge");
}

ActionOutcome apply_action(std::vector<MachineParams>& machines, std::span<const double> action,
                           double control_dt) {
  const std::size_t n = machines.size();
  require(action.size() == 2 * n, "apply_action: expected " + std::to_string(2 * n) + " entries");
  ActionOutcome out;
  for (std::size_t i = 0; i < n; ++i) {
    auto& m = machines[i];
    const double budget = m.ramp_limit * control_dt;
    double dp = action[i];
    if (dp > budget || dp < -budget) {
      dp = dp > 0 ? budget : -budget;
      ++out.clip_events;
    }
    const double p = m.p_ref + dp;
    m.p_ref = m.p_ref_bounds.clamp(p);
    if (m.p_ref != p) ++out.clip_events;
    const double j = m.inertia + action[n + i];
    m.inertia = m.inertia_bounds.clamp(j);
    if (m.inertia != j) ++out.clip_events;
  }
  return out;
}

StabilityMetrics stability_metrics(const GridState& state, std::span<const MachineParams> machines) {
  const Eigen::Index n = state.size();
  require(n >= 2, "stability_metrics: need at least two machines");
  require(static_cast<Eigen::Index>(machines.size()) == n, "stability_metrics: dimension mismatch");
  StabilityMetrics m;
  Eigen::Index imax = 0, imin = 0;
  state.delta.maxCoeff(&imax);
  state.delta.minCoeff(&imin);
  m.delta_max_deg = (state.delta(imax) - state.delta(imin)) * kRadToDeg;
  m.pair_i = static_cast<int>(imax);
  m.pair_j = static_cast<int>(imin);
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    num += machines[static_cast<std::size_t>(i)].inertia * state.delta(i);
    den += machines[static_cast<std::size_t>(i)].inertia;
  }
  m.delta_coi_deg = num / den * kRadToDeg;
  return m;
}

double coi_frequency_deviation(const GridState& state, std::span<const MachineParams> machines) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    const auto& m = machines[static_cast<std::size_t>(i)];
    num += m.inertia * (state.omega(i) - m.omega_n);
    den += m.inertia;
  }
  return num / den;
}

double wrap_angle(double rad) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(rad, two_pi);
  if (w <= -std::numbers::pi) w += two_pi;
  if (w > std::numbers::pi) w -= two_pi;
  return w;
}

Vector ObservationScales::scale(const Vector& raw) const {
  require(raw.size() % 4 == 0, "observation length must be a multiple of 4");
  const Eigen::Index n = raw.size() / 4;
  Vector out(raw.size());
  out.segment(0, n) = raw.segment(0, n) / omega;
  out.segment(n, n) = raw.segment(n, n) / delta;
  out.segment(2 * n, n) = raw.segment(2 * n, n) / rocof;
  out.segment(3 * n, n) = raw.segment(3 * n, n) / power;
  return out;
}

Vector ObservationScales::unscale(const Vector& scaled) const {
  require(scaled.size() % 4 == 0, "observation length must be a multiple of 4");
  const Eigen::Index n = scaled.size() / 4;
  Vector out(scaled.size());
  out.segment(0, n) = scaled.segment(0, n) * omega;
  out.segment(n, n) = scaled.segment(n, n) * delta;
  out.segment(2 * n, n) = scaled.segment(2 * n, n) * rocof;
  out.segment(3 * n, n) = scaled.segment(3 * n, n) * power;
  return out;
}

Vector observe(const GridState& state, std::span<const MachineParams> machines, const Vector& prev_omega_dev,
               double control_dt, const ObservationScales& scales) {
  const Eigen::Index n = state.size();
  require(prev_omega_dev.size() == n && static_cast<Eigen::Index>(machines.size()) == n,
          "observe: dimension mismatch");
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    num += machines[static_cast<std::size_t>(i)].inertia * state.delta(i);
    den += machines[static_cast<std::size_t>(i)].inertia;
  }
  const double coi = num / den;
  Vector raw(4 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double dev = state.omega(i) - machines[static_cast<std::size_t>(i)].omega_n;
    raw(i) = dev;
    raw(n + i) = wrap_angle(state.delta(i) - coi);
    raw(2 * n + i) = (dev - prev_omega_dev(i)) / control_dt;
    raw(3 * n + i) = state.p_e(i);
  }
  return scales.scale(raw);
}

void ConstraintLimits::validate() const {
  require(omega_max_dev > 0.0 && e_max > 0.0, "constraint limits must be strictly positive");
}

ConstraintReport check_constraints(const GridState& state, std::span<const MachineParams> machines,
                                   const ConstraintLimits& limits) {
  ConstraintReport r;
  for (Eigen::Index i = 0; i < state.size(); ++i) {
    const double dev = state.omega(i) - machines[static_cast<std::size_t>(i)].omega_n;
    if (std::abs(dev) > limits.omega_max_dev) {
      r.violations.push_back({Violation::Kind::Frequency, static_cast<int>(i), state.t});
    }
    if (state.energy_used.size() == state.size() && state.energy_used(i) > limits.e_max) {
      r.violations.push_back({Violation::Kind::Energy, static_cast<int>(i), state.t});
    }
  }
  return r;
}

void ConstraintMonitor::record(const ConstraintReport& report) {
  for (const auto& v : report.violations) {
    bool seen = false;
    for (const auto& f : first_.violations) {
      if (f.kind == v.kind && f.machine == v.machine) seen = true;
    }
    if (!seen) first_.violations.push_back(v);
  }
}

}  // namespace qdsc::grid
