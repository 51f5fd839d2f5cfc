#include "qdsc/grid/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include "json.hpp"

namespace qdsc::grid {

namespace {

using nlohmann::json;

constexpr double kTimeEps = 1e-9;

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("scenario: " + what);
}

Matrix matrix_from_json(const json& j, Eigen::Index n, const std::string& what) {
  require(j.is_array() && static_cast<Eigen::Index>(j.size()) == n, what + " must have " + std::to_string(n) + " rows");
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = j[static_cast<std::size_t>(i)];
    require(row.is_array() && static_cast<Eigen::Index>(row.size()) == n, what + " rows must have " + std::to_string(n) + " entries");
    for (Eigen::Index k = 0; k < n; ++k) m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(row);
  }
  return rows;
}

Vector vector_from_json(const json& j, Eigen::Index n, const std::string& what) {
  require(j.is_array() && static_cast<Eigen::Index>(j.size()) == n, what + " must have " + std::to_string(n) + " entries");
  Vector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

Bounds bounds_from_json(const json& j, const std::string& what) {
  require(j.is_array() && j.size() == 2, what + " must be [min, max]");
  return {j[0].get<double>(), j[1].get<double>()};
}

Matrix symmetric3(double b01, double b02, double b12) {
  Matrix b = Matrix::Zero(3, 3);
  b(0, 1) = b(1, 0) = b01;
  b(0, 2) = b(2, 0) = b02;
  b(1, 2) = b(2, 1) = b12;
  return b;
}

}  // namespace

void EventScript::validate(int n_machines) const {
  require(fault_apply < fault_clear, "fault_apply must precede fault_clear");
  require(fault_clear <= horizon, "fault_clear must not exceed the horizon");
  require(sim_dt > 0.0 && control_dt > 0.0, "time steps must be positive");
  const double ratio = control_dt / sim_dt;
  require(std::abs(ratio - std::round(ratio)) < 1e-9 && std::round(ratio) >= 1.0,
          "sim_dt must divide control_dt");
  if (load_step) {
    require(load_step->machine >= 0 && load_step->machine < n_machines, "load step machine out of range");
  }
}

int EventScript::substeps() const { return static_cast<int>(std::lround(control_dt / sim_dt)); }

void Scenario::validate() const {
  require(!machines.empty(), "no machines");
  for (const auto& m : machines) m.validate();
  network.validate();
  require(network.n_machines == n_machines(), "network size differs from machine count");
  for (const char* v : {kPreFault, kFaultOn, kPostFault}) {
    require(network.variants.count(v) == 1, std::string("missing network variant '") + v + "'");
  }
  events.validate(n_machines());
  limits.validate();
  require(scales.omega > 0 && scales.delta > 0 && scales.rocof > 0 && scales.power > 0,
          "observation scales must be positive");
}

static Scenario parse_scenario(const json& j) {
  Scenario s;
  s.name = j.value("name", "scenario");
  const double omega_n = j.value("omega_n", 2.0 * std::numbers::pi * 60.0);
  require(j.contains("machines") && j["machines"].is_array(), "'machines' array required");
  for (const auto& mj : j["machines"]) {
    MachineParams m;
    m.inertia = mj.at("inertia").get<double>();
    m.damping = mj.at("damping").get<double>();
    m.p_ref = mj.at("p_ref").get<double>();
    m.ramp_limit = mj.at("ramp_limit").get<double>();
    m.voltage = mj.value("voltage", 1.0);
    m.omega_n = mj.value("omega_n", omega_n);
    m.inertia_bounds = bounds_from_json(mj.at("inertia_bounds"), "inertia_bounds");
    m.damping_bounds = mj.contains("damping_bounds") ? bounds_from_json(mj["damping_bounds"], "damping_bounds")
                                                     : Bounds{m.damping, m.damping};
    m.p_ref_bounds = bounds_from_json(mj.at("p_ref_bounds"), "p_ref_bounds");
    s.machines.push_back(m);
  }
  const auto n = static_cast<Eigen::Index>(s.machines.size());
  s.network.n_machines = static_cast<int>(n);
  for (const auto& [name, vj] : j.at("network").items()) {
    NetworkVariant v;
    v.susceptance = matrix_from_json(vj.at("B"), n, name + ".B");
    v.conductance = vj.contains("G") ? matrix_from_json(vj["G"], n, name + ".G") : Matrix::Zero(n, n);
    if (vj.contains("bus_B") || vj.contains("bus_G")) {
      v.bus_susceptance = vj.contains("bus_B") ? vector_from_json(vj["bus_B"], n, name + ".bus_B") : Vector::Zero(n);
      v.bus_conductance = vj.contains("bus_G") ? vector_from_json(vj["bus_G"], n, name + ".bus_G") : Vector::Zero(n);
      v.bus_voltage = vj.value("bus_voltage", 1.0);
    }
    s.network.variants.emplace(name, std::move(v));
  }
  const auto& ej = j.at("events");
  s.events.fault_apply = ej.at("fault_apply").get<double>();
  s.events.fault_clear = ej.at("fault_clear").get<double>();
  s.events.horizon = ej.at("horizon").get<double>();
  s.events.control_dt = ej.value("control_dt", 0.01);
  s.events.sim_dt = ej.value("sim_dt", 0.001);
  if (ej.contains("load_step") && !ej["load_step"].is_null()) {
    const auto& lj = ej["load_step"];
    s.events.load_step = LoadStep{lj.at("machine").get<int>(), lj.at("magnitude").get<double>(),
                                  lj.at("time").get<double>()};
  }
  const auto& lj = j.at("limits");
  s.limits.omega_max_dev = lj.at("omega_max_dev").get<double>();
  s.limits.e_max = lj.at("e_max").get<double>();
  if (j.contains("observation_scales")) {
    const auto& oj = j["observation_scales"];
    s.scales.omega = oj.value("omega", 1.0);
    s.scales.delta = oj.value("delta", 1.0);
    s.scales.rocof = oj.value("rocof", 1.0);
    s.scales.power = oj.value("power", 1.0);
  }
  s.validate();
  return s;
}

Scenario scenario_from_json(const json& j) {
  try {
    return parse_scenario(j);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("scenario: ") + e.what());
  }
}

json scenario_to_json(const Scenario& s) {
  json j;
  j["name"] = s.name;
  json machines = json::array();
  for (const auto& m : s.machines) {
    machines.push_back({{"inertia", m.inertia},
                        {"damping", m.damping},
                        {"p_ref", m.p_ref},
                        {"ramp_limit", m.ramp_limit},
                        {"voltage", m.voltage},
                        {"omega_n", m.omega_n},
                        {"inertia_bounds", {m.inertia_bounds.min, m.inertia_bounds.max}},
                        {"damping_bounds", {m.damping_bounds.min, m.damping_bounds.max}},
                        {"p_ref_bounds", {m.p_ref_bounds.min, m.p_ref_bounds.max}}});
  }
  j["machines"] = machines;
  json net = json::object();
  for (const auto& [name, v] : s.network.variants) {
    json vj = {{"B", matrix_to_json(v.susceptance)}, {"G", matrix_to_json(v.conductance)}};
    if (v.has_infinite_bus()) {
      vj["bus_B"] = std::vector<double>(v.bus_susceptance.data(), v.bus_susceptance.data() + v.bus_susceptance.size());
      vj["bus_G"] = std::vector<double>(v.bus_conductance.data(), v.bus_conductance.data() + v.bus_conductance.size());
      vj["bus_voltage"] = v.bus_voltage;
    }
    net[name] = vj;
  }
  j["network"] = net;
  json ev = {{"fault_apply", s.events.fault_apply},
             {"fault_clear", s.events.fault_clear},
             {"horizon", s.events.horizon},
             {"control_dt", s.events.control_dt},
             {"sim_dt", s.events.sim_dt}};
  if (s.events.load_step) {
    ev["load_step"] = {{"machine", s.events.load_step->machine},
                       {"magnitude", s.events.load_step->magnitude},
                       {"time", s.events.load_step->time}};
  }
  j["events"] = ev;
  j["limits"] = {{"omega_max_dev", s.limits.omega_max_dev}, {"e_max", s.limits.e_max}};
  j["observation_scales"] = {{"omega", s.scales.omega},
                             {"delta", s.scales.delta},
                             {"rocof", s.scales.rocof},
                             {"power", s.scales.power}};
  return j;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("scenario: cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("scenario: " + path.string() + ": " + e.what());
  }
  return scenario_from_json(j);
}

Scenario three_machine_fixture() {
  Scenario s;
  s.name = "three-machine-fault";
  const double omega_n = 2.0 * std::numbers::pi * 60.0;
  const double p_ref[] = {4.0, -2.0, -2.0};
  for (double p : p_ref) {
    MachineParams m;
    m.inertia = 0.2;
    m.damping = 0.3;
    m.p_ref = p;
    m.ramp_limit = 10.0;
    m.omega_n = omega_n;
    m.voltage = 1.0;
    m.inertia_bounds = {0.05, 0.5};
    m.damping_bounds = {0.3, 0.3};
    m.p_ref_bounds = {-5.0, 5.0};
    s.machines.push_back(m);
  }
  s.network.n_machines = 3;
  s.network.variants.emplace(kPreFault, NetworkVariant::lossless(symmetric3(8.0, 8.0, 8.0)));
  s.network.variants.emplace(kFaultOn, NetworkVariant::lossless(symmetric3(0.6, 0.6, 8.0)));
  s.network.variants.emplace(kPostFault, NetworkVariant::lossless(symmetric3(2.0, 4.0, 8.0)));
  s.events.fault_apply = 2.0;
  s.events.fault_clear = 2.30;
  s.events.load_step = LoadStep{1, 0.6, 2.0};
  s.events.horizon = 5.0;
  s.events.control_dt = 0.01;
  s.events.sim_dt = 0.001;
  s.limits = {8.0, 10.0};
  s.scales = {5.0, 1.0, 50.0, 5.0};
  s.validate();
  return s;
}

Scenario smib_fixture(double inertia, double damping, double fault_duration) {
  Scenario s;
  s.name = "smib";
  MachineParams m;
  m.inertia = inertia;
  m.damping = damping;
  m.p_ref = 50.0;
  m.ramp_limit = 0.0;
  m.omega_n = 2.0 * std::numbers::pi * 60.0;
  m.voltage = 1.0;
  m.inertia_bounds = {inertia, inertia};
  m.damping_bounds = {damping, damping};
  m.p_ref_bounds = {m.p_ref, m.p_ref};
  s.machines.push_back(m);
  s.network.n_machines = 1;
  auto bus = [](double b) {
    NetworkVariant v = NetworkVariant::lossless(Matrix::Zero(1, 1));
    v.bus_susceptance = Vector::Constant(1, b);
    v.bus_conductance = Vector::Zero(1);
    return v;
  };
  s.network.variants.emplace(kPreFault, bus(100.0));
  s.network.variants.emplace(kFaultOn, bus(0.0));
  s.network.variants.emplace(kPostFault, bus(80.0));
  s.events.fault_apply = 0.1;
  s.events.fault_clear = 0.1 + fault_duration;
  s.events.horizon = 5.0;
  s.events.control_dt = 0.01;
  s.events.sim_dt = 0.001;
  s.limits = {1e6, 1e9};
  s.scales = {1.0, 1.0, 1.0, 1.0};
  s.validate();
  return s;
}

GridSimulation::GridSimulation(Scenario scenario) : scenario_(std::move(scenario)) {
  scenario_.validate();
  reset();
}

void GridSimulation::reset() {
  machines_ = scenario_.machines;
  const NetworkVariant& pre = scenario_.network.variant(kPreFault);
  const Vector delta = solve_equilibrium(machines_, pre);
  state_ = make_state(delta, machines_, pre, 0.0);
  steps_ = 0;
}

void GridSimulation::restore(const Snapshot& s) {
  state_ = s.state;
  machines_ = s.machines;
  steps_ = s.steps;
}

const std::string& GridSimulation::variant_name_at(double t) const {
  static const std::string pre = kPreFault, fault = kFaultOn, post = kPostFault;
  if (t < scenario_.events.fault_apply - kTimeEps) return pre;
  if (t < scenario_.events.fault_clear - kTimeEps) return fault;
  return post;
}

const NetworkVariant& GridSimulation::variant_at(double t) const {
  return scenario_.network.variant(variant_name_at(t));
}

Vector GridSimulation::demand_at(double t) const {
  Vector d = Vector::Zero(scenario_.n_machines());
  const auto& ls = scenario_.events.load_step;
  if (ls && t >= ls->time - kTimeEps) d(ls->machine) = ls->magnitude;
  return d;
}

bool GridSimulation::cleared() const { return state_.t >= scenario_.events.fault_clear - kTimeEps; }

bool GridSimulation::finished() const { return state_.t >= scenario_.events.horizon - kTimeEps; }

void GridSimulation::advance_control_step() {
  const double dt = scenario_.events.sim_dt;
  const int substeps = scenario_.events.substeps();
  for (int k = 0; k < substeps; ++k) {
    const double t0 = state_.t;
    const Vector demand = demand_at(t0);
    const std::span<const double> dspan(demand.data(), static_cast<std::size_t>(demand.size()));
    const std::string& variant = variant_name_at(t0);
    GridState next = step_rk4(state_, machines_, scenario_.network.variant(variant), dt, dspan);
    ++steps_;
    next.t = static_cast<double>(steps_) * dt;
    const std::string& next_variant = variant_name_at(next.t);
    if (next_variant != variant) {
      const Vector v = machine_voltages(machines_);
      next.p_e = electrical_power(std::span<const double>(next.delta.data(), static_cast<std::size_t>(next.delta.size())),
                                  scenario_.network.variant(next_variant),
                                  std::span<const double>(v.data(), static_cast<std::size_t>(v.size())));
    }
    state_ = std::move(next);
  }
}

}  // namespace qdsc::grid
