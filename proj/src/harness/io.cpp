#include "qdsc/harness/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "qdsc/harness/config.hpp"

namespace qdsc::harness {

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void write_trajectory_csv(std::ostream& out, const agent::Trajectory& traj) {
  const Eigen::Index n = traj.empty() ? 0 : traj.front().delta_deg.size();
  out << 't';
  for (const char* name : {"delta_", "omega_", "pe_"}) {
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << name << i;
  }
  out << ",delta_max,delta_coi\n";
  for (const auto& r : traj) {
    out << fmt9(r.t);
    for (const Vector* v : {&r.delta_deg, &r.omega, &r.p_e}) {
      for (Eigen::Index i = 0; i < n; ++i) out << ',' << fmt9((*v)(i));
    }
    out << ',' << fmt9(r.delta_max) << ',' << fmt9(r.delta_coi) << '\n';
  }
}

void write_telemetry_csv(std::ostream& out, const std::vector<agent::EpisodeStats>& episodes) {
  out << "episode,steps,return,clip_events,violations,final_delta_max\n";
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    const auto& s = episodes[e];
    out << e << ',' << s.steps << ',' << fmt9(s.ret) << ',' << s.clip_events << ',' << s.violations << ','
        << fmt9(s.final_delta_max) << '\n';
  }
}

void write_noise_csv(std::ostream& out, const std::vector<NoiseRow>& rows) {
  out << "p,mean_return,std_return\n";
  for (const auto& r : rows) out << fmt9(r.p) << ',' << fmt9(r.mean_return) << ',' << fmt9(r.std_return) << '\n';
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::vector<double> CsvTable::values(int column) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.at(static_cast<std::size_t>(column)));
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] void csv_error(const std::string& name, int line, const std::string& what) {
  throw Error("csv", name + ":" + std::to_string(line) + ": " + what);
}

}  // namespace

CsvTable read_csv(std::istream& in, const std::string& name) {
  CsvTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1) {
      t.header = split(line);
      if (t.header.empty() || line.empty()) csv_error(name, 1, "missing header");
      continue;
    }
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != t.header.size())
      csv_error(name, lineno,
                "expected " + std::to_string(t.header.size()) + " fields, found " + std::to_string(cells.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), v);
      if (ec != std::errc() || ptr != c.data() + c.size() || c.empty()) csv_error(name, lineno, "bad number '" + c + "'");
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (lineno == 0) csv_error(name, 1, "empty file");
  return t;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path.string());
  return read_csv(in, path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << text;
  if (!out) throw Error("io", "write failed for " + path.string());
}

}  // namespace qdsc::harness
