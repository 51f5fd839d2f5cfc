#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "qdsc/agent/environment.hpp"

namespace qdsc::harness {

/// `%.9g`: nine significant digits, the precision of every CSV we write.
std::string fmt9(double v);

void write_trajectory_csv(std::ostream& out, const agent::Trajectory& traj);
void write_telemetry_csv(std::ostream& out, const std::vector<agent::EpisodeStats>& episodes);

struct NoiseRow {
  double p = 0.0;
  double mean_return = 0.0;
  double std_return = 0.0;
};
void write_noise_csv(std::ostream& out, const std::vector<NoiseRow>& rows);

/// Numeric CSV with a header line.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  /// Index of a header column, or -1.
  [[nodiscard]] int column(const std::string& name) const;
  [[nodiscard]] std::vector<double> values(int column) const;
};

/// Throws Error("csv", "<name>:<line>: ...") on malformed input.
CsvTable read_csv(std::istream& in, const std::string& name);
CsvTable read_csv_file(const std::filesystem::path& path);

/// Creates parent directories and writes `text`, or throws Error("io", ...).
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace qdsc::harness
