#pragma once

// Output artifacts: RFC-4180 CSV tables with a config-hash comment line,
// JSON documents and small static SVG line charts.

#include "ahx/flow.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ahx {

/// FNV-1a 64-bit hash of the canonical (sorted keys, compact) dump.
std::uint64_t config_hash(const nlohmann::json& config);
std::string config_hash_hex(const nlohmann::json& config);

/// A cell is either a number (written with 17 significant digits) or text.
struct CsvCell {
  bool numeric = true;
  double number = 0.0;
  std::string text;

  CsvCell(double v) : numeric(true), number(v) {}
  CsvCell(int v) : numeric(true), number(v) {}
  CsvCell(long v) : numeric(true), number(static_cast<double>(v)) {}
  CsvCell(std::string s) : numeric(false), text(std::move(s)) {}
  CsvCell(const char* s) : numeric(false), text(s) {}
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index by name; throws InvalidArgument if missing.
  int column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

std::string format_number(double v);

class CsvWriter {
 public:
  /// Writes the "# config-hash: <hex>" line (if hash is non-empty) and the header.
  CsvWriter(std::ostream& out, const std::vector<std::string>& header, const std::string& hash = "");
  void row(const std::vector<CsvCell>& cells);

 private:
  std::ostream& out_;
  std::size_t columns_;
};

/// RFC-4180 reader; lines starting with '#' before the header are skipped.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Trajectory table with columns tau, rho, y1..yn, xi_bar0, eta1..etan at the
/// accepted steps (plus `extra` evenly spaced dense samples per step).
void write_trajectory_csv(std::ostream& out, const GeodesicTrajectory& traj,
                          const std::string& hash = "", int extra = 0);

struct SvgSeries {
  std::string label;
  std::vector<double> x, y;
};

/// Static line chart; presentation only.
void write_svg(std::ostream& out, const std::vector<SvgSeries>& series, const std::string& title,
               const std::string& x_label, const std::string& y_label);

}  // namespace ahx
