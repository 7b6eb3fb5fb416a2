#include "ahx/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace ahx {

std::uint64_t config_hash(const nlohmann::json& config) {
  // nlohmann::json keeps object keys sorted, so dump() is canonical.
  const std::string s = config.dump();
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash_hex(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(config_hash(config)));
  return buf;
}

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

void write_fields(std::ostream& out, const std::vector<std::string>& f) {
  for (std::size_t i = 0; i < f.size(); ++i) out << (i ? "," : "") << quote(f[i]);
  out << "\r\n";
}

// Reads one record; returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string cur;
  bool quoted = false;
  for (;;) {
    const int ci = in.get();
    if (ci == std::char_traits<char>::eof()) {
      if (quoted) throw InvalidArgument("csv: unterminated quoted field");
      fields.push_back(cur);
      return true;
    }
    const char c = static_cast<char>(ci);
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          cur += '"';
          in.get();
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c == '\r' || c == '\n') {
      if (c == '\r' && in.peek() == '\n') in.get();
      fields.push_back(cur);
      return true;
    } else {
      cur += c;
    }
  }
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw InvalidArgument("csv: no column '" + name + "'");
  return static_cast<int>(it - header.begin());
}

double CsvTable::number(std::size_t row, const std::string& name) const {
  const std::string& s = rows.at(row).at(column(name));
  if (s == "nan") return std::nan("");
  if (s == "inf") return kInf;
  if (s == "-inf") return -kInf;
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw InvalidArgument("csv: '" + s + "' is not a number");
  return v;
}

CsvWriter::CsvWriter(std::ostream& out, const std::vector<std::string>& header,
                     const std::string& hash)
    : out_(out), columns_(header.size()) {
  if (!hash.empty()) out_ << "# config-hash: " << hash << "\r\n";
  write_fields(out_, header);
}

void CsvWriter::row(const std::vector<CsvCell>& cells) {
  if (cells.size() != columns_) throw InvalidArgument("csv: row width differs from header");
  std::vector<std::string> f;
  f.reserve(cells.size());
  for (const CsvCell& c : cells) f.push_back(c.numeric ? format_number(c.number) : c.text);
  write_fields(out_, f);
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::vector<std::string> rec;
  while (in.peek() == '#') {
    std::string skip;
    std::getline(in, skip);
  }
  if (!read_record(in, t.header)) throw InvalidArgument("csv: missing header");
  while (read_record(in, rec)) {
    if (rec.size() == 1 && rec[0].empty()) continue;
    if (rec.size() != t.header.size()) throw InvalidArgument("csv: row width differs from header");
    t.rows.push_back(rec);
  }
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("csv: cannot open " + path);
  return read_csv(in);
}

void write_trajectory_csv(std::ostream& out, const GeodesicTrajectory& traj,
                          const std::string& hash, int extra) {
  const int n = traj.dim();
  std::vector<std::string> header{"tau", "rho"};
  for (int k = 0; k < n; ++k) header.push_back("y" + std::to_string(k + 1));
  header.push_back("xi_bar0");
  for (int k = 0; k < n; ++k) header.push_back("eta" + std::to_string(k + 1));
  CsvWriter w(out, header, hash);
  auto emit = [&](double tau, const BPhasePoint& p) {
    std::vector<CsvCell> row{tau, p.rho};
    for (int k = 0; k < n; ++k) row.emplace_back(p.y[k]);
    row.emplace_back(p.xi_bar0);
    for (int k = 0; k < n; ++k) row.emplace_back(p.eta[k]);
    w.row(row);
  };
  emit(0.0, traj.start());
  for (const auto& seg : traj.segments()) {
    for (int j = 1; j <= extra; ++j) {
      const double tau = seg.t0 + seg.h * j / (extra + 1);
      emit(tau, traj.at(tau));
    }
    if (seg.t1() < traj.tau_plus()) emit(seg.t1(), traj.at(seg.t1()));
  }
  emit(traj.tau_plus(), traj.end());
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string r;
  for (char c : s) {
    switch (c) {
      case '&': r += "&amp;"; break;
      case '<': r += "&lt;"; break;
      case '>': r += "&gt;"; break;
      case '"': r += "&quot;"; break;
      default: r += c;
    }
  }
  return r;
}

}  // namespace

void write_svg(std::ostream& out, const std::vector<SvgSeries>& series, const std::string& title,
               const std::string& x_label, const std::string& y_label) {
  const double W = 640, H = 420, ml = 70, mr = 20, mt = 40, mb = 55;
  double x0 = kInf, x1 = -kInf, y0 = kInf, y1 = -kInf;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  if (!(x1 > x0)) { x0 -= 1; x1 += 1; }
  if (!(y1 > y0)) { y0 -= 1; y1 += 1; }
  auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - y0) / (y1 - y0) * (H - mt - mb); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(title)
      << "</text>\n";
  out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << W - ml - mr << "\" height=\""
      << H - mt - mb << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4, yv = y0 + (y1 - y0) * i / 4;
    char bx[32], by[32];
    std::snprintf(bx, sizeof bx, "%.3g", xv);
    std::snprintf(by, sizeof by, "%.3g", yv);
    out << "<text x=\"" << px(xv) << "\" y=\"" << H - mb + 16 << "\" text-anchor=\"middle\">" << bx
        << "</text>\n";
    out << "<text x=\"" << ml - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << by
        << "</text>\n";
  }
  out << "<text x=\"" << (ml + W - mr) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">"
      << xml_escape(x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << (mt + H - mb) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (mt + H - mb) / 2 << ")\">" << xml_escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    out << "<polyline fill=\"none\" stroke=\"" << colors[k % 6] << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) out << px(s.x[i]) << "," << py(s.y[i]) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << W - mr - 6 << "\" y=\"" << mt + 16 + 14 * k << "\" text-anchor=\"end\" fill=\""
        << colors[k % 6] << "\">" << xml_escape(s.label) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace ahx
