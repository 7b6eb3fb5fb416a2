// Command-line front end: ahx <command> --config <file> [--out <dir>] [--jobs N]
//
// Exit codes: 0 success, 1 numerical failure, 2 trapped orbit, 3 configuration error.

#include "ahx/flow.hpp"
#include "ahx/io.hpp"
#include "ahx/jacobi.hpp"
#include "ahx/parallel.hpp"
#include "ahx/recover.hpp"
#include "ahx/renorm.hpp"
#include "ahx/tensor.hpp"
#include "ahx/xray.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ahx;

namespace {

// Configuration problems that are not library errors.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Context {
  json config;
  std::string hash;
  fs::path out;
  int jobs = 0;
};

std::ofstream open_out(const Context& ctx, const std::string& name) {
  std::ofstream f(ctx.out / name, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + (ctx.out / name).string());
  return f;
}

Vec vec_of(const json& j, const char* what) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  if (!j.is_array()) throw ConfigError(std::string(what) + ": expected a number or an array");
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// An axis is a list of numbers or {"lo", "hi", "count"}.
std::vector<double> axis(const json& j, const char* what) {
  if (j.is_array()) return j.get<std::vector<double>>();
  if (j.is_object()) {
    const double lo = j.at("lo").get<double>(), hi = j.at("hi").get<double>();
    const int count = j.at("count").get<int>();
    if (count < 1) throw ConfigError(std::string(what) + ": count must be positive");
    std::vector<double> v(count);
    for (int i = 0; i < count; ++i) v[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
    return v;
  }
  throw ConfigError(std::string(what) + ": expected a list or {lo, hi, count}");
}

BoundaryMetricFamily family_of(const json& cfg) {
  if (!cfg.contains("metric")) throw ConfigError("config: missing \"metric\"");
  const json& m = cfg.at("metric");
  return m.is_string() ? make_family(json{{"family", m.get<std::string>()}}) : make_family(m);
}

// Incoming covector from {"y", "eta"} or the short-geodesic form {"y", "omega", "delta"}.
BoundaryCovector covector_of(const json& j, int n) {
  BoundaryCovector z;
  z.y = vec_of(j.at("y"), "y");
  if (j.contains("delta")) {
    const double delta = j.at("delta").get<double>();
    if (!(delta > 0)) throw ConfigError("delta must be positive");
    z.eta = vec_of(j.at("omega"), "omega") / delta;
  } else {
    z.eta = vec_of(j.at("eta"), "eta");
  }
  if (z.y.size() != n || z.eta.size() != n) throw ConfigError("covector dimension does not match the metric");
  return z;
}

std::vector<BoundaryCovector> grid_of(const json& cfg, int n) {
  std::vector<BoundaryCovector> g;
  if (cfg.contains("points")) {
    for (const auto& p : cfg.at("points")) g.push_back(covector_of(p, n));
  } else if (cfg.contains("grid")) {
    if (n != 1) throw ConfigError("grid: the y/eta product grid needs n = 1; use \"points\"");
    const json& gr = cfg.at("grid");
    for (double y : axis(gr.at("y"), "grid.y"))
      for (double e : axis(gr.at("eta"), "grid.eta"))
        g.push_back({Vec::Constant(1, y), Vec::Constant(1, e), Side::incoming});
  } else {
    throw ConfigError("config: need \"grid\" or \"points\"");
  }
  if (g.empty()) throw ConfigError("config: empty grid");
  return g;
}

TraceOptions trace_options(const json& cfg) {
  TraceOptions o;
  o.rtol = o.atol = cfg.value("tol", o.rtol);
  o.t_max = cfg.value("t_max", o.t_max);
  if (!(o.rtol > 0) || !(o.t_max > 0)) throw ConfigError("tol and t_max must be positive");
  return o;
}

std::vector<std::string> covector_header(int n, const std::string& suffix) {
  std::vector<std::string> h;
  for (int k = 0; k < n; ++k) h.push_back("y" + std::to_string(k + 1) + suffix);
  for (int k = 0; k < n; ++k) h.push_back("eta" + std::to_string(k + 1) + suffix);
  return h;
}

void push_covector(std::vector<CsvCell>& row, const Vec& y, const Vec& eta) {
  for (int k = 0; k < y.size(); ++k) row.emplace_back(y[k]);
  for (int k = 0; k < eta.size(); ++k) row.emplace_back(eta[k]);
}

std::string status_of(const std::exception& e) {
  if (dynamic_cast<const TrappedOrSlow*>(&e)) return "trapped";
  if (dynamic_cast<const ChartExit*>(&e)) return "chart-exit";
  if (dynamic_cast<const ConvergenceFailure*>(&e)) return "no-convergence";
  return "error";
}

// ---------------------------------------------------------------------------

int cmd_trace(const Context& ctx) {
  const BoundaryMetricFamily fam = family_of(ctx.config);
  if (!ctx.config.contains("z")) throw ConfigError("trace: missing \"z\"");
  const BoundaryCovector z = covector_of(ctx.config.at("z"), fam.dim());
  const GeodesicTrajectory traj = trace_geodesic(fam, z, trace_options(ctx.config));
  {
    auto f = open_out(ctx, "trajectory.csv");
    write_trajectory_csv(f, traj, ctx.hash, ctx.config.value("samples_per_step", 0));
  }
  if (ctx.config.value("svg", true)) {
    SvgSeries s{"geodesic", {}, {}};
    const int m = 400;
    for (int i = 0; i <= m; ++i) {
      const BPhasePoint p = traj.at(traj.tau_plus() * i / m);
      s.x.push_back(p.y[0]);
      s.y.push_back(p.rho);
    }
    auto f = open_out(ctx, "trajectory.svg");
    write_svg(f, {s}, "geodesic in the (y, rho) chart", "y1", "rho");
  }
  const BPhasePoint e = traj.end();
  std::cout << "tau_plus " << format_number(traj.tau_plus()) << " y_out " << format_number(e.y[0])
            << "\n";
  return 0;
}

int cmd_scatter(const Context& ctx) {
  const BoundaryMetricFamily fam = family_of(ctx.config);
  const int n = fam.dim();
  const auto grid = grid_of(ctx.config, n);
  const TraceOptions opts = trace_options(ctx.config);
  std::vector<BoundaryCovector> out(grid.size());
  std::vector<std::string> status(grid.size(), "ok");
  parallel_for(static_cast<long>(grid.size()), [&](long i) {
    try {
      out[i] = scattering_map(fam, grid[i], opts);
    } catch (const Error& e) {
      status[i] = status_of(e);
    }
  }, ctx.jobs);
  auto f = open_out(ctx, "scatter.csv");
  auto header = covector_header(n, "_in");
  for (const auto& h : covector_header(n, "_out")) header.push_back(h);
  header.push_back("status");
  CsvWriter w(f, header, ctx.hash);
  const double nan = std::nan("");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<CsvCell> row;
    push_covector(row, grid[i].y, grid[i].eta);
    if (status[i] == "ok")
      push_covector(row, out[i].y, out[i].eta);
    else
      push_covector(row, Vec::Constant(n, nan), Vec::Constant(n, nan));
    row.emplace_back(status[i]);
    w.row(row);
  }
  return 0;
}

int cmd_length(const Context& ctx) {
  const BoundaryMetricFamily fam = family_of(ctx.config);
  const int n = fam.dim();
  const auto grid = grid_of(ctx.config, n);
  const TraceOptions opts = trace_options(ctx.config);
  const bool mellin = ctx.config.value("mellin", true);
  struct Row {
    RenormalizedLengthRecord reg, mel;
    std::string status = "ok";
  };
  std::vector<Row> rows(grid.size());
  parallel_for(static_cast<long>(grid.size()), [&](long i) {
    try {
      const GeodesicTrajectory t = trace_geodesic(fam, grid[i], opts);
      rows[i].reg = renormalized_length(t);
      if (mellin) rows[i].mel = renormalized_length_mellin(t);
    } catch (const Error& e) {
      rows[i].status = status_of(e);
    }
  }, ctx.jobs);
  auto f = open_out(ctx, "length.csv");
  auto header = covector_header(n, "");
  for (const char* h : {"L", "L_error", "L_mellin", "L_mellin_error", "residue", "status"})
    header.push_back(h);
  CsvWriter w(f, header, ctx.hash);
  const double nan = std::nan("");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<CsvCell> row;
    push_covector(row, grid[i].y, grid[i].eta);
    const bool ok = rows[i].status == "ok";
    row.emplace_back(ok ? rows[i].reg.L : nan);
    row.emplace_back(ok ? rows[i].reg.estimated_error : nan);
    row.emplace_back(ok && mellin ? rows[i].mel.L : nan);
    row.emplace_back(ok && mellin ? rows[i].mel.estimated_error : nan);
    row.emplace_back(ok && mellin ? rows[i].mel.residue : nan);
    row.emplace_back(rows[i].status);
    w.row(row);
  }
  return 0;
}

int cmd_distance(const Context& ctx) {
  const BoundaryMetricFamily fam = family_of(ctx.config);
  const int n = fam.dim();
  std::vector<std::pair<Vec, Vec>> pairs;
  if (ctx.config.contains("pairs")) {
    for (const auto& p : ctx.config.at("pairs")) {
      if (!p.is_array() || p.size() != 2) throw ConfigError("pairs: each entry is [y_minus, y_plus]");
      pairs.push_back({vec_of(p[0], "y_minus"), vec_of(p[1], "y_plus")});
    }
  } else if (ctx.config.contains("y_minus") && ctx.config.contains("y_plus")) {
    if (n != 1) throw ConfigError("distance: y_minus/y_plus axes need n = 1; use \"pairs\"");
    for (double a : axis(ctx.config.at("y_minus"), "y_minus"))
      for (double b : axis(ctx.config.at("y_plus"), "y_plus"))
        pairs.push_back({Vec::Constant(1, a), Vec::Constant(1, b)});
  } else {
    throw ConfigError("distance: need \"pairs\" or \"y_minus\"/\"y_plus\"");
  }
  for (const auto& p : pairs)
    if (p.first.size() != n || p.second.size() != n) throw ConfigError("distance: dimension mismatch");
  DistanceOptions dopts;
  dopts.trace = trace_options(ctx.config);
  dopts.tol = ctx.config.value("newton_tol", dopts.tol);
  std::vector<DistanceRecord> recs(pairs.size());
  std::vector<std::string> status(pairs.size(), "ok");
  parallel_for(static_cast<long>(pairs.size()), [&](long i) {
    try {
      recs[i] = boundary_distance(fam, pairs[i].first, pairs[i].second, dopts);
    } catch (const Error& e) {
      status[i] = status_of(e);
    }
  }, ctx.jobs);
  auto f = open_out(ctx, "distance.csv");
  std::vector<std::string> header;
  for (int k = 0; k < n; ++k) header.push_back("y" + std::to_string(k + 1) + "_minus");
  for (int k = 0; k < n; ++k) header.push_back("y" + std::to_string(k + 1) + "_plus");
  for (const char* h : {"dR", "newton_iters", "residual", "status"}) header.push_back(h);
  CsvWriter w(f, header, ctx.hash);
  const double nan = std::nan("");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    std::vector<CsvCell> row;
    for (int k = 0; k < n; ++k) row.emplace_back(pairs[i].first[k]);
    for (int k = 0; k < n; ++k) row.emplace_back(pairs[i].second[k]);
    const bool ok = status[i] == "ok";
    row.emplace_back(ok ? recs[i].dR : nan);
    row.emplace_back(ok ? recs[i].newton_iters : -1);
    row.emplace_back(ok ? recs[i].residual : nan);
    row.emplace_back(status[i]);
    w.row(row);
  }
  return 0;
}

int cmd_xray(const Context& ctx) {
  const BoundaryMetricFamily fam = family_of(ctx.config);
  const int n = fam.dim();
  if (!ctx.config.contains("tensor")) throw ConfigError("xray: missing \"tensor\"");
  const SymmetricTensorField f = SymmetricTensorField::from_json(ctx.config.at("tensor"), n);
  const auto grid = grid_of(ctx.config, n);
  const TraceOptions opts = trace_options(ctx.config);
  std::vector<double> vals(grid.size(), std::nan(""));
  std::vector<std::string> status(grid.size(), "ok");
  parallel_for(static_cast<long>(grid.size()), [&](long i) {
    try {
      vals[i] = xray_transform(fam, f, grid[i], opts);
    } catch (const TrappedOrSlow& e) {
      status[i] = status_of(e);
    } catch (const ChartExit& e) {
      status[i] = status_of(e);
    } catch (const ConvergenceFailure& e) {
      status[i] = status_of(e);
    }
  }, ctx.jobs);
  auto out = open_out(ctx, "xray.csv");
  auto header = covector_header(n, "");
  header.push_back("I" + std::to_string(f.rank()));
  header.push_back("status");
  CsvWriter w(out, header, ctx.hash);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    std::vector<CsvCell> row;
    push_covector(row, grid[i].y, grid[i].eta);
    row.emplace_back(vals[i]);
    row.emplace_back(status[i]);
    w.row(row);
  }
  return 0;
}

int cmd_recover(const Context& ctx) {
  const BoundaryMetricFamily fam = family_of(ctx.config);
  const int n = fam.dim();
  const json& c = ctx.config;
  std::vector<Vec> points;
  if (c.contains("y0")) {
    for (const auto& p : c.at("y0")) points.push_back(vec_of(p, "y0"));
  } else {
    if (n != 1) throw ConfigError("recover: give \"y0\" points for n > 1");
    for (int j = 0; j < 8; ++j) points.push_back(Vec::Constant(1, 2.0 * kPi * j / 8));
  }
  std::vector<Vec> dirs;
  if (c.contains("directions")) {
    for (const auto& d : c.at("directions")) dirs.push_back(vec_of(d, "directions"));
  } else if (n == 1) {
    dirs.push_back(Vec::Constant(1, 1.0));
  } else {
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        Vec w = Vec::Zero(n);
        w[i] += 1.0;
        w[j] += 1.0;
        dirs.push_back(w);
      }
  }
  const std::vector<double> deltas = c.contains("deltas") ? axis(c.at("deltas"), "deltas") : default_delta_grid();
  const double noise = c.value("noise", 0.0);
  if (noise < 0) throw ConfigError("noise must be nonnegative");
  const std::uint64_t seed = c.value("seed", std::uint64_t{0});

  std::vector<LengthSampleSet> sets;
  std::vector<H0Estimate> h0s;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != n) throw ConfigError("recover: y0 dimension mismatch");
    sets.push_back(synthesize_samples(fam, points[i], dirs, deltas, noise, seed + i, ctx.jobs));
    h0s.push_back(recover_h0(sets.back()));
  }
  json doc;
  doc["config_hash"] = ctx.hash;
  doc["samples"] = json::array();
  for (const auto& s : sets) doc["samples"].push_back(to_json(s));
  std::vector<FirstJetEstimate> first;
  if (points.size() >= static_cast<std::size_t>(n + 1)) {
    first = recover_first_jet(sets, h0s);
    doc["asymptotic"] = json::array();
    for (std::size_t i = 0; i < sets.size(); ++i) {
      json e = to_json(first[i]);
      std::vector<std::vector<double>> h0(n, std::vector<double>(n));
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) h0[a][b] = h0s[i].h0(a, b);
      e["h0"] = h0;
      doc["asymptotic"].push_back(e);
    }
  }
  if (c.value("fit", true) && n == 1) {
    JetFitOptions fo;
    fo.k_max = c.value("k_max", 2);
    fo.jobs = ctx.jobs;
    doc["fit"] = to_json(recover_jet_fit(sets, fo));
  }
  {
    auto f = open_out(ctx, "recover.json");
    f << doc.dump(2) << "\n";
  }
  auto f = open_out(ctx, "recover.csv");
  std::vector<std::string> header;
  for (int k = 0; k < n; ++k) header.push_back("y" + std::to_string(k + 1));
  for (const char* h : {"h0_11", "drho_h_11"}) header.push_back(h);
  CsvWriter w(f, header, ctx.hash);
  for (std::size_t i = 0; i < sets.size(); ++i) {
    std::vector<CsvCell> row;
    for (int k = 0; k < n; ++k) row.emplace_back(points[i][k]);
    row.emplace_back(h0s[i].h0(0, 0));
    row.emplace_back(first.empty() ? std::nan("") : first[i].drho_h(0, 0));
    w.row(row);
  }
  return 0;
}

int cmd_diagnose(const Context& ctx) {
  const BoundaryMetricFamily fam = family_of(ctx.config);
  const auto grid = grid_of(ctx.config, fam.dim());
  const double T = ctx.config.value("T_asym", 25.0);
  const double t_conj = ctx.config.value("t_conj", 30.0);
  if (!(T > 0) || !(t_conj > 0)) throw ConfigError("T_asym and t_conj must be positive");
  const SimplicityReport rep = simplicity_check(fam, grid, T, t_conj, ctx.jobs);
  json doc{{"config_hash", ctx.hash},
           {"conjugate_count", rep.conjugate_count},
           {"min_angle_deg", rep.min_angle_deg},
           {"min_det", rep.min_det},
           {"geodesics", rep.geodesics},
           {"failures", rep.failures}};
  if (fam.dim() == 1) {
    // Hyperbolicity constants along the first geodesic of the grid.
    const JacobiSystem sys = JacobiSystem::from_boundary(fam, grid.front(), std::max(40.0, T + 5.0));
    const DecayReport d = stable_decay(sys, 0.95, 2.0, std::min(20.0, T), T);
    doc["nu_fit"] = d.nu_fit;
    doc["C_fit"] = d.C_cert;
    doc["curvature_C"] = d.curvature_C;
  }
  auto f = open_out(ctx, "diagnose.json");
  f << doc.dump(2) << "\n";
  std::cout << doc.dump() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Geodesic flow, X-ray transform and boundary recovery for asymptotically hyperbolic metrics"};
  app.require_subcommand(1);
  std::string config_path, out_dir = ".";
  int jobs = 0;
  struct Command {
    const char* name;
    const char* help;
    int (*run)(const Context&);
  };
  const Command commands[] = {
      {"trace", "trace one geodesic and write trajectory.csv (+ svg)", cmd_trace},
      {"scatter", "scattering map over a grid of incoming covectors", cmd_scatter},
      {"length", "renormalized lengths over a grid", cmd_length},
      {"distance", "renormalized boundary distances by shooting", cmd_distance},
      {"xray", "X-ray transform of a tensor field over a grid", cmd_xray},
      {"recover", "recover boundary jets from short-geodesic lengths", cmd_recover},
      {"diagnose", "conjugate points and stable/unstable transversality", cmd_diagnose},
  };
  std::vector<CLI::App*> subs;
  for (const Command& c : commands) {
    CLI::App* s = app.add_subcommand(c.name, c.help);
    s->add_option("--config", config_path, "JSON configuration file")->required();
    s->add_option("--out", out_dir, "output directory");
    s->add_option("--jobs", jobs, "worker threads (0: all cores)");
    subs.push_back(s);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 3;
  }

  try {
    Context ctx;
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot read config " + config_path);
    try {
      ctx.config = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(std::string("config: ") + e.what());
    }
    ctx.hash = config_hash_hex(ctx.config);
    ctx.out = out_dir;
    ctx.jobs = jobs;
    fs::create_directories(ctx.out);
    for (std::size_t i = 0; i < subs.size(); ++i)
      if (subs[i]->parsed()) return commands[i].run(ctx);
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const InvalidFamily& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const TrappedOrSlow& e) {
    std::cerr << "trapped: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  }
}
