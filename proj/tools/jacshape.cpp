// jacshape: command-line front end for the prescribed-Jacobian solvers.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "jacshape/io.hpp"
#include "jacshape/jacshape.hpp"

namespace fs = std::filesystem;
using namespace jacshape;
using io::Json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_usage = 1;
constexpr int exit_tolerance = 13;

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_argument:
    case ErrorKind::unsupported_order: return 1;
    case ErrorKind::io: return 2;
    case ErrorKind::shape_mismatch: return 3;
    case ErrorKind::degenerate_domain:
    case ErrorKind::underresolved:
    case ErrorKind::connectivity:
    case ErrorKind::collar_too_thick:
    case ErrorKind::exhaustion_failure: return 4;
    case ErrorKind::inconsistent_datum: return 5;
    case ErrorKind::precondition:
    case ErrorKind::positivity:
    case ErrorKind::support_distance: return 6;
    case ErrorKind::solver_stall: return 7;
    case ErrorKind::contraction_failure: return 8;
    case ErrorKind::inversion_failure:
    case ErrorKind::orientation_loss:
    case ErrorKind::out_of_range: return 9;
    case ErrorKind::bracket_failure: return 10;
    case ErrorKind::flow_accuracy:
    case ErrorKind::change_of_variables_drift: return 11;
    case ErrorKind::unsupported_topology:
    case ErrorKind::nonzero_period: return 12;
  }
  return 1;
}

struct RunConfig {
  std::string command;
  std::string domain = "disk";
  int resolution = 64;
  std::string f = "sample:bump";
  std::string phi;
  std::string psi = "sample:squeeze";
  std::string region;
  double collar = 0.0;
  double distance = 0.0;
  std::string method = "auto";
  std::string out = ".";
  double tol_det = 1e-2;
  double tol_support = 0.0;  // 0: 1e-6 + 5 h^2
  int time_steps = 32;
  double mollify_radius = 0.0;  // 0: 0.05 with --collar, d/8 with --distance
  std::uint64_t seed = 0;
  std::string config;
};

void apply_config(RunConfig& rc) {
  if (rc.config.empty()) return;
  const Json j = io::detail::parse(io::detail::read_text(rc.config), rc.config);
  if (!j.is_object()) fail(ErrorKind::invalid_argument, rc.config + ": config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "domain") rc.domain = v.get<std::string>();
      else if (key == "resolution") rc.resolution = v.get<int>();
      else if (key == "f") rc.f = v.get<std::string>();
      else if (key == "phi") rc.phi = v.get<std::string>();
      else if (key == "psi") rc.psi = v.get<std::string>();
      else if (key == "region") rc.region = v.get<std::string>();
      else if (key == "collar") rc.collar = v.get<double>();
      else if (key == "distance") rc.distance = v.get<double>();
      else if (key == "method") rc.method = v.get<std::string>();
      else if (key == "out") rc.out = v.get<std::string>();
      else if (key == "tol_det") rc.tol_det = v.get<double>();
      else if (key == "tol_support") rc.tol_support = v.get<double>();
      else if (key == "time_steps") rc.time_steps = v.get<int>();
      else if (key == "mollify_radius") rc.mollify_radius = v.get<double>();
      else if (key == "seed") rc.seed = v.get<std::uint64_t>();
      else fail(ErrorKind::invalid_argument, rc.config + ": unknown key '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      fail(ErrorKind::invalid_argument, rc.config + ": bad value for '" + key + "'");
    }
  }
}

bool is_sample(const std::string& s) { return s.rfind("sample:", 0) == 0; }

void validate(const RunConfig& rc) {
  if (rc.tol_det <= 0 || rc.tol_support < 0 || rc.collar < 0 || rc.distance < 0 || rc.mollify_radius < 0)
    fail(ErrorKind::invalid_argument, "tolerances and lengths must be positive");
  if (rc.method != "auto" && rc.method != "moser" && rc.method != "fixedpoint" && rc.method != "full")
    fail(ErrorKind::invalid_argument, "method must be auto, moser, fixedpoint or full");
  auto need = [](const std::string& p) {
    if (!p.empty() && !is_sample(p) && !fs::exists(p)) fail(ErrorKind::io, "input not found: " + p);
  };
  if (rc.command == "solve") need(rc.f);
  if (rc.command == "verify") {
    if (rc.phi.empty()) fail(ErrorKind::invalid_argument, "verify needs --phi");
    need(rc.phi);
    need(rc.f);
    need(rc.region);
  }
  if (rc.command == "correct-volume") need(rc.psi);
}

DomainPtr make_domain(const RunConfig& rc) {
  const std::string& s = rc.domain;
  if (s == "disk") return build_domain(ShapeDescriptor::disk({0, 0}, 1), rc.resolution);
  if (s == "square") return build_domain(ShapeDescriptor::unit_square(), rc.resolution);
  if (s == "interval") return build_domain(ShapeDescriptor::interval(0, 1), rc.resolution);
  if (s.rfind("mask:", 0) == 0) return build_domain(ShapeDescriptor::mask(s.substr(5)), rc.resolution);
  if (s.rfind("json:", 0) == 0) return io::read_domain(s.substr(5));
  fail(ErrorKind::invalid_argument, "unknown domain '" + s + "'");
}

Point domain_centre(const Domain& d) {
  const Point lo = d.grid.lower(), hi = d.grid.upper();
  return {0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])};
}

ScalarField load_density(const RunConfig& rc, const DomainPtr& d) {
  if (!is_sample(rc.f)) return io::read_scalar(rc.f, d, Fill::one);
  const std::string name = rc.f.substr(7);
  if (name == "one") return ScalarField::constant(d, 1.0, Fill::one);
  if (d->dim() == 1) {
    const Point lo = d->grid.lower(), hi = d->grid.upper();
    const double a = lo[0] + 0.3 * (hi[0] - lo[0]), b = lo[0] + 0.7 * (hi[0] - lo[0]);
    if (name == "bump") return bump_density_1d(d, 0.5, a, b);
    if (name == "random") {
      std::mt19937_64 rng(rc.seed);
      return bump_density_1d(d, std::uniform_real_distribution<double>(0.05, 0.5)(rng), a, b);
    }
  } else {
    const Point c = domain_centre(*d);
    const double r = 0.5 * inradius(*d);
    if (name == "bump") return radial_density(d, 0.5, r, c);
    if (name == "random") {
      std::mt19937_64 rng(rc.seed);
      std::uniform_real_distribution<double> u(-1, 1);
      const double amp = 0.25 + 0.15 * u(rng);
      const Point off{c[0] + 0.1 * r * u(rng), c[1] + 0.1 * r * u(rng)};
      return lobed_density(d, amp, 0.9 * r, off);
    }
  }
  fail(ErrorKind::invalid_argument, "unknown sample field '" + rc.f + "'");
}

double tol_support(const RunConfig& rc, const Domain& d) {
  return rc.tol_support > 0 ? rc.tol_support : 1e-6 + 5 * d.h() * d.h();
}

/// Distance of supp(f - 1) from the boundary; inradius when f = 1.
double support_distance(const ScalarField& f) {
  const Domain& d = *f.domain;
  double dist = inradius(d);
  for (std::size_t n : d.nodes)
    if (f.values[n] != 1.0) dist = std::min(dist, -d.sdist[n]);
  return dist;
}

std::string path_in(const RunConfig& rc, const std::string& name) { return (fs::path(rc.out) / name).string(); }

void write_heatmaps(const RunConfig& rc, const GridMap& phi, const ScalarField& f, const std::string& prefix) {
  const Domain& d = *phi.domain();
  const ScalarField det = jacobian_det(phi);
  std::vector<double> disp(d.grid.size(), 0.0);
  for (std::size_t n : d.nodes) disp[n] = phi.displacement.magnitude(n);
  io::write_heatmap(path_in(rc, prefix + "f.pgm"), d, f.values);
  io::write_heatmap(path_in(rc, prefix + "det.pgm"), d, det.values);
  io::write_heatmap(path_in(rc, prefix + "displacement.pgm"), d, disp);
}

int finish(const SolveReport& r, double tol_det, double tol_sup) {
  const bool ok = r.det_residual_inf <= tol_det && r.support_violation_inf <= tol_sup;
  std::printf("method %s  det_residual_inf %.3e  support_violation_inf %.3e  mass_error %.3e  iterations %d\n",
              to_string(r.method).c_str(), r.det_residual_inf, r.support_violation_inf, r.mass_error, r.iterations);
  for (const auto& w : r.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
  if (!ok) {
    std::fprintf(stderr, "tolerance exceeded: det %.3e (tol %.3e), support %.3e (tol %.3e)\n", r.det_residual_inf,
                 tol_det, r.support_violation_inf, tol_sup);
    return exit_tolerance;
  }
  return exit_ok;
}

// ---------------------------------------------------------------------------

int cmd_solve(const RunConfig& rc) {
  const DomainPtr d = make_domain(rc);
  const ScalarField f = load_density(rc, d);
  FlowConfig flow;
  flow.time_steps = rc.time_steps;
  GridMap phi;
  SolveReport rep;
  std::vector<std::size_t> region;

  if (d->dim() == 1 && rc.method == "auto" && rc.collar == 0) {
    auto [p, r] = solve_1d(f);
    phi = std::move(p);
    rep = r;
    const double dist = support_distance(f);
    for (std::size_t n : d->nodes)
      if (d->sdist[n] > -dist) region.push_back(n);
  } else if (rc.collar > 0) {
    const CollarSpec c = collar(d, rc.collar);
    const CollarDivSolver div(c);
    region = c.band;
    SupportedConfig sc;
    sc.flow = flow;
    if (rc.mollify_radius > 0) sc.mollify_radius = rc.mollify_radius;
    if (rc.method == "moser") {
      MoserResult m = moser_solve(f, div, flow);
      phi = m.phi;
      rep = m.report;
    } else if (rc.method == "full") {
      SupportedResult s = solve_supported(f, div, sc);
      phi = s.phi;
      rep = s.report;
    } else {
      try {
        FixedPointResult fp = fixedpoint_solve(f, div, sc.fixed_point);
        phi = fp.phi;
        rep = fp.report;
      } catch (const Error& e) {
        if (rc.method == "fixedpoint" || e.kind() != ErrorKind::contraction_failure) throw;
        SupportedResult s = solve_supported(f, div, sc);
        phi = s.phi;
        rep = s.report;
      }
    }
  } else {
    const double dist = rc.distance > 0 ? rc.distance : support_distance(f);
    GeneralConfig gc;
    gc.supported.flow = flow;
    gc.route = rc.method == "moser"        ? Route::moser
               : rc.method == "fixedpoint" ? Route::fixedpoint
               : rc.method == "full"       ? Route::full
                                           : Route::automatic;
    GeneralResult g = solve_general(f, dist, gc);
    phi = g.phi;
    rep = g.report;
    region = g.identity_region;
  }
  fill_report(rep, phi, f, region);
  io::write_map(path_in(rc, "phi.json"), phi, &rep);
  io::write_report(path_in(rc, "report.json"), rep);
  io::write_nodes(path_in(rc, "identity_region.json"), *d, region);
  write_heatmaps(rc, phi, f, "heat_");
  return finish(rep, rc.tol_det, tol_support(rc, *d));
}

int cmd_verify(const RunConfig& rc) {
  const io::MapFile m = io::read_map(rc.phi);
  const DomainPtr d = m.phi.domain();
  const ScalarField f = load_density(rc, d);
  std::vector<std::size_t> region;
  if (!rc.region.empty()) region = io::read_nodes(rc.region, *d);
  SolveReport rep;
  if (!m.report.is_null()) rep = io::report_from_json(m.report);
  fill_report(rep, m.phi, f, region);
  io::write_report(path_in(rc, "verify.json"), rep);
  const MapCheck c = check_map(m.phi, f, region);
  std::vector<double> resid(d->grid.size(), 0.0);
  for (std::size_t n : d->nodes) resid[n] = std::abs(c.det.values[n] - f.values[n]);
  io::write_heatmap(path_in(rc, "verify_residual.pgm"), *d, resid);
  std::vector<double> disp(d->grid.size(), 0.0);
  for (std::size_t n : d->nodes) disp[n] = m.phi.displacement.magnitude(n);
  io::write_heatmap(path_in(rc, "verify_displacement.pgm"), *d, disp);
  return finish(rep, rc.tol_det, tol_support(rc, *d));
}

int cmd_correct_volume(const RunConfig& rc) {
  GridMap psi;
  if (is_sample(rc.psi)) {
    if (rc.psi != "sample:squeeze") fail(ErrorKind::invalid_argument, "unknown sample map '" + rc.psi + "'");
    const DomainPtr d = make_domain(rc);
    if (d->shape.kind != ShapeDescriptor::Kind::disk) fail(ErrorKind::invalid_argument, "sample:squeeze needs --domain disk");
    psi = sample_map(d, RadialSqueeze{});
  } else {
    psi = io::read_map(rc.psi).phi;
  }
  const Domain& d = *psi.domain();
  const double dist = rc.distance > 0 ? rc.distance : 0.3;
  GeneralConfig gc;
  gc.supported.flow.time_steps = rc.time_steps;
  VolumeResult v = volume_correct(psi, dist, gc);
  io::write_map(path_in(rc, "Psi.json"), v.Psi, &v.report);
  io::write_report(path_in(rc, "report.json"), v.report);
  io::write_nodes(path_in(rc, "identity_region.json"), d, v.inner.identity_region);
  write_heatmaps(rc, v.Psi, v.f, "heat_");
  return finish(v.report, rc.tol_det, tol_support(rc, d));
}

int cmd_experiment_collar(const RunConfig& rc) {
  CollarExperimentConfig cfg;
  cfg.resolution = rc.resolution;
  const CollarExperiment e = run_collar_experiment(cfg);
  auto num = [](double v) { return io::detail::fmt17(v); };
  std::string csv = "collar_thickness,band_thickness,norm_ratio,epsilon_gate_max,det_residual,iterations,status\n";
  std::string dat = "# delta inv_delta norm_ratio epsilon_gate_max det_residual\n";
  Json records = Json::array();
  for (const auto& r : e.records) {
    csv += num(r.collar_thickness) + "," + num(r.band_thickness) + "," + num(r.norm_ratio) + "," +
           num(r.epsilon_gate_max) + "," + num(r.det_residual) + "," + std::to_string(r.iterations) + "," +
           (r.ok ? "ok" : "\"" + r.error + "\"") + "\n";
    if (r.ok)
      dat += num(r.collar_thickness) + " " + num(1 / r.collar_thickness) + " " + num(r.norm_ratio) + " " +
             num(r.epsilon_gate_max) + " " + num(r.det_residual) + "\n";
    Json j;
    j["collar_thickness"] = r.collar_thickness;
    j["band_thickness"] = r.band_thickness;
    j["norm_ratio"] = r.norm_ratio;
    j["epsilon_gate_max"] = r.epsilon_gate_max;
    j["det_residual"] = r.det_residual;
    j["iterations"] = r.iterations;
    j["status"] = r.ok ? "ok" : r.error;
    records.push_back(j);
  }
  io::detail::write_text(path_in(rc, "collar_experiment.csv"), csv);
  io::detail::write_text(path_in(rc, "collar_experiment.dat"), dat);
  Json j;
  j["resolution"] = rc.resolution;
  j["records"] = records;
  j["successful"] = e.successful;
  j["spearman_rho_norm_ratio_vs_inverse_thickness"] = e.spearman_rho;
  const char* trend = e.spearman_rho > 0.5    ? "norm_ratio tends to grow as the collar thins"
                      : e.spearman_rho < -0.5 ? "norm_ratio tends to shrink as the collar thins"
                                              : "no clear monotone trend of norm_ratio with collar thickness";
  j["observation"] = trend;
  io::detail::write_text(path_in(rc, "collar_experiment.json"), j.dump(2) + "\n");
  std::printf("%s", csv.c_str());
  std::printf("spearman rho (norm_ratio vs 1/delta): %.4f  [%s]\n", e.spearman_rho, trend);
  return exit_ok;
}

int cmd_oracle_1d(const RunConfig& rc) {
  const int res = rc.resolution;
  const DomainPtr d = build_domain(ShapeDescriptor::interval(0, 1), res);
  const CollarSpec c = collar(d, 0.2);
  const CollarDivSolver div(c);
  FlowConfig flow;
  flow.time_steps = rc.time_steps;
  double worst = 0.0;
  Json rows = Json::array();
  for (double amp : {0.05, 0.1, 0.2, 0.35, 0.5}) {
    const ScalarField f = bump_density_1d(d, amp);
    const auto [exact, r1] = solve_1d(f);
    auto diff = [&](const GridMap& p) {
      double s = 0;
      for (std::size_t n : d->nodes)
        s = std::max(s, std::abs(p.displacement.comp[0][n] - exact.displacement.comp[0][n]));
      return s;
    };
    Json row;
    row["amplitude"] = amp;
    row["moser"] = diff(moser_solve(f, div, flow).phi);
    worst = std::max(worst, row["moser"].get<double>());
    FixedPointConfig fc;
    fc.gate = false;
    const FixedPointResult fp = fixedpoint_solve(f, div, fc);
    row["fixedpoint"] = diff(fp.phi);
    row["gate_value"] = fp.gate_value;
    row["gate_passes"] = fp.gate_value <= fc.epsilon_threshold;
    worst = std::max(worst, row["fixedpoint"].get<double>());
    rows.push_back(row);
    std::printf("amplitude %.2f  |moser - exact| %.3e  |fixedpoint - exact| %.3e\n", amp,
                row["moser"].get<double>(), row["fixedpoint"].get<double>());
  }
  Json j;
  j["resolution"] = res;
  j["rows"] = rows;
  j["max_difference"] = worst;
  io::detail::write_text(path_in(rc, "oracle_1d.json"), j.dump(2) + "\n");
  if (worst > 1e-6) {
    std::fprintf(stderr, "1D oracle disagreement %.3e > 1e-6\n", worst);
    return exit_tolerance;
  }
  return exit_ok;
}

void write_error(const RunConfig& rc, const Error& e) {
  Json j;
  j["kind"] = std::string(to_string(e.kind()));
  j["stage"] = e.stage();
  j["message"] = e.what();
  j["exit_code"] = exit_code(e.kind());
  std::vector<std::size_t> nodes(e.nodes.begin(), e.nodes.begin() + std::min<std::size_t>(e.nodes.size(), 1000));
  j["nodes"] = nodes;
  j["history"] = e.history;
  j["partial_artifacts"] = true;
  try {
    io::detail::write_text(path_in(rc, "error.json"), j.dump(2) + "\n");
  } catch (const Error&) {
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jacshape: maps with prescribed Jacobian determinant"};
  app.require_subcommand(1);
  RunConfig rc;

  auto common = [&](CLI::App* s) {
    s->add_option("--domain", rc.domain, "disk | square | interval | mask:<pgm> | json:<descriptor>");
    s->add_option("--resolution", rc.resolution, "nodes per unit length");
    s->add_option("--out", rc.out, "output directory");
    s->add_option("--tol-det", rc.tol_det, "determinant residual tolerance");
    s->add_option("--tol-support", rc.tol_support, "support tolerance (default 1e-6 + 5 h^2)");
    s->add_option("--time-steps", rc.time_steps, "flow time steps");
    s->add_option("--seed", rc.seed, "seed for sample:random");
    s->add_option("--config", rc.config, "JSON config; keys override flags");
  };
  auto* solve = app.add_subcommand("solve", "solve det grad phi = f");
  common(solve);
  solve->add_option("--f", rc.f, "density file (.csv/.json) or sample:bump|one|random");
  solve->add_option("--collar", rc.collar, "collar thickness (fixed collar solve)");
  solve->add_option("--distance", rc.distance, "support distance (general solve; default: measured)");
  solve->add_option("--method", rc.method, "auto | moser | fixedpoint | full");
  solve->add_option("--mollify-radius", rc.mollify_radius, "mollifier radius for the full pipeline");

  auto* verify = app.add_subcommand("verify", "recompute residuals of a map");
  common(verify);
  verify->add_option("--phi", rc.phi, "map file (.json)");
  verify->add_option("--f", rc.f, "density file or sample:*");
  verify->add_option("--region", rc.region, "identity region node set (.json)");

  auto* correct = app.add_subcommand("correct-volume", "make a map volume preserving");
  common(correct);
  correct->add_option("--psi", rc.psi, "map file (.json) or sample:squeeze");
  correct->add_option("--distance", rc.distance, "distance from the boundary where psi is volume preserving");

  auto* experiment = app.add_subcommand("experiment-collar", "collar-thickness sweep");
  common(experiment);

  auto* oracle = app.add_subcommand("oracle-1d", "1D three-way agreement check");
  common(oracle);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_usage;
  }
  rc.command = app.get_subcommands().front()->get_name();
  if (rc.command == "oracle-1d" && oracle->count("--resolution") == 0) rc.resolution = 512;

  try {
    apply_config(rc);
    validate(rc);
    fs::create_directories(rc.out);
    if (rc.command == "solve") return cmd_solve(rc);
    if (rc.command == "verify") return cmd_verify(rc);
    if (rc.command == "correct-volume") return cmd_correct_volume(rc);
    if (rc.command == "experiment-collar") return cmd_experiment_collar(rc);
    if (rc.command == "oracle-1d") return cmd_oracle_1d(rc);
  } catch (const Error& e) {
    std::fprintf(stderr, "error [%s]%s%s: %s\n", std::string(to_string(e.kind())).c_str(),
                 e.stage().empty() ? "" : " in ", e.stage().c_str(), e.what());
    write_error(rc, e);
    return exit_code(e.kind());
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "error [io]: %s\n", e.what());
    return 2;
  }
  return exit_usage;
}
