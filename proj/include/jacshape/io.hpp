#pragma once

// Field, map, domain and report serialization; PGM heatmaps.

#include <openssl/evp.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "jacshape/domain.hpp"
#include "jacshape/error.hpp"
#include "jacshape/field.hpp"
#include "jacshape/grid_map.hpp"
#include "jacshape/pgm.hpp"
#include "jacshape/report.hpp"

namespace jacshape::io {

using Json = nlohmann::ordered_json;

namespace detail {

inline std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::io, "cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::io, "cannot write " + path);
  out << text;
  if (!out) fail(ErrorKind::io, "write failed for " + path);
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Json parse(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, what + ": " + e.what());
  }
}

template <class T>
T get(const Json& j, const char* key, const std::string& what) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorKind::io, what + ": missing or malformed \"" + key + "\"");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// base64 of little-endian doubles

inline std::string encode_doubles(const std::vector<double>& v) {
  std::vector<unsigned char> raw(v.size() * 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(v[i]);
    for (int b = 0; b < 8; ++b) raw[8 * i + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  std::string out(4 * ((raw.size() + 2) / 3) + 1, '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), raw.data(), static_cast<int>(raw.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline std::vector<double> decode_doubles(const std::string& text, std::size_t count) {
  if (text.size() % 4 != 0) fail(ErrorKind::io, "base64 payload length is not a multiple of 4");
  std::vector<unsigned char> raw(3 * (text.size() / 4) + 1);
  const int n = EVP_DecodeBlock(raw.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) fail(ErrorKind::io, "invalid base64 payload");
  std::size_t pad = 0;
  if (!text.empty() && text.back() == '=') ++pad;
  if (text.size() > 1 && text[text.size() - 2] == '=') ++pad;
  if (static_cast<std::size_t>(n) - pad != count * 8)
    fail(ErrorKind::shape_mismatch, "payload holds " + std::to_string((n - pad) / 8) + " values, expected " +
                                        std::to_string(count));
  std::vector<double> v(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(raw[8 * i + b]) << (8 * b);
    v[i] = std::bit_cast<double>(bits);
  }
  return v;
}

// ---------------------------------------------------------------------------
// Domain descriptor

inline std::string shape_name(ShapeDescriptor::Kind k) { return to_string(k); }

inline ShapeDescriptor::Kind shape_kind(const std::string& s) {
  using K = ShapeDescriptor::Kind;
  if (s == "interval") return K::interval;
  if (s == "disk") return K::disk;
  if (s == "rectangle" || s == "square") return K::rectangle;
  if (s == "mask") return K::mask_file;
  fail(ErrorKind::invalid_argument, "unknown domain shape '" + s + "'");
}

inline Json domain_json(const Domain& d) {
  if (d.shape.kind == ShapeDescriptor::Kind::subdomain)
    fail(ErrorKind::invalid_argument, "subdomains have no standalone descriptor");
  Json j;
  j["shape"] = shape_name(d.shape.kind);
  j["params"] = d.shape.params;
  if (d.shape.kind == ShapeDescriptor::Kind::mask_file) j["path"] = d.shape.path;
  j["resolution"] = d.resolution;
  return j;
}

inline DomainPtr domain_from_json(const Json& j) {
  const std::string what = "domain descriptor";
  ShapeDescriptor s;
  s.kind = shape_kind(detail::get<std::string>(j, "shape", what));
  if (j.contains("params")) s.params = detail::get<std::vector<double>>(j, "params", what);
  if (s.kind == ShapeDescriptor::Kind::mask_file) s.path = detail::get<std::string>(j, "path", what);
  if (s.kind == ShapeDescriptor::Kind::rectangle && s.params.empty()) s = ShapeDescriptor::unit_square();
  return build_domain(s, detail::get<int>(j, "resolution", what));
}

inline void write_domain(const std::string& path, const Domain& d) {
  detail::write_text(path, domain_json(d).dump(2) + "\n");
}

inline DomainPtr read_domain(const std::string& path) {
  return domain_from_json(detail::parse(detail::read_text(path), path));
}

// ---------------------------------------------------------------------------
// CSV: header line, then one line per grid row; vector components follow
// each other as blocks of rows.

inline Json grid_json(const Grid& g) {
  Json j;
  j["nx"] = g.nx;
  j["ny"] = g.ny;
  j["x0"] = g.x0;
  j["y0"] = g.y0;
  j["h_grid"] = g.h;
  return j;
}

inline std::string to_csv(const Grid& g, const std::vector<std::vector<double>>& comps) {
  std::string s = "nx,ny,x0,y0,h_grid,components\n";
  s += std::to_string(g.nx) + "," + std::to_string(g.ny) + "," + detail::fmt17(g.x0) + "," + detail::fmt17(g.y0) +
       "," + detail::fmt17(g.h) + "," + std::to_string(comps.size()) + "\n";
  for (const auto& c : comps)
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        if (i) s += ',';
        s += detail::fmt17(c[g.index(i, j)]);
      }
      s += '\n';
    }
  return s;
}

struct CsvData {
  Grid grid;
  std::vector<std::vector<double>> comps;
};

inline CsvData parse_csv(const std::string& text, const std::string& what) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("nx,ny,x0,y0,h_grid", 0) != 0)
    fail(ErrorKind::io, what + ": missing CSV header");
  if (!std::getline(in, line)) fail(ErrorKind::io, what + ": missing grid line");
  CsvData d;
  int ncomp = 1;
  {
    std::vector<std::string> tok;
    std::stringstream ls(line);
    for (std::string t; std::getline(ls, t, ',');) tok.push_back(t);
    if (tok.size() < 5) fail(ErrorKind::io, what + ": malformed grid line");
    try {
      d.grid.nx = std::stoi(tok[0]);
      d.grid.ny = std::stoi(tok[1]);
      d.grid.x0 = std::stod(tok[2]);
      d.grid.y0 = std::stod(tok[3]);
      d.grid.h = std::stod(tok[4]);
      if (tok.size() > 5) ncomp = std::stoi(tok[5]);
    } catch (const std::exception&) {
      fail(ErrorKind::io, what + ": malformed grid line");
    }
    d.grid.dim = d.grid.ny == 1 ? 1 : 2;
  }
  if (d.grid.nx <= 0 || d.grid.ny <= 0 || ncomp < 1 || ncomp > 2) fail(ErrorKind::io, what + ": bad dimensions");
  d.comps.assign(ncomp, std::vector<double>(d.grid.size()));
  for (int c = 0; c < ncomp; ++c)
    for (int j = 0; j < d.grid.ny; ++j) {
      if (!std::getline(in, line)) fail(ErrorKind::shape_mismatch, what + ": too few rows");
      std::stringstream ls(line);
      int i = 0;
      for (std::string t; std::getline(ls, t, ','); ++i) {
        if (i >= d.grid.nx) fail(ErrorKind::shape_mismatch, what + ": row too long");
        char* end = nullptr;
        d.comps[c][d.grid.index(i, j)] = std::strtod(t.c_str(), &end);
        if (end == t.c_str()) fail(ErrorKind::io, what + ": bad number '" + t + "'");
      }
      if (i != d.grid.nx) fail(ErrorKind::shape_mismatch, what + ": row too short");
    }
  return d;
}

// ---------------------------------------------------------------------------
// JSON envelope with base64 payload

inline Json field_json(const std::string& type, const Domain& d, const std::vector<std::vector<double>>& comps) {
  Json j;
  j["format"] = "jacshape-field";
  j["type"] = type;
  j["domain"] = domain_json(d);
  j["grid"] = grid_json(d.grid);
  j["components"] = comps.size();
  j["encoding"] = "base64-f64le";
  Json data = Json::array();
  for (const auto& c : comps) data.push_back(encode_doubles(c));
  j["data"] = data;
  return j;
}

struct FieldData {
  DomainPtr domain;
  std::vector<std::vector<double>> comps;
  Json meta;  // whole envelope (JSON input) or empty (CSV input)
};

inline void check_grid(const Grid& expected, const Grid& got, const std::string& what) {
  if (!expected.same_as(got))
    fail(ErrorKind::shape_mismatch, what + ": grid " + std::to_string(got.nx) + "x" + std::to_string(got.ny) +
                                        " does not match the domain grid " + std::to_string(expected.nx) + "x" +
                                        std::to_string(expected.ny));
}

/// Reads a .json envelope (carries its own domain) or a .csv file (needs
/// `domain`). When both are present the grids must agree.
inline FieldData read_field_data(const std::string& path, DomainPtr domain) {
  const std::string text = detail::read_text(path);
  FieldData out;
  const bool is_json = path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
  if (is_json) {
    Json j = detail::parse(text, path);
    if (!j.contains("format") || j["format"] != "jacshape-field") fail(ErrorKind::io, path + ": not a field file");
    out.domain = domain ? domain : domain_from_json(j.at("domain"));
    Grid g;
    const Json& gj = j.at("grid");
    g.nx = gj.at("nx");
    g.ny = gj.at("ny");
    g.x0 = gj.at("x0");
    g.y0 = gj.at("y0");
    g.h = gj.at("h_grid");
    g.dim = out.domain->grid.dim;
    check_grid(out.domain->grid, g, path);
    for (const auto& c : j.at("data")) out.comps.push_back(decode_doubles(c.get<std::string>(), g.size()));
    out.meta = std::move(j);
  } else {
    if (!domain) fail(ErrorKind::invalid_argument, path + ": CSV fields need a domain (--domain/--resolution)");
    CsvData c = parse_csv(text, path);
    c.grid.dim = domain->grid.dim;
    check_grid(domain->grid, c.grid, path);
    out.domain = std::move(domain);
    out.comps = std::move(c.comps);
  }
  return out;
}

inline bool is_json_path(const std::string& path) {
  return path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0;
}

inline void write_scalar(const std::string& path, const ScalarField& f) {
  if (is_json_path(path)) {
    Json j = field_json("scalar", *f.domain, {f.values});
    j["fill"] = f.fill == Fill::one ? "one" : "zero";
    detail::write_text(path, j.dump() + "\n");
  } else {
    detail::write_text(path, to_csv(f.grid(), {f.values}));
  }
}

inline ScalarField read_scalar(const std::string& path, DomainPtr domain, Fill fill) {
  FieldData d = read_field_data(path, std::move(domain));
  if (d.comps.size() != 1) fail(ErrorKind::shape_mismatch, path + ": expected a scalar field");
  ScalarField f = ScalarField::constant(d.domain, 0.0, fill);
  for (std::size_t n : d.domain->nodes) f.values[n] = d.comps[0][n];
  return f;
}

inline void write_vector(const std::string& path, const VectorField& v) {
  if (is_json_path(path))
    detail::write_text(path, field_json("vector", *v.domain, v.comp).dump() + "\n");
  else
    detail::write_text(path, to_csv(v.grid(), v.comp));
}

inline std::string interp_name(Interp i) { return i == Interp::bicubic ? "bicubic" : "bilinear"; }

inline Interp interp_from(const std::string& s) {
  if (s == "bicubic") return Interp::bicubic;
  if (s == "bilinear") return Interp::bilinear;
  fail(ErrorKind::io, "unknown interpolation '" + s + "'");
}

inline Json report_json(const SolveReport& r);

/// Map files store the displacement field; `report` is attached when given.
inline void write_map(const std::string& path, const GridMap& phi, const SolveReport* report = nullptr) {
  Json j = field_json("map", *phi.domain(), phi.displacement.comp);
  j["interp"] = interp_name(phi.interp);
  if (report) j["report"] = report_json(*report);
  detail::write_text(path, j.dump() + "\n");
}

struct MapFile {
  GridMap phi;
  Json report;  // null when absent
};

inline MapFile read_map(const std::string& path, DomainPtr domain = nullptr) {
  FieldData d = read_field_data(path, std::move(domain));
  MapFile m;
  m.phi = GridMap{VectorField::zeros(d.domain), Interp::bicubic};
  if (static_cast<int>(d.comps.size()) != d.domain->dim())
    fail(ErrorKind::shape_mismatch, path + ": map has " + std::to_string(d.comps.size()) + " components");
  for (int k = 0; k < d.domain->dim(); ++k)
    for (std::size_t n : d.domain->nodes) m.phi.displacement.comp[k][n] = d.comps[k][n];
  if (d.meta.contains("interp")) m.phi.interp = interp_from(d.meta["interp"]);
  if (d.meta.contains("report")) m.report = d.meta["report"];
  return m;
}

// ---------------------------------------------------------------------------
// Reports and node sets

inline Json report_json(const SolveReport& r) {
  Json j;
  j["method"] = to_string(r.method);
  j["det_residual_inf"] = r.det_residual_inf;
  j["support_violation_inf"] = r.support_violation_inf;
  j["mass_error"] = r.mass_error;
  j["iterations"] = r.iterations;
  j["collar_thickness"] = r.collar_thickness;
  j["norm_ratio"] = r.norm_ratio;
  return j;
}

inline Method method_from(const std::string& s) {
  for (Method m : {Method::oned, Method::moser, Method::fixedpoint, Method::full, Method::general})
    if (to_string(m) == s) return m;
  fail(ErrorKind::io, "unknown method '" + s + "'");
}

inline SolveReport report_from_json(const Json& j) {
  const std::string what = "report";
  SolveReport r;
  r.method = method_from(detail::get<std::string>(j, "method", what));
  r.det_residual_inf = detail::get<double>(j, "det_residual_inf", what);
  r.support_violation_inf = detail::get<double>(j, "support_violation_inf", what);
  r.mass_error = detail::get<double>(j, "mass_error", what);
  r.iterations = detail::get<int>(j, "iterations", what);
  r.collar_thickness = detail::get<double>(j, "collar_thickness", what);
  r.norm_ratio = detail::get<double>(j, "norm_ratio", what);
  return r;
}

inline void write_report(const std::string& path, const SolveReport& r) {
  detail::write_text(path, report_json(r).dump(2) + "\n");
}

inline void write_nodes(const std::string& path, const Domain& d, const std::vector<std::size_t>& nodes) {
  Json j;
  j["grid"] = grid_json(d.grid);
  j["nodes"] = nodes;
  detail::write_text(path, j.dump() + "\n");
}

inline std::vector<std::size_t> read_nodes(const std::string& path, const Domain& d) {
  const Json j = detail::parse(detail::read_text(path), path);
  const auto nodes = detail::get<std::vector<std::size_t>>(j, "nodes", path);
  for (std::size_t n : nodes)
    if (n >= d.grid.size() || !d.inside(n)) fail(ErrorKind::shape_mismatch, path + ": node outside the domain");
  return nodes;
}

// ---------------------------------------------------------------------------
// Heatmaps

struct HeatmapScale {
  double min = 0.0;
  double max = 0.0;
};

/// Min-max scaled PGM of the in-mask values (off-mask pixels black, image row
/// 0 = top grid row); the scale goes to `<path>.json`.
inline HeatmapScale write_heatmap(const std::string& path, const Domain& d, const std::vector<double>& v) {
  const Grid& g = d.grid;
  HeatmapScale s;
  bool first = true;
  for (std::size_t n : d.nodes) {
    if (first) {
      s.min = s.max = v[n];
      first = false;
    }
    s.min = std::min(s.min, v[n]);
    s.max = std::max(s.max, v[n]);
  }
  GrayImage img;
  img.width = g.nx;
  img.height = g.ny;
  img.pixels.assign(g.size(), 0);
  const double span = s.max - s.min;
  for (std::size_t n : d.nodes) {
    const int i = g.col(n), j = g.row(n);
    const double t = span > 0 ? (v[n] - s.min) / span : 0.0;
    img.pixels[static_cast<std::size_t>(g.ny - 1 - j) * g.nx + i] =
        static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255));
  }
  write_pgm(path, img);
  Json j;
  j["image"] = path.substr(path.find_last_of('/') + 1);
  j["width"] = g.nx;
  j["height"] = g.ny;
  j["min"] = s.min;
  j["max"] = s.max;
  j["off_mask"] = 0;
  detail::write_text(path + ".json", j.dump(2) + "\n");
  return s;
}

}  // namespace jacshape::io
