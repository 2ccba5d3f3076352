#pragma once

// Field files: one JSON header line (chart, origin, spacing, shape, component
// names), one CSV column-name line, then one row per node in row-major order.
// Numbers are written with 17 significant digits so a write/read cycle is
// bit-exact.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "beltrami/errors.hpp"
#include "beltrami/grid.hpp"
#include "beltrami/profile.hpp"
#include "beltrami/vector_field.hpp"

namespace beltrami {

inline std::string format_double(double x) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", x);
  return std::string(buf, static_cast<std::size_t>(n));
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw PreconditionError("malformed number '" + std::string(s) + "'");
  return v;
}

inline nlohmann::json to_json(const RadialProfile& p) {
  nlohmann::json j;
  j["shape"] = std::string(to_string(p.shape()));
  j["a"] = p.param_a();
  j["b"] = p.param_b();
  j["grid"] = {{"origin", p.grid().origin}, {"spacing", p.grid().spacing}, {"size", p.grid().size}};
  if (!p.is_tagged()) j["samples"] = p.samples();
  return j;
}

inline RadialProfile profile_from_json(const nlohmann::json& j) {
  Grid1 g{0.0, 1.0, 5};
  if (j.contains("grid")) {
    const auto& jg = j.at("grid");
    g = {jg.at("origin").get<double>(), jg.at("spacing").get<double>(), jg.at("size").get<std::size_t>()};
  }
  const auto shape = j.at("shape").get<std::string>();
  const double a = j.value("a", 0.0), b = j.value("b", 0.0);
  if (shape == "constant") return RadialProfile::constant(a, g);
  if (shape == "linear") return RadialProfile::linear(a, b, g);
  if (shape == "power") return RadialProfile::power(a, b, g);
  if (shape == "exponential") return RadialProfile::exponential(a, b, g);
  if (shape == "sampled") return RadialProfile::sampled(g, j.at("samples").get<std::vector<double>>());
  throw PreconditionError("unknown profile shape '" + shape + "'");
}

/// In-memory form of a field file: a header plus named component columns.
struct FieldTable {
  nlohmann::json header;
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
};

inline void write_table(std::ostream& os, const FieldTable& t) {
  os << t.header.dump() << '\n';
  for (std::size_t c = 0; c < t.names.size(); ++c) os << (c ? "," : "") << t.names[c];
  os << '\n';
  const std::size_t rows = t.columns.empty() ? 0 : t.columns[0].size();
  std::string line;
  for (std::size_t r = 0; r < rows; ++r) {
    line.clear();
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (c) line += ',';
      line += format_double(t.columns[c][r]);
    }
    os << line << '\n';
  }
}

inline FieldTable read_table(std::istream& is) {
  FieldTable t;
  std::string line;
  if (!std::getline(is, line)) throw PreconditionError("field file is empty");
  try {
    t.header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw PreconditionError(std::string("field file header is not JSON: ") + e.what());
  }
  if (!std::getline(is, line)) throw PreconditionError("field file lacks the column line");
  std::stringstream ss(line);
  for (std::string name; std::getline(ss, name, ',');) t.names.push_back(name);
  t.columns.resize(t.names.size());
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::size_t c = 0, start = 0;
    while (true) {
      const auto pos = line.find(',', start);
      const auto tok = std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start);
      if (c >= t.columns.size()) throw PreconditionError("field row has too many columns");
      t.columns[c++].push_back(parse_double(tok));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (c != t.columns.size()) throw PreconditionError("field row has too few columns");
  }
  return t;
}

namespace detail {

inline nlohmann::json grid_header(const Grid2& g) {
  return {{"chart", std::string(to_string(g.chart))},
          {"origin", g.origin},
          {"spacing", g.spacing},
          {"shape", g.shape}};
}

inline nlohmann::json grid_header(const Grid3& g) {
  return {{"chart", "full-3d"}, {"origin", g.origin}, {"spacing", g.spacing}, {"shape", g.shape}};
}

inline Grid2 grid2_from(const nlohmann::json& h) {
  Grid2 g;
  g.chart = chart_from_string(h.at("chart").get<std::string>());
  g.origin = h.at("origin").get<std::array<double, 2>>();
  g.spacing = h.at("spacing").get<std::array<double, 2>>();
  g.shape = h.at("shape").get<std::array<std::size_t, 2>>();
  g.validate();
  return g;
}

inline Grid3 grid3_from(const nlohmann::json& h) {
  Grid3 g;
  g.origin = h.at("origin").get<std::array<double, 3>>();
  g.spacing = h.at("spacing").get<std::array<double, 3>>();
  g.shape = h.at("shape").get<std::array<std::size_t, 3>>();
  g.validate();
  return g;
}

inline std::vector<double> to_vector(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace detail

inline FieldTable to_table(const ScalarChartField& f) {
  FieldTable t;
  t.header = detail::grid_header(f.grid());
  t.header["kind"] = "scalar";
  t.header["name"] = f.name();
  t.header["components"] = {f.name().empty() ? "value" : f.name()};
  t.names = t.header["components"].get<std::vector<std::string>>();
  t.columns = {detail::to_vector(f.values())};
  return t;
}

inline FieldTable to_table(const ScalarField3& f) {
  FieldTable t;
  t.header = detail::grid_header(f.grid);
  t.header["kind"] = "scalar";
  t.header["components"] = {"value"};
  t.names = {"value"};
  t.columns = {f.values};
  return t;
}

inline FieldTable to_table(const SymmetricVectorField& u) {
  FieldTable t;
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, TranslationalField>) {
          t.header = detail::grid_header(v.c[0].grid());
          t.names = {"u1", "u2", "u3"};
          for (const auto& c : v.c) t.columns.push_back(detail::to_vector(c.values()));
        } else if constexpr (std::is_same_v<T, RotationalField>) {
          t.header = detail::grid_header(v.c[0].grid());
          t.names = {"u_r", "u_theta", "u_z"};
          for (const auto& c : v.c) t.columns.push_back(detail::to_vector(c.values()));
        } else if constexpr (std::is_same_v<T, ZPlanarField>) {
          t.header = detail::grid_header(v.v1.grid());
          t.header["factor"] = to_json(v.factor);
          t.header["z"] = {{"origin", v.z.origin}, {"spacing", v.z.spacing}, {"size", v.z.size}};
          t.names = {"v1", "v2"};
          t.columns = {detail::to_vector(v.v1.values()), detail::to_vector(v.v2.values())};
        } else {
          t.header = detail::grid_header(v.grid);
          t.names = {"u1", "u2", "u3"};
          t.columns = {v.c[0], v.c[1], v.c[2]};
        }
      },
      u);
  t.header["kind"] = "vector";
  t.header["symmetry"] = std::string(to_string(symmetry_of(u)));
  t.header["components"] = t.names;
  return t;
}

inline ScalarChartField scalar_from_table(const FieldTable& t) {
  detail::require(t.header.value("kind", "") == "scalar" && t.columns.size() == 1, "file does not hold a scalar field");
  const Grid2 g = detail::grid2_from(t.header);
  return {g, t.columns[0], t.header.value("name", "")};
}

inline ScalarField3 scalar3_from_table(const FieldTable& t) {
  detail::require(t.header.value("kind", "") == "scalar" && t.columns.size() == 1, "file does not hold a scalar field");
  const Grid3 g = detail::grid3_from(t.header);
  detail::require(t.columns[0].size() == g.size(), "row count does not match grid shape");
  return {g, t.columns[0]};
}

inline SymmetricVectorField vector_from_table(const FieldTable& t) {
  detail::require(t.header.value("kind", "") == "vector", "file does not hold a vector field");
  const auto sym = t.header.at("symmetry").get<std::string>();
  if (sym == "none") {
    const Grid3 g = detail::grid3_from(t.header);
    detail::require(t.columns.size() == 3 && t.columns[0].size() == g.size(), "row count does not match grid shape");
    return GridVectorField{g, {t.columns[0], t.columns[1], t.columns[2]}};
  }
  const Grid2 g = detail::grid2_from(t.header);
  if (sym == "z-planar") {
    detail::require(t.columns.size() == 2, "z-planar field needs two columns");
    const auto& jz = t.header.at("z");
    Grid1 z{jz.at("origin").get<double>(), jz.at("spacing").get<double>(), jz.at("size").get<std::size_t>()};
    return ZPlanarField{ScalarChartField(g, t.columns[0], "v1"), ScalarChartField(g, t.columns[1], "v2"),
                        profile_from_json(t.header.at("factor")), z};
  }
  detail::require(t.columns.size() == 3, "vector field needs three columns");
  std::array<ScalarChartField, 3> c{ScalarChartField(g, t.columns[0], t.names[0]),
                                    ScalarChartField(g, t.columns[1], t.names[1]),
                                    ScalarChartField(g, t.columns[2], t.names[2])};
  if (sym == "translational") return TranslationalField{c};
  if (sym == "rotational") return RotationalField{c};
  throw PreconditionError("unknown symmetry tag '" + sym + "'");
}

template <class T>
void write_field_file(const std::string& path, const T& field) {
  std::ofstream os(path);
  if (!os) throw PreconditionError("cannot open '" + path + "' for writing");
  write_table(os, to_table(field));
}

inline FieldTable read_field_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw PreconditionError("cannot open '" + path + "'");
  return read_table(is);
}

}  // namespace beltrami
