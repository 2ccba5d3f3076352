// beltrami_lab: scenario runner and one-shot field tools.
//
//   beltrami_lab run <scenario.json> [--out DIR]
//   beltrami_lab generate <abc|radial|rotated-harmonic> [options]
//   beltrami_lab check <field.csv> --factor <f.csv|f.json> [--max X]
//   beltrami_lab render <artifact> [-o out.svg]
//
// Exit codes: 0 ok, 1 invalid input, 2 numerical failure, 3 threshold violated.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "beltrami/beltrami.hpp"

namespace fs = std::filesystem;
using namespace beltrami;

namespace {

int report_run(const RunResult& r) {
  if (!r.dir.empty()) std::cout << "artifacts: " << r.dir.string() << '\n';
  for (const auto& v : r.violations) std::cerr << "threshold: " << v.stage << ": " << v.what << '\n';
  if (r.exit_code != 0) std::cerr << "error: " << r.message << '\n';
  return r.exit_code;
}

FactorField read_factor(const std::string& path) {
  if (fs::path(path).extension() == ".json") {
    std::ifstream is(path);
    if (!is) throw PreconditionError("cannot open '" + path + "'");
    try {
      return profile_from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::exception& e) {
      throw PreconditionError("factor file is not a profile: " + std::string(e.what()));
    }
  }
  const auto t = read_field_file(path);
  if (t.header.value("chart", "") == "full-3d") return scalar3_from_table(t);
  return scalar_from_table(t);
}

std::vector<double> csv_column(const std::vector<std::vector<double>>& rows, std::size_t c) {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(c < r.size() ? r[c] : NAN);
  return v;
}

// Plain CSV with a header line; empty cells read as NaN.
std::pair<std::vector<std::string>, std::vector<std::vector<double>>> read_csv(std::istream& is) {
  std::string line;
  std::vector<std::string> names;
  if (!std::getline(is, line)) throw PreconditionError("empty CSV");
  std::stringstream hs(line);
  for (std::string s; std::getline(hs, s, ',');) names.push_back(s);
  std::vector<std::vector<double>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<double> r;
    std::stringstream ss(line);
    for (std::string s; std::getline(ss, s, ',');) r.push_back(s.empty() ? NAN : parse_double(s));
    rows.push_back(std::move(r));
  }
  return {names, rows};
}

void render(const std::string& in, const std::string& out, std::size_t component, const std::vector<double>& contours) {
  std::ifstream is(in);
  if (!is) throw PreconditionError("cannot open '" + in + "'");
  std::ofstream os(out, std::ios::binary);
  if (!os) throw PreconditionError("cannot write '" + out + "'");
  const std::string title = fs::path(in).filename().string();
  if (fs::path(in).extension() == ".json") {
    // Report: every numeric array in the metadata whose name ends in "history".
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      throw PreconditionError("not a JSON report: " + std::string(e.what()));
    }
    std::vector<Series> series;
    if (j.contains("metadata"))
      for (const auto& [k, v] : j.at("metadata").items()) {
        if (k.size() < 7 || k.compare(k.size() - 7, 7, "history") != 0 || !v.is_array()) continue;
        Series s{k, {}, {}};
        for (std::size_t n = 0; n < v.size(); ++n)
          if (v[n].is_number()) {
            s.x.push_back(static_cast<double>(n));
            s.y.push_back(v[n].get<double>());
          }
        series.push_back(std::move(s));
      }
    if (series.empty()) throw PreconditionError("report has no history to plot");
    render_lines(os, series, {.title = title});
    return;
  }
  std::string first;
  std::getline(is, first);
  is.seekg(0);
  if (!first.empty() && first.front() == '{') {
    const auto t = read_table(is);
    detail::require(t.header.value("chart", "") != "full-3d", "render draws 2D chart fields only");
    detail::require(component < t.columns.size(), "component index out of range");
    const Grid2 g = detail::grid2_from(t.header);
    const ScalarChartField f(g, t.columns[component], t.names[component]);
    render_heatmap(os, f, {.title = title + " : " + t.names[component], .contours = contours});
    return;
  }
  const auto [names, rows] = read_csv(is);
  if (names.size() > 3 && names[0] == "xi1" && names[1] == "xi2" && names[2] == "t") {
    // Pullback form: heatmap over (xi1, t) on the first xi2 slice.
    detail::require(component + 3 < names.size(), "component index out of range");
    std::vector<double> xi1, t, v;
    for (const auto& r : rows) {
      if (r[1] != rows.front()[1]) continue;
      if (t.empty() || r[2] != t.back()) t.push_back(r[2]);
      if (t.size() == 1) xi1.push_back(r[0]);
      v.push_back(r[3 + component]);
    }
    detail::require(xi1.size() >= 2 && t.size() >= 2 && v.size() == xi1.size() * t.size(), "form CSV is not a full grid");
    std::vector<double> vals(v.size());
    for (std::size_t k = 0; k < t.size(); ++k)
      for (std::size_t i = 0; i < xi1.size(); ++i) vals[i * t.size() + k] = v[k * xi1.size() + i];
    const auto g = Grid2::spanning(Chart::cartesian_xy, {xi1.front(), t.front()}, {xi1.back(), t.back()}, {xi1.size(), t.size()});
    const ScalarChartField f(g, std::move(vals), names[3 + component]);
    render_heatmap(os, f, {.title = title + " : " + names[3 + component] + " (xi1, t)", .contours = contours});
    return;
  }
  // History CSV: first column is the abscissa.
  detail::require(names.size() >= 2 && !rows.empty(), "CSV needs an abscissa and at least one column");
  std::vector<Series> series;
  const auto x = csv_column(rows, 0);
  for (std::size_t c = 1; c < names.size(); ++c) series.push_back({names[c], x, csv_column(rows, c)});
  render_lines(os, series, {.title = title, .xlabel = names[0]});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beltrami field lab: scenarios, generators, residual checks and figures"};
  app.require_subcommand(1);

  std::string scenario, out_root;
  auto* run = app.add_subcommand("run", "run a JSON scenario");
  run->add_option("scenario", scenario, "scenario file")->required();
  run->add_option("--out", out_root, "output root (default: $BELTRAMI_OUT or ./beltrami_out)");

  std::string family, gen_out = "field";
  double A = 1, B = 1, C = 1, r0 = 0.05, r1 = 5.0, step = 1e-3, half_width = 1.0, z0 = 0.0, z1 = 1.0;
  std::size_t n = 32, nz = 33;
  std::string profile = R"({"shape":"constant","a":1})";
  auto* gen = app.add_subcommand("generate", "write a generated field and its factor");
  gen->add_option("family", family, "abc | radial | rotated-harmonic")->required();
  gen->add_option("--A", A);
  gen->add_option("--B", B);
  gen->add_option("--C", C);
  gen->add_option("--n", n, "grid nodes per axis");
  gen->add_option("--nz", nz, "z nodes (radial, rotated-harmonic)");
  gen->add_option("--profile", profile, "factor profile as JSON");
  gen->add_option("--r0", r0);
  gen->add_option("--r1", r1);
  gen->add_option("--step", step);
  gen->add_option("--half-width", half_width);
  gen->add_option("--z0", z0);
  gen->add_option("--z1", z1);
  gen->add_option("--name", gen_out, "file prefix inside the output root");
  gen->add_option("--out", out_root, "output root");

  std::string field_file, factor_file;
  double max_residual = -1.0;
  auto* check = app.add_subcommand("check", "Beltrami residual of a field file against a factor");
  check->add_option("field", field_file, "vector field CSV")->required();
  check->add_option("--factor", factor_file, "factor CSV or profile JSON")->required();
  check->add_option("--max", max_residual, "fail with exit 3 when max |curl u - f u| exceeds this");

  std::string artifact, svg_out;
  std::size_t component = 0;
  std::vector<double> contours;
  auto* rend = app.add_subcommand("render", "SVG heatmap of a chart field or line plot of a history");
  rend->add_option("artifact", artifact, "field CSV, history CSV or report JSON")->required();
  rend->add_option("-o,--output", svg_out, "SVG file (default: artifact name + .svg)");
  rend->add_option("--component", component, "field column to draw");
  rend->add_option("--contour", contours, "level lines to draw");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    const std::optional<fs::path> root = out_root.empty() ? std::nullopt : std::optional<fs::path>(out_root);
    if (*run) return report_run(run_scenario_file(scenario, output_root(root)));

    if (*gen) {
      nlohmann::json stage{{"id", gen_out}, {"op", "generate"}, {"family", family}};
      if (family == "abc") {
        stage.update({{"A", A}, {"B", B}, {"C", C}, {"n", n}});
      } else if (family == "radial") {
        stage.update({{"r0", r0}, {"r1", r1}, {"step", step}, {"nz", nz}, {"profile", nlohmann::json::parse(profile)}});
      } else if (family == "rotated-harmonic") {
        stage.update({{"n", n}, {"nz", nz}, {"half_width", half_width}, {"z0", z0}, {"z1", z1}});
        if (gen->count("--profile")) stage["profile"] = nlohmann::json::parse(profile);
      }
      const fs::path dir = output_root(root);
      fs::create_directories(dir);
      nlohmann::json artifacts = nlohmann::json::array(), grid;
      detail::Params p(stage, gen_out);
      detail::Context ctx;
      detail::Writer w(dir, gen_out, artifacts);
      detail::run_generate(p, ctx, w, grid);
      for (const auto& a : artifacts) std::cout << (dir / a.get<std::string>()).string() << '\n';
      return 0;
    }

    if (*check) {
      const auto u = vector_from_table(read_field_file(field_file));
      const auto rep = beltrami_residual(u, read_factor(factor_file));
      std::cout << to_json(rep).dump(2) << '\n';
      if (max_residual >= 0.0 && rep.at("curl_minus_fu").norm_inf > max_residual) {
        std::cerr << "threshold: curl_minus_fu = " << format_double(rep.at("curl_minus_fu").norm_inf) << " > "
                  << format_double(max_residual) << '\n';
        return 3;
      }
      return 0;
    }

    if (*rend) {
      const std::string out = svg_out.empty() ? artifact + ".svg" : svg_out;
      render(artifact, out, component, contours);
      std::cout << out << '\n';
      return 0;
    }
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
