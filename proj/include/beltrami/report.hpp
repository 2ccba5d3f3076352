#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "beltrami/errors.hpp"

namespace beltrami {

/// Deterministic pairwise summation; the result does not depend on how the
/// caller might later split the range across threads.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 16) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

struct Norms {
  double inf = 0.0;
  double l2 = 0.0;  // root-mean-square over the sampled nodes
};

inline Norms norms_of(std::span<const double> v) {
  Norms n;
  if (v.empty()) return n;
  std::vector<double> sq(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    n.inf = std::max(n.inf, std::abs(v[k]));
    sq[k] = v[k] * v[k];
  }
  n.l2 = std::sqrt(pairwise_sum(sq) / static_cast<double>(v.size()));
  return n;
}

struct DiagnosticEntry {
  std::string name;
  double norm_inf = 0.0;
  double norm_l2 = 0.0;
  double grid_spacing = 0.0;
};

struct DiagnosticReport {
  std::vector<DiagnosticEntry> entries;
  std::map<std::string, nlohmann::json> metadata;

  void add(std::string name, Norms n, double h) {
    detail::require(n.inf >= 0.0 && n.l2 >= 0.0, "norms must be non-negative");
    entries.push_back({std::move(name), n.inf, n.l2, h});
  }

  void add(std::string name, std::span<const double> samples, double h) { add(std::move(name), norms_of(samples), h); }

  [[nodiscard]] const DiagnosticEntry& at(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return e;
    throw PreconditionError("report has no entry '" + name + "'");
  }

  [[nodiscard]] bool has(const std::string& name) const {
    return std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.name == name; });
  }
};

/// Observed convergence order from two reports of the same diagnostic.
inline double observed_order(const DiagnosticEntry& coarse, const DiagnosticEntry& fine, bool use_l2 = false) {
  const double ec = use_l2 ? coarse.norm_l2 : coarse.norm_inf;
  const double ef = use_l2 ? fine.norm_l2 : fine.norm_inf;
  return std::log(ec / ef) / std::log(coarse.grid_spacing / fine.grid_spacing);
}

inline nlohmann::json to_json(const DiagnosticReport& r) {
  nlohmann::json j;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : r.entries)
    j["entries"].push_back(
        {{"name", e.name}, {"norm_inf", e.norm_inf}, {"norm_l2", e.norm_l2}, {"grid_spacing", e.grid_spacing}});
  j["metadata"] = nlohmann::json::object();
  for (const auto& [k, v] : r.metadata) j["metadata"][k] = v;
  return j;
}

inline DiagnosticReport report_from_json(const nlohmann::json& j) {
  DiagnosticReport r;
  for (const auto& e : j.at("entries"))
    r.entries.push_back({e.at("name").get<std::string>(), e.at("norm_inf").get<double>(),
                         e.at("norm_l2").get<double>(), e.at("grid_spacing").get<double>()});
  if (j.contains("metadata"))
    for (const auto& [k, v] : j.at("metadata").items()) r.metadata[k] = v;
  return r;
}

}  // namespace beltrami
