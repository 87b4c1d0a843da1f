#include "tailrep/report.hpp"

#include <cmath>
#include <cstdio>

#include "tailrep/error.hpp"

namespace tailrep {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void DiagnosticReport::validate() const {
  auto check = [](double v, const std::string& where) {
    if (!std::isfinite(v)) throw DomainError("non-finite value in report entry '" + where + "'");
  };
  for (const auto& [k, v] : scalars) check(v, k);
  for (const auto& [k, s] : series) {
    for (const auto& [x, y] : s) {
      check(x, k);
      check(y, k);
    }
  }
  for (const auto& [k, p] : pvalues) {
    for (double v : p) check(v, k);
  }
}

nlohmann::ordered_json DiagnosticReport::to_json() const {
  validate();
  nlohmann::ordered_json j;
  j["meta"] = meta;
  j["scalars"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : scalars) j["scalars"][k] = v;
  j["series"] = nlohmann::ordered_json::object();
  for (const auto& [k, s] : series) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& [x, y] : s) arr.push_back({x, y});
    j["series"][k] = std::move(arr);
  }
  j["pvalues"] = nlohmann::ordered_json::object();
  for (const auto& [k, p] : pvalues) j["pvalues"][k] = p;
  return j;
}

std::string DiagnosticReport::to_json_string() const { return to_json().dump(1) + "\n"; }

DiagnosticReport DiagnosticReport::from_json(const nlohmann::ordered_json& j) {
  try {
    DiagnosticReport r;
    r.meta = j.at("meta");
    for (const auto& [k, v] : j.at("scalars").items()) r.scalars[k] = v.get<double>();
    for (const auto& [k, v] : j.at("series").items()) {
      auto& s = r.series[k];
      for (const auto& pt : v) s.emplace_back(pt.at(0).get<double>(), pt.at(1).get<double>());
    }
    for (const auto& [k, v] : j.at("pvalues").items()) r.pvalues[k] = v.get<std::vector<double>>();
    return r;
  } catch (const nlohmann::ordered_json::exception& e) {
    throw ParseError(std::string("malformed report: ") + e.what(), 0);
  }
}

DiagnosticReport DiagnosticReport::from_json_string(const std::string& text) {
  try {
    return from_json(nlohmann::ordered_json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), 0);
  }
}

std::string DiagnosticReport::series_csv(const std::string& name) const {
  const auto it = series.find(name);
  if (it == series.end()) throw DomainError("no series named '" + name + "'");
  std::string out = "x,y\n";
  for (const auto& [x, y] : it->second) out += format_double(x) + "," + format_double(y) + "\n";
  return out;
}

}  // namespace tailrep
