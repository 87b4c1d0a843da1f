#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace tailrep {

/// Named results of a diagnostic or experiment run. Keys are kept sorted so
/// the JSON form is canonical; doubles are written in shortest round-trip
/// form, so to_json / from_json is lossless.
struct DiagnosticReport {
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  std::map<std::string, std::vector<double>> pvalues;

  /// Throws DomainError if any stored number is not finite.
  void validate() const;

  nlohmann::ordered_json to_json() const;
  std::string to_json_string() const;
  static DiagnosticReport from_json(const nlohmann::ordered_json& j);
  static DiagnosticReport from_json_string(const std::string& text);

  /// "x,y" rows with a header line, %.17g.
  std::string series_csv(const std::string& name) const;

  friend bool operator==(const DiagnosticReport&, const DiagnosticReport&) = default;
};

/// printf("%.17g").
std::string format_double(double v);

}  // namespace tailrep
