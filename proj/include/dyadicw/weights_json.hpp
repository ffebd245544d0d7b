#pragma once

// JSON round-trip for weight configurations:
//   {"family": "power_diag"|"rotated_power"|"scalar", "n": ..., "p": ...,
//    "exponents": [...], "theta": ... (rotated only), "resolution": ...}

#include <string>

#include "json.hpp"
#include "weights.hpp"

namespace dyadicw {

inline MatrixWeight weight_from_json(const nlohmann::json& j) {
  const std::string fam = j.at("family").get<std::string>();
  const int n = j.at("n").get<int>();
  const double p = j.at("p").get<double>();
  const int L = j.at("resolution").get<int>();
  const auto exps = j.at("exponents").get<std::vector<double>>();
  if (fam == "scalar") {
    require(n == 1, "weight config: scalar family requires n = 1");
    require(exps.size() == 1, "weight config: scalar family takes one exponent");
    return make_scalar_weight(exps[0], p, L);
  }
  if (fam == "power_diag" || fam == "rotated_power") {
    require(n == 2, "weight config: power_diag/rotated_power require n = 2");
    require(exps.size() == 2, "weight config: power_diag takes two exponents");
    MatrixWeight w = make_power_weight(exps[0], exps[1], p, L);
    if (fam == "rotated_power")
      return make_rotated_weight(w, j.at("theta").get<double>());
    return w;
  }
  fail("weight config: unknown family '" + fam + "'");
}

inline nlohmann::json weight_to_json(const MatrixWeight& w) {
  nlohmann::json j;
  j["family"] = family_name(w.family);
  j["n"] = w.dim;
  j["p"] = w.validated_p;
  j["exponents"] = w.exponents;
  if (w.family == WeightFamily::rotated_power) j["theta"] = w.theta;
  j["resolution"] = w.resolution;
  return j;
}

}  // namespace dyadicw
