#pragma once

// JSON emission for Carleson equivalence reports.

#include "bmo.hpp"
#include "json.hpp"

namespace dyadicw {

inline nlohmann::json carleson_report_to_json(const CarlesonReport& r,
                                              const nlohmann::json& config = {}) {
  nlohmann::json j;
  j["p"] = r.p;
  j["depth"] = r.depth;
  j["branch"] = branch_name(r.branch);
  j["cond_b"] = r.cond_b;
  j["cond_c"] = r.cond_c;
  if (r.p == 2.0) j["cond_c_other_branch"] = r.cond_c_other;
  j["op_norm_a"] = {{"lower_bound", r.op_norm_a.lower_bound},
                    {"strategy", strategy_name(r.op_norm_a.strategy)},
                    {"trials", r.op_norm_a.trials},
                    {"witness", r.op_norm_a.witness}};
  j["ratios"] = {{"b_over_c", r.ratio_b_c},
                 {"a_over_b", r.ratio_a_b},
                 {"a_over_c", r.ratio_a_c}};
  if (!config.is_null() && !config.empty()) j["config"] = config;
  return j;
}

}  // namespace dyadicw
