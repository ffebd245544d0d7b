#pragma once

// Named experiment drivers behind the CLI. Every command resolves its config
// (defaults filled, flags applied), runs deterministically from the seed, and
// returns a row table plus scalar findings with the resolved config echoed
// into both the CSV header and the JSON mirror. --check turns the documented
// expectations into hard assertions surfaced through ExperimentResult.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"

#include "bmo.hpp"
#include "czo.hpp"
#include "dyadic.hpp"
#include "linalg.hpp"
#include "operators.hpp"
#include "rng.hpp"
#include "stopping.hpp"
#include "weights.hpp"
#include "weights_json.hpp"

namespace dyadicw {

// ---------------------------------------------------------------------------
// slope fitting

struct SlopeFit {
  std::vector<double> xs;  // log2-scale samples
  std::vector<double> ys;
  double slope = 0.0;
  double intercept = 0.0;
  double max_residual = 0.0;
};

inline SlopeFit fit_line(std::vector<double> xs, std::vector<double> ys) {
  require(xs.size() == ys.size(), "fit_line: sample size mismatch");
  require(xs.size() >= 2, "fit_line: need at least two samples");
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double den = n * sxx - sx * sx;
  require(den > 0.0, "fit_line: degenerate abscissae");
  SlopeFit f;
  f.slope = (n * sxy - sx * sy) / den;
  f.intercept = (sy - f.slope * sx) / n;
  for (std::size_t i = 0; i < xs.size(); ++i)
    f.max_residual =
        std::max(f.max_residual, std::fabs(ys[i] - (f.slope * xs[i] + f.intercept)));
  f.xs = std::move(xs);
  f.ys = std::move(ys);
  return f;
}

// ---------------------------------------------------------------------------
// config

struct ExperimentConfig {
  std::string experiment;
  nlohmann::json weight;  // weight descriptor; empty -> diag(x^0.3, x^-0.3)
  double p = 2.0;
  double q = 2.0;
  int depth = -1;            // -1: command default
  std::vector<int> levels;   // empty: command default
  int n_min = 4;
  int n_max = 10;
  int trials = -1;           // -1: command default
  int draws = -1;
  int generations = 6;
  int directions = 256;
  std::uint64_t seed = 1234;
  int resolution = 0;        // 0: derived from depth/levels
  double eps_cells = 2.0;    // PV truncation in cell widths
  std::string kernel = "antisymmetric";
  std::string out = "-";
  std::string format = "csv";
  bool check = false;
};

// Accepts "a:b" (inclusive range) or "a,b,c" / "a".
inline std::vector<int> parse_levels(const std::string& text) {
  require(!text.empty(), "config: empty levels field");
  std::vector<int> out;
  const auto colon = text.find(':');
  std::size_t pos = 0;
  try {
    if (colon != std::string::npos) {
      const int lo = std::stoi(text.substr(0, colon), &pos);
      const int hi = std::stoi(text.substr(colon + 1));
      require(lo <= hi, "config: levels range is reversed");
      for (int v = lo; v <= hi; ++v) out.push_back(v);
      return out;
    }
    std::size_t start = 0;
    while (start <= text.size()) {
      const auto comma = text.find(',', start);
      const std::string tok =
          text.substr(start, comma == std::string::npos ? comma : comma - start);
      out.push_back(std::stoi(tok));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  } catch (const std::invalid_argument&) {
    fail("config: cannot parse levels '" + text + "'");
  } catch (const std::out_of_range&) {
    fail("config: cannot parse levels '" + text + "'");
  }
  return out;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  require(j.is_object(), "config: top level must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "experiment") c.experiment = val.get<std::string>();
      else if (key == "weight") c.weight = val;
      else if (key == "p") c.p = val.get<double>();
      else if (key == "q") c.q = val.get<double>();
      else if (key == "depth") c.depth = val.get<int>();
      else if (key == "levels") {
        if (val.is_string()) c.levels = parse_levels(val.get<std::string>());
        else c.levels = val.get<std::vector<int>>();
      }
      else if (key == "n_min") c.n_min = val.get<int>();
      else if (key == "n_max") c.n_max = val.get<int>();
      else if (key == "trials") c.trials = val.get<int>();
      else if (key == "draws") c.draws = val.get<int>();
      else if (key == "generations") c.generations = val.get<int>();
      else if (key == "directions") c.directions = val.get<int>();
      else if (key == "seed") c.seed = val.get<std::uint64_t>();
      else if (key == "resolution") c.resolution = val.get<int>();
      else if (key == "eps_cells") c.eps_cells = val.get<double>();
      else if (key == "kernel") c.kernel = val.get<std::string>();
      else if (key == "out") c.out = val.get<std::string>();
      else if (key == "format") c.format = val.get<std::string>();
      else if (key == "check") c.check = val.get<bool>();
      else fail("config: unknown field '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      fail("config: field '" + key + "' has the wrong type");
    }
  }
  require(c.format == "csv" || c.format == "json",
          "config: format must be 'csv' or 'json'");
  require(c.kernel == "antisymmetric" || c.kernel == "smoothed",
          "config: kernel must be 'antisymmetric' or 'smoothed'");
  return c;
}

namespace detail {

inline nlohmann::json default_weight_descriptor() {
  nlohmann::json w;
  w["family"] = "power_diag";
  w["n"] = 2;
  w["exponents"] = std::vector<double>{0.3, -0.3};
  return w;
}

inline nlohmann::json weight_descriptor(const ExperimentConfig& c) {
  nlohmann::json w = (c.weight.is_null() || c.weight.empty())
                         ? default_weight_descriptor()
                         : c.weight;
  require(w.is_object(), "config: weight must be a JSON object");
  if (!w.contains("n"))
    w["n"] = (w.value("family", std::string{}) == "scalar") ? 1 : 2;
  return w;
}

}  // namespace detail

// Builds the configured weight at an explicit resolution; p is taken from the
// experiment config so flag overrides reach the weight validation.
inline MatrixWeight config_weight(const ExperimentConfig& c, int resolution) {
  nlohmann::json w = detail::weight_descriptor(c);
  w["p"] = c.p;
  w["resolution"] = resolution;
  return weight_from_json(w);
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["experiment"] = c.experiment;
  j["weight"] = detail::weight_descriptor(c);
  j["p"] = c.p;
  j["q"] = c.q;
  j["depth"] = c.depth;
  j["levels"] = c.levels;
  j["n_min"] = c.n_min;
  j["n_max"] = c.n_max;
  j["trials"] = c.trials;
  j["draws"] = c.draws;
  j["generations"] = c.generations;
  j["directions"] = c.directions;
  j["seed"] = c.seed;
  j["resolution"] = c.resolution;
  j["eps_cells"] = c.eps_cells;
  j["kernel"] = c.kernel;
  j["format"] = c.format;
  j["check"] = c.check;
  return j;
}

// ---------------------------------------------------------------------------
// results

struct ExperimentResult {
  nlohmann::json config;  // resolved echo
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  nlohmann::json extra;   // scalar findings (slopes, bands, attaining cubes)
  bool check_ok = true;
  std::vector<std::string> check_notes;
};

namespace detail {

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// check helper: records the outcome, flips check_ok on failure
inline void expect(ExperimentResult& r, bool ok, const std::string& what) {
  r.check_notes.push_back(std::string(ok ? "pass: " : "FAIL: ") + what);
  if (!ok) r.check_ok = false;
}

}  // namespace detail

inline std::string result_to_csv(const ExperimentResult& r) {
  std::string out = "# config " + r.config.dump() + "\n";
  for (const auto& [key, val] : r.extra.items()) {
    out += "# " + key + " = ";
    if (val.is_number_float()) out += detail::fmt_g17(val.get<double>());
    else out += val.dump();
    out += "\n";
  }
  for (std::size_t i = 0; i < r.columns.size(); ++i)
    out += (i ? "," : "") + r.columns[i];
  out += "\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ",";
      out += detail::fmt_g17(row[i]);
    }
    out += "\n";
  }
  for (const auto& note : r.check_notes) out += "# check " + note + "\n";
  if (!r.check_notes.empty())
    out += std::string("# check_ok = ") + (r.check_ok ? "1" : "0") + "\n";
  return out;
}

inline nlohmann::json result_to_json(const ExperimentResult& r) {
  nlohmann::json j;
  j["config"] = r.config;
  j["columns"] = r.columns;
  j["rows"] = r.rows;
  j["extra"] = r.extra;
  j["check_ok"] = r.check_ok;
  j["check_notes"] = r.check_notes;
  return j;
}

// ---------------------------------------------------------------------------
// shared pieces

namespace detail {

// mean-free field with i.i.d. uniform(-1,1) Haar coefficients on levels
// 0..max_level (the band reducing tables can cover)
inline VectorField random_band_field(int dim, int resolution, int max_level, Rng& rng) {
  VecSpectrum sp;
  sp.dim = dim;
  sp.resolution = resolution;
  sp.mean = Vec(dim);
  sp.coeff.assign(std::size_t{1} << resolution, Vec(dim));
  const std::size_t hi = std::size_t{1} << (max_level + 1);
  for (std::size_t i = 1; i < hi; ++i)
    for (int d = 0; d < dim; ++d) sp.coeff[i][d] = rng.uniform(-1.0, 1.0);
  return synthesize(sp);
}

// exact cell averages of log(x) times the antidiagonal matrix
inline MatrixSymbol log_antidiag_symbol(int resolution) {
  MatrixSymbol b = MatrixSymbol::zero(2, resolution);
  const double h = std::exp2(-resolution);
  for (std::size_t c = 0; c < b.cells.size(); ++c) {
    const double a = static_cast<double>(c) * h;
    const double bb = a + h;
    // (1/h) int_a^b log = (b log b - a log a - h)/h, with a log a -> 0 at a = 0
    const double ala = (c == 0) ? 0.0 : a * std::log(a);
    const double avg = (bb * std::log(bb) - ala - h) / h;
    Mat m(2);
    m(0, 1) = avg;
    m(1, 0) = avg;
    b.cells[c] = m;
  }
  return b;
}

inline Mat antidiag_unit(int dim) {
  Mat m(dim);
  for (int i = 0; i < dim; ++i) m(i, dim - 1 - i) = 1.0;
  return m;
}

// indicator of I times M(x) e, cellwise
inline VectorField masked_matrix_column(const MatrixSymbol& m, const DyadicCube& I,
                                        const Vec& e) {
  VectorField f = VectorField::zero(m.dim, m.resolution);
  const std::size_t span = std::size_t{1} << (m.resolution - I.level);
  const std::size_t start = static_cast<std::size_t>(I.index) * span;
  for (std::size_t c = start; c < start + span; ++c) f.cells[c] = m.cells[c] * e;
  return f;
}

inline MatrixSequence clip_sequence(const MatrixSequence& a, int depth) {
  MatrixSequence out = MatrixSequence::zero(a.dim);
  for (const auto& [idx, m] : a.entries)
    if (idx < heap_size(depth)) out.set(cube_from_flat(idx), m);
  return out;
}

inline double weight_alpha(const nlohmann::json& wd) {
  const auto exps = wd.at("exponents").get<std::vector<double>>();
  return exps.empty() ? 0.0 : exps[0];
}

inline double weight_beta(const nlohmann::json& wd) {
  const auto exps = wd.at("exponents").get<std::vector<double>>();
  return exps.size() > 1 ? exps[1] : exps[0];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// commands

// Per-depth A_p characteristic in both forms (reducing-operator and Lebesgue
// double integral) with their prefix-max saturation curves.
inline ExperimentResult cmd_ap_char(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.experiment = "ap_char";
  if (cfg.depth < 0) cfg.depth = 8;
  if (cfg.resolution == 0) cfg.resolution = cfg.depth + 2;
  require(cfg.resolution >= cfg.depth + 2,
          "ap_char: resolution must be at least depth + 2");
  const MatrixWeight w = config_weight(cfg, cfg.resolution);
  JohnTableOptions jopts;
  jopts.directions = cfg.directions;
  const ReducingTable vt = build_reducing_table(w, cfg.p, cfg.depth, jopts);
  const ReducingTable vdt = build_dual_reducing_table(w, cfg.p, cfg.depth, jopts);
  const ApCharacteristic red = ap_characteristic_reducing(vt, vdt, cfg.p);
  const ApCharacteristic itg = ap_characteristic_integral(w, cfg.p, cfg.depth);

  ExperimentResult res;
  res.config = config_to_json(cfg);
  res.columns = {"depth", "reducing_norm", "reducing_powp", "integral_norm",
                 "integral_powp"};
  for (int d = 0; d <= cfg.depth; ++d) {
    const double rp = red.per_depth[static_cast<std::size_t>(d)];
    const double ip = itg.per_depth[static_cast<std::size_t>(d)];
    res.rows.push_back({static_cast<double>(d), std::pow(rp, 1.0 / cfg.p), rp,
                        std::pow(ip, 1.0 / cfg.p), ip});
  }
  res.extra["reducing_norm_max"] = red.norm_max;
  res.extra["reducing_powp_max"] = red.powp_max;
  res.extra["integral_powp_max"] = itg.powp_max;
  res.extra["attaining_level"] = red.attaining.level;
  res.extra["attaining_index"] = red.attaining.index;
  const auto& pd = red.per_depth;
  const bool saturated =
      pd.size() >= 3 && pd.back() - pd[pd.size() - 3] <= 1e-9 * pd.back();
  res.extra["saturated"] = saturated;
  const double forms_ratio = itg.powp_max / red.powp_max;
  res.extra["forms_ratio"] = forms_ratio;

  if (cfg.check) {
    bool mono = true;
    for (std::size_t i = 1; i < pd.size(); ++i) mono = mono && pd[i] >= pd[i - 1];
    detail::expect(res, mono, "saturation curve is nondecreasing");
    detail::expect(res, red.powp_max >= 1.0 - 1e-9 && itg.powp_max >= 1.0 - 1e-9,
                   "characteristic at least 1");
    detail::expect(res, forms_ratio >= 1.0 / 32.0 && forms_ratio <= 32.0,
                   "both forms within the dimensional factor band");
  }
  return res;
}

// Stopping-time generation decay against the 2^-j bound, recipe thresholds.
inline ExperimentResult cmd_stopping_decay(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.experiment = "stopping_decay";
  if (cfg.depth < 0) cfg.depth = 12;  // cutoff
  if (cfg.resolution == 0) cfg.resolution = cfg.depth + 2;
  require(cfg.resolution >= cfg.depth + 2,
          "stopping_decay: resolution must be at least depth + 2");
  require(cfg.generations >= 1, "stopping_decay: need at least one generation");
  const MatrixWeight w = config_weight(cfg, cfg.resolution);
  JohnTableOptions jopts;
  jopts.directions = cfg.directions;
  const ReducingTable vt = build_reducing_table(w, cfg.p, cfg.depth, jopts);
  const ReducingTable vdt = build_dual_reducing_table(w, cfg.p, cfg.depth, jopts);
  const StoppingThresholds th = recipe_thresholds(vt, vdt, cfg.p);
  const StoppingTree tree = build_tree(vt, cfg.p, root_cube(), th.lambda1, th.lambda2,
                                       cfg.generations, cfg.depth);
  const auto rows = decay_report(tree);

  ExperimentResult res;
  res.config = config_to_json(cfg);
  res.columns = {"j", "measure", "ratio", "bound_2_minus_j", "pass", "truncated"};
  bool all_pass = true;
  for (const DecayRow& r : rows) {
    const bool pass = r.ratio <= r.bound;
    all_pass = all_pass && pass;
    res.rows.push_back({static_cast<double>(r.j), r.measure, r.ratio, r.bound,
                        pass ? 1.0 : 0.0, r.truncated ? 1.0 : 0.0});
  }
  res.extra["lambda1"] = th.lambda1;
  res.extra["lambda2"] = th.lambda2;
  std::size_t nonempty = 0;
  for (const DecayRow& r : rows)
    if (r.measure > 0.0) ++nonempty;
  res.extra["generations_found"] = nonempty;
  if (cfg.check)
    detail::expect(res, all_pass, "every generation measure within 2^-j");
  return res;
}

// Two-sided band of weighted-norm / Triebel-Lizorkin-norm ratios over a
// random mean-free trial family, tracked across resolutions.
inline ExperimentResult cmd_lp_equiv(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.experiment = "lp_equiv";
  if (cfg.levels.empty()) cfg.levels = {6, 8, 10};
  std::sort(cfg.levels.begin(), cfg.levels.end());
  if (cfg.trials < 0) cfg.trials = 200;
  require(cfg.trials >= 1, "lp_equiv: need at least one trial");
  JohnTableOptions jopts;
  jopts.directions = cfg.directions;

  ExperimentResult res;
  res.config = config_to_json(cfg);
  res.columns = {"L", "band_lo", "band_hi", "band_width"};
  std::vector<double> widths;
  for (const int L : cfg.levels) {
    require(L >= 2 && L <= kMaxLevel, "lp_equiv: resolution out of range");
    const MatrixWeight w = config_weight(cfg, L);
    const ReducingTable vt = build_reducing_table(w, cfg.p, L - 2, jopts);
    double lo = 0.0, hi = 0.0;
    for (int t = 0; t < cfg.trials; ++t) {
      Rng rng = Rng::for_trial(cfg.seed, (static_cast<std::uint64_t>(L) << 32) |
                                             static_cast<std::uint64_t>(t));
      const VectorField f = detail::random_band_field(w.dim, L, L - 2, rng);
      const double num = weighted_lp_norm(w, cfg.p, f);
      const double den = triebel_lizorkin_norm(vt, cfg.p, f);
      require(den > 0.0, "lp_equiv: degenerate trial");
      const double ratio = num / den;
      lo = (t == 0) ? ratio : std::min(lo, ratio);
      hi = (t == 0) ? ratio : std::max(hi, ratio);
    }
    res.rows.push_back({static_cast<double>(L), lo, hi, hi / lo});
    widths.push_back(hi / lo);
  }
  res.extra["band_width_first"] = widths.front();
  res.extra["band_width_last"] = widths.back();
  res.extra["width_drift"] = widths.back() / widths.front();
  if (cfg.check) {
    bool finite = true;
    for (const auto& row : res.rows)
      finite = finite && row[1] > 0.0 && std::isfinite(row[2]);
    detail::expect(res, finite, "bands are positive and finite");
    detail::expect(res, widths.back() <= 1.10 * widths.front(),
                   "band does not widen by more than 10% across resolutions");
  }
  return res;
}

// Carleson-condition / embedding-norm equivalence over seeded random
// sequences, swept across depths for stability.
inline ExperimentResult cmd_carleson_equiv(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.experiment = "carleson_equiv";
  if (cfg.levels.empty()) cfg.levels = {6, 8, 10};
  if (cfg.trials < 0) cfg.trials = 64;
  if (cfg.draws < 0) cfg.draws = 20;
  require(cfg.draws >= 1, "carleson_equiv: need at least one draw");
  std::sort(cfg.levels.begin(), cfg.levels.end());
  const std::vector<int>& depths = cfg.levels;
  const int max_depth = depths.back();
  require(depths.front() >= 0 && max_depth <= kMaxLevel - 2,
          "carleson_equiv: depth out of range");
  JohnTableOptions jopts;
  jopts.directions = cfg.directions;

  // normalization table at the deepest depth
  const MatrixWeight w_norm = config_weight(cfg, max_depth + 2);
  const ReducingTable vt_norm = build_reducing_table(w_norm, cfg.p, max_depth, jopts);

  ExperimentResult res;
  res.config = config_to_json(cfg);
  res.columns = {"draw",    "depth",      "cond_b",     "cond_c",
                 "op_norm", "ratio_b_c",  "ratio_a_b",  "ratio_a_c"};
  double worst_bc_drift = 1.0, worst_ab_drift = 1.0, worst_ac_drift = 1.0;
  for (int k = 0; k < cfg.draws; ++k) {
    Rng rng = Rng::for_trial(cfg.seed, static_cast<std::uint64_t>(k));
    MatrixSequence a = MatrixSequence::zero(w_norm.dim);
    for (std::size_t idx = 1; idx < heap_size(max_depth); ++idx) {
      const DyadicCube c = cube_from_flat(idx);
      Mat m(w_norm.dim);
      for (int i = 0; i < w_norm.dim; ++i)
        for (int j = 0; j < w_norm.dim; ++j) m(i, j) = rng.uniform(-1.0, 1.0);
      a.set(c, m * std::exp2(-0.5 * c.level));
    }
    // Carleson normalization: cond_b = 1 at the deepest depth
    const double b0 = carleson_b(a, vt_norm, max_depth);
    require(b0 > 0.0, "carleson_equiv: degenerate draw");
    const double scale = 1.0 / std::sqrt(b0);
    for (auto& [idx, m] : a.entries) m = m * scale;

    double bc_lo = 0, bc_hi = 0, ab_lo = 0, ab_hi = 0, ac_lo = 0, ac_hi = 0;
    for (std::size_t di = 0; di < depths.size(); ++di) {
      const int d = depths[di];
      const MatrixWeight wd = config_weight(cfg, d + 2);
      const CarlesonReport rep = equivalence_report(detail::clip_sequence(a, d), wd,
                                                    cfg.p, d, cfg.trials, jopts);
      res.rows.push_back({static_cast<double>(k), static_cast<double>(d), rep.cond_b,
                          rep.cond_c, rep.op_norm_a.lower_bound, rep.ratio_b_c,
                          rep.ratio_a_b, rep.ratio_a_c});
      bc_lo = di == 0 ? rep.ratio_b_c : std::min(bc_lo, rep.ratio_b_c);
      bc_hi = di == 0 ? rep.ratio_b_c : std::max(bc_hi, rep.ratio_b_c);
      ab_lo = di == 0 ? rep.ratio_a_b : std::min(ab_lo, rep.ratio_a_b);
      ab_hi = di == 0 ? rep.ratio_a_b : std::max(ab_hi, rep.ratio_a_b);
      ac_lo = di == 0 ? rep.ratio_a_c : std::min(ac_lo, rep.ratio_a_c);
      ac_hi = di == 0 ? rep.ratio_a_c : std::max(ac_hi, rep.ratio_a_c);
    }
    worst_bc_drift = std::max(worst_bc_drift, bc_hi / bc_lo);
    worst_ab_drift = std::max(worst_ab_drift, ab_hi / ab_lo);
    worst_ac_drift = std::max(worst_ac_drift, ac_hi / ac_lo);
  }
  res.extra["max_ratio_b_c_drift"] = worst_bc_drift;
  res.extra["max_ratio_a_b_drift"] = worst_ab_drift;
  res.extra["max_ratio_a_c_drift"] = worst_ac_drift;
  res.extra["branch"] = branch_name(cfg.p >= 2.0 ? CarlesonBranch::p_ge_2
                                                 : CarlesonBranch::p_le_2);
  if (cfg.check) {
    detail::expect(res, worst_bc_drift <= 1.15 / 0.85,
                   "cond_b/cond_c ratio stable within +-15% across depths");
    bool finite = true;
    for (const auto& row : res.rows)
      for (double v : row) finite = finite && std::isfinite(v);
    detail::expect(res, finite, "all reported quantities finite");
  }
  return res;
}

// Per-level sup of ||V_I A V_I^{-1}|| for the antidiagonal A, slope fit.
inline ExperimentResult cmd_haar_growth(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.experiment = "haar_growth";
  if (cfg.levels.empty()) {
    cfg.levels.clear();
    for (int l = 4; l <= 12; ++l) cfg.levels.push_back(l);
  }
  require(cfg.levels.size() >= 2, "haar_growth: need at least two levels");
  std::sort(cfg.levels.begin(), cfg.levels.end());
  const std::vector<int>& lv = cfg.levels;
  const int max_level = lv.back();
  if (cfg.resolution == 0) cfg.resolution = max_level + 2;
  require(cfg.resolution >= max_level + 2,
          "haar_growth: resolution must be at least max level + 2");
  const MatrixWeight w = config_weight(cfg, cfg.resolution);
  JohnTableOptions jopts;
  jopts.directions = cfg.directions;
  const ReducingTable vt = build_reducing_table(w, cfg.p, max_level, jopts);
  const Mat a = detail::antidiag_unit(w.dim);

  ExperimentResult res;
  res.config = config_to_json(cfg);
  res.columns = {"level", "value", "log2_value"};
  std::vector<double> xs, ys;
  for (const int l : lv) {
    MatrixSequence seq = MatrixSequence::zero(w.dim);
    for (std::int64_t i = 0; i < (std::int64_t{1} << l); ++i)
      seq.set(DyadicCube{l, i}, a);
    const double v = haar_criterion(seq, vt, max_level);
    res.rows.push_back({static_cast<double>(l), v, std::log2(v)});
    xs.push_back(static_cast<double>(l));
    ys.push_back(std::log2(v));
  }
  const SlopeFit fit = fit_line(xs, ys);
  res.extra["slope"] = fit.slope;
  res.extra["intercept"] = fit.intercept;
  res.extra["max_residual"] = fit.max_residual;
  const double alpha = detail::weight_alpha(res.config["weight"]);
  const double beta = detail::weight_beta(res.config["weight"]);
  const double reference = std::fabs(alpha - beta) / cfg.p;
  res.extra["reference_slope"] = reference;
  if (cfg.check) {
    detail::expect(res, fit.max_residual < 0.1, "slope fit residual below 0.1");
    if (reference > 0.0)
      detail::expect(res, std::fabs(fit.slope - reference) <= 0.10 * reference,
                     "slope matches |alpha-beta|/p within 10%");
    else
      detail::expect(res, std::fabs(fit.slope) <= 0.02,
                     "slope vanishes for alpha = beta");
  }
  return res;
}

// r_N = ||M_{W,p} pi_B W^{-1/p} f_N||_q / ||f_N||_q over the concentrated
// family f_N = chi_{J_N} W^{-1/p'} A e_2; slope of log2 r_N vs N.
inline ExperimentResult cmd_paraproduct_growth(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.experiment = "paraproduct_growth";
  require(cfg.q >= 2.0, "paraproduct_growth: q must be at least 2");
  require(cfg.n_min >= 1 && cfg.n_min <= cfg.n_max,
          "paraproduct_growth: bad N range");
  if (cfg.resolution != 0)
    require(cfg.resolution >= cfg.n_max + 6,
            "paraproduct_growth: resolution insufficient for the largest N "
            "(need L >= N + 6)");
  const nlohmann::json wd = detail::weight_descriptor(cfg);
  require(wd.at("family").get<std::string>() == "power_diag",
          "paraproduct_growth: weight must be diag(x^a, x^-a)");
  const double alpha = detail::weight_alpha(wd);
  require(std::fabs(detail::weight_beta(wd) + alpha) <= 1e-12,
          "paraproduct_growth: weight must be diag(x^a, x^-a)");
  const double pp = dual_exponent(cfg.p);
  JohnTableOptions jopts;
  jopts.directions = cfg.directions;

  ExperimentResult res;
  res.config = config_to_json(cfg);
  res.columns = {"N", "L", "ratio", "log2_ratio"};
  std::vector<double> xs, ys;
  for (int N = cfg.n_min; N <= cfg.n_max; ++N) {
    const int L = cfg.resolution != 0 ? cfg.resolution : N + 6;
    require(L + 0 <= kMaxLevel, "paraproduct_growth: resolution out of range");
    const MatrixWeight w = config_weight(cfg, L);
    const MatrixSymbol winv_pp = weight_power_field(w, -1.0 / pp);
    const MatrixSymbol winv_p = weight_power_field(w, -1.0 / cfg.p);
    const MatrixSymbol b = detail::log_antidiag_symbol(L);
    const DyadicCube jn{N + 2, 2};
    const VectorField f =
        detail::masked_matrix_column(winv_pp, jn, Vec::unit(2, 0));
    VectorField g = f;
    const std::size_t span = std::size_t{1} << (L - jn.level);
    const std::size_t start = static_cast<std::size_t>(jn.index) * span;
    for (std::size_t c = start; c < start + span; ++c)
      g.cells[c] = winv_p.cells[c] * f.cells[c];
    const VectorField pb = paraproduct_apply(b, g);
    const ReducingTable vt = build_reducing_table(w, cfg.p, L - 2, jopts);
    const VectorField out = constant_multiplier(vt, pb, MultiplierMode::V);
    const double r = lp_norm(out, cfg.q) / lp_norm(f, cfg.q);
    res.rows.push_back({static_cast<double>(N), static_cast<double>(L), r,
                        std::log2(r)});
    xs.push_back(static_cast<double>(N));
    ys.push_back(std::log2(r));
  }
  const double reference = 2.0 * alpha / cfg.p - 0.05;
  res.extra["reference_lower_bound"] = reference;
  if (xs.size() >= 2) {  // a single-N run reports the ratio without a fit
    const SlopeFit fit = fit_line(xs, ys);
    res.extra["slope"] = fit.slope;
    res.extra["intercept"] = fit.intercept;
    res.extra["max_residual"] = fit.max_residual;
    if (cfg.check) {
      detail::expect(res, fit.max_residual < 0.1, "slope fit residual below 0.1");
      if (alpha == 0.0)
        detail::expect(res, std::fabs(fit.slope) <= 0.05,
                       "slope vanishes for the identity-like weight");
      else
        detail::expect(res, fit.slope >= reference,
                       "slope at least the lower-bound exponent 2a/p - 0.05");
    }
  }
  return res;
}

// Principal-value kernel experiment: T(const) cancellation at the symmetric
// point, interior convergence to log(x/(1-x)), and the weighted blow-up
// slope along the concentrated family.
inline ExperimentResult cmd_czo_counterexample(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.experiment = "czo_counterexample";
  require(cfg.eps_cells >= 1.0,
          "czo: truncation eps below the grid cell width (quadrature error)");
  require(cfg.n_min >= 1 && cfg.n_min <= cfg.n_max, "czo: bad level range");
  const nlohmann::json wd = detail::weight_descriptor(cfg);
  const double alpha = detail::weight_alpha(wd);
  const double beta = detail::weight_beta(wd);
  require(alpha != beta, "czo: weight exponents must differ");
  const double pp = dual_exponent(cfg.p);
  const CzoKernel kernel{detail::antidiag_unit(2), KernelKind::antisymmetric};

  ExperimentResult res;
  res.config = config_to_json(cfg);

  // (ii) cancellation at the symmetry point and interior convergence
  {
    double worst_half = 0.0;
    std::vector<double> errs, log2eps;
    for (int L : {6, 8, 10, 12}) {
      const double h = std::exp2(-L);
      const double eps = cfg.eps_cells * h;
      VectorField ones = VectorField::constant(Vec::unit(2, 0) + Vec::unit(2, 1), L);
      const Vec at_half = czo_apply_at(kernel, ones, 0.5, eps);
      worst_half = std::max(worst_half, at_half.norm());
      const double x = (std::floor(0.3 * std::exp2(L)) + 0.5) * h;
      const Vec v = czo_apply_at(kernel, ones, x, eps);
      const double limit = std::log(x / (1.0 - x));
      const Vec ref = (kernel.a * (Vec::unit(2, 0) + Vec::unit(2, 1))) * limit;
      errs.push_back((v - ref).norm());
      log2eps.push_back(std::log2(eps));
      res.extra["cancellation_at_half_L" + std::to_string(L)] = at_half.norm();
      res.extra["interior_err_L" + std::to_string(L)] = errs.back();
    }
    std::vector<double> log2errs;
    for (double e : errs) log2errs.push_back(std::log2(e));
    const SlopeFit cancel = fit_line(log2eps, log2errs);
    res.extra["cancellation_rate"] = cancel.slope;
    res.extra["cancellation_at_half_max"] = worst_half;
    if (cfg.check) {
      detail::expect(res, worst_half <= 1e-10,
                     "T(const) vanishes at the symmetric point");
      bool dec = true;
      for (std::size_t i = 0; i + 1 < errs.size(); ++i)
        dec = dec && errs[i + 1] < errs[i];
      detail::expect(res, dec, "interior error decreases with eps");
      detail::expect(res, cancel.slope >= 0.8,
                     "interior error vanishes at least linearly in eps");
    }
  }

  // (i)+(iii) weighted blow-up along the concentrated family, self-similar
  // quadrature (resolution follows the concentration level)
  res.columns = {"level", "resolution", "ratio", "log2_ratio"};
  std::vector<double> xs, ys;
  for (int l = cfg.n_min; l <= cfg.n_max; ++l) {
    const int L = l + 8;
    require(L <= kMaxLevel, "czo: level range too deep");
    const MatrixWeight w = config_weight(cfg, L);
    const MatrixSymbol winv = weight_power_field(w, -1.0 / pp);
    const VectorField f =
        detail::masked_matrix_column(winv, DyadicCube{l + 1, 2}, Vec::unit(2, 0));
    const double eps = cfg.eps_cells * std::exp2(-L);
    const double r = weighted_lp_norm(w, cfg.p, czo_apply(kernel, f, eps)) /
                     weighted_lp_norm(w, cfg.p, f);
    res.rows.push_back({static_cast<double>(l), static_cast<double>(L), r,
                        std::log2(r)});
    xs.push_back(static_cast<double>(l));
    ys.push_back(std::log2(r));
  }
  const double reference = std::fabs(alpha - beta) / cfg.p;
  res.extra["reference_slope"] = reference;
  if (xs.size() >= 2) {  // a single-level run reports the ratio without a fit
    const SlopeFit fit = fit_line(xs, ys);
    res.extra["slope"] = fit.slope;
    res.extra["intercept"] = fit.intercept;
    res.extra["max_residual"] = fit.max_residual;
    if (cfg.check) {
      detail::expect(res, fit.slope > 0.0, "weighted ratio slope positive");
      detail::expect(res, std::fabs(fit.slope - reference) <= 0.25 * reference,
                     "slope consistent with the haar criterion within 25%");
      detail::expect(res, fit.max_residual < 0.1, "slope fit residual below 0.1");
    }
  }
  return res;
}

// Per-level weak-boundedness table |I|^{-1} ||<T 1_I, 1_I>||.
inline ExperimentResult cmd_weak_boundedness(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  cfg.experiment = "weak_boundedness";
  if (cfg.levels.empty()) {
    for (int l = 0; l <= 6; ++l) cfg.levels.push_back(l);
  }
  std::sort(cfg.levels.begin(), cfg.levels.end());
  const std::vector<int>& lv = cfg.levels;
  if (cfg.resolution == 0) cfg.resolution = std::max(12, lv.back() + 2);
  require(cfg.resolution >= lv.back() + 2,
          "weak_boundedness: resolution must exceed the deepest level by 2");
  require(cfg.eps_cells >= 1.0,
          "czo: truncation eps below the grid cell width (quadrature error)");
  const KernelKind kind = cfg.kernel == "antisymmetric" ? KernelKind::antisymmetric
                                                        : KernelKind::smoothed;
  const CzoKernel kernel{detail::antidiag_unit(2), kind};
  const double eps = cfg.eps_cells * std::exp2(-cfg.resolution);
  const auto table =
      weak_boundedness_table(kernel, cfg.resolution, lv.front(), lv.back(), eps);

  ExperimentResult res;
  res.config = config_to_json(cfg);
  res.columns = {"level", "value"};
  double max_value = 0.0;
  for (const auto& row : table) {
    if (std::find(lv.begin(), lv.end(), row.level) == lv.end()) continue;
    res.rows.push_back({static_cast<double>(row.level), row.value});
    max_value = std::max(max_value, row.value);
  }
  res.extra["max_value"] = max_value;
  res.extra["kernel"] = kernel_name(kind);
  if (cfg.check) {
    if (kind == KernelKind::antisymmetric) {
      detail::expect(res, max_value <= 1e-6,
                     "antisymmetric pairings vanish to quadrature tolerance");
    } else {
      bool pos = true;
      for (const auto& row : res.rows) pos = pos && row[1] > 0.0;
      detail::expect(res, pos, "smoothed pairings are positive and finite");
      detail::expect(res, std::isfinite(max_value), "table finite");
    }
  }
  return res;
}

// name -> driver dispatch used by the CLI and the tests
inline ExperimentResult run_experiment(const std::string& name,
                                       const ExperimentConfig& cfg) {
  if (name == "ap_char") return cmd_ap_char(cfg);
  if (name == "stopping_decay") return cmd_stopping_decay(cfg);
  if (name == "lp_equiv") return cmd_lp_equiv(cfg);
  if (name == "carleson_equiv") return cmd_carleson_equiv(cfg);
  if (name == "haar_growth") return cmd_haar_growth(cfg);
  if (name == "paraproduct_growth") return cmd_paraproduct_growth(cfg);
  if (name == "czo_counterexample" || name == "czo") return cmd_czo_counterexample(cfg);
  if (name == "weak_boundedness") return cmd_weak_boundedness(cfg);
  fail("unknown experiment '" + name + "'");
}

}  // namespace dyadicw
