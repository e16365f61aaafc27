#pragma once

// Scenario configs (JSON), the solve pipeline behind `uopt solve`, and the
// report / plot-data formats.

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uopt/portfolio.hpp"
#include "uopt/solver_pde.hpp"

namespace uopt::scenario {

using json = nlohmann::json;

inline constexpr const char* kVersion = "0.1.0";

class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& what) : Error("invalid scenario: " + what) {}
};

struct Verification {
  bool enabled = true;
  std::vector<std::size_t> dynamic_tau;
  bool dominance = true;
  std::uint64_t adversarial_seed = 7;
  double k_se = 3.0;
};

struct Scenario {
  json resolved;
  std::string name;
  Vector b;
  Matrix sigma;
  double epsilon = 0.1, K = 2.0;
  double horizon = 1.0;
  std::size_t steps = 64;
  std::size_t paths = 100000;
  std::uint64_t seed = 42;
  UtilitySpec utility = UtilitySpec::exponential(1.0);
  double x = 1.0;
  Liability liability = Liability::zero();
  ConstraintSpec constraint = ConstraintSpec::full_space(1);
  ProjectionOptions projection;
  std::string method = "lsmc";
  RegressionBasis basis = RegressionBasis::polynomial(2);
  double z_cap = 0.0;
  PdeGrid pde;
  Verification verification;
  std::string report_file = "report.json";
  std::string csv_file = "series.csv";

  MarketModel model() const { return MarketModel::constant(b, sigma, epsilon, K); }
  TimeGrid grid() const { return TimeGrid::uniform(horizon, steps); }
};

namespace detail {

class Reader {
public:
  std::vector<std::string> unknown;
  std::vector<std::string> problems;

  // Returns obj[key] (or null) after recording keys of obj not in `allowed`.
  const json& section(const json& parent, const std::string& key, const std::string& where) {
    static const json null_value;
    if (!parent.contains(key)) return null_value;
    const json& s = parent.at(key);
    if (!s.is_object()) problems.push_back(where + key + " must be an object");
    return s;
  }
  void allow(const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    if (!obj.is_object()) return;
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!ok.count(it.key())) unknown.push_back(where + it.key());
  }
  template <class T>
  T get(const json& obj, const char* key, T fallback, const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) return fallback;
    try {
      return obj.at(key).get<T>();
    } catch (const json::exception&) {
      problems.push_back(where + key + " has the wrong type");
      return fallback;
    }
  }
  void require(bool ok, const std::string& msg) {
    if (!ok) problems.push_back(msg);
  }
  void finish() const {
    std::string msg;
    if (!unknown.empty()) {
      msg += "unknown keys:";
      for (const auto& k : unknown) msg += " " + k;
    }
    for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
    if (!msg.empty()) throw ValidationError(msg);
  }
};

inline Vector to_vector(const std::vector<double>& v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

inline std::vector<double> from_vector(const Eigen::Ref<const Vector>& v) { return {v.data(), v.data() + v.size()}; }

inline std::vector<Vector> to_points(const std::vector<std::vector<double>>& rows) {
  std::vector<Vector> out;
  for (const auto& r : rows) out.push_back(to_vector(r));
  return out;
}

}  // namespace detail

// Parses and validates a scenario. Every field of the result is also
// written back into `resolved` with defaults filled in.
inline Scenario parse_scenario(const json& cfg) {
  if (!cfg.is_object()) throw ValidationError("top level must be an object");
  detail::Reader rd;
  Scenario sc;
  json& out = sc.resolved;
  rd.allow(cfg, {"name", "market", "grid", "mc", "utility", "liability", "constraint", "solver", "verification", "output"}, "");
  sc.name = rd.get<std::string>(cfg, "name", "scenario", "");
  out["name"] = sc.name;

  // market
  const json& mk = rd.section(cfg, "market", "");
  rd.allow(mk, {"b", "sigma", "theta", "epsilon", "K"}, "market.");
  const auto sigma_rows = rd.get<std::vector<std::vector<double>>>(mk, "sigma", {{1.0}}, "market.");
  const std::size_t d = sigma_rows.size(), m = d ? sigma_rows.front().size() : 0;
  rd.require(d >= 1 && m >= 1, "market.sigma must be a non-empty d x m matrix");
  sc.sigma = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < d; ++i) {
    rd.require(sigma_rows[i].size() == m, "market.sigma rows must have equal length");
    for (std::size_t k = 0; k < std::min(m, sigma_rows[i].size()); ++k)
      sc.sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = sigma_rows[i][k];
  }
  if (mk.is_object() && mk.contains("theta") && mk.contains("b")) rd.problems.push_back("market: give either b or theta, not both");
  if (mk.is_object() && mk.contains("theta")) {
    const Vector th = detail::to_vector(rd.get<std::vector<double>>(mk, "theta", {}, "market."));
    rd.require(static_cast<std::size_t>(th.size()) == m, "market.theta must have length m");
    sc.b = static_cast<std::size_t>(th.size()) == m ? Vector(sc.sigma * th) : Vector::Zero(static_cast<Eigen::Index>(d));
  } else {
    sc.b = detail::to_vector(rd.get<std::vector<double>>(mk, "b", std::vector<double>(d, 0.0), "market."));
    rd.require(static_cast<std::size_t>(sc.b.size()) == d, "market.b must have length d");
  }
  sc.epsilon = rd.get<double>(mk, "epsilon", 0.1, "market.");
  sc.K = rd.get<double>(mk, "K", 2.0, "market.");
  rd.require(sc.epsilon > 0.0 && sc.K >= sc.epsilon, "market: need 0 < epsilon <= K");
  out["market"] = {{"b", detail::from_vector(sc.b)}, {"sigma", sigma_rows}, {"epsilon", sc.epsilon}, {"K", sc.K}};

  // grid and mc
  const json& gr = rd.section(cfg, "grid", "");
  rd.allow(gr, {"T", "N"}, "grid.");
  sc.horizon = rd.get<double>(gr, "T", 1.0, "grid.");
  sc.steps = rd.get<std::size_t>(gr, "N", 64, "grid.");
  rd.require(sc.horizon > 0.0 && std::isfinite(sc.horizon), "grid.T must be positive");
  rd.require(sc.steps >= 1, "grid.N must be >= 1");
  out["grid"] = {{"T", sc.horizon}, {"N", sc.steps}};
  const json& mc = rd.section(cfg, "mc", "");
  rd.allow(mc, {"paths", "seed"}, "mc.");
  sc.paths = rd.get<std::size_t>(mc, "paths", 100000, "mc.");
  sc.seed = rd.get<std::uint64_t>(mc, "seed", 42, "mc.");
  rd.require(sc.paths >= 2, "mc.paths must be >= 2");
  out["mc"] = {{"paths", sc.paths}, {"seed", sc.seed}};

  // utility
  const json& ut = rd.section(cfg, "utility", "");
  rd.allow(ut, {"kind", "alpha", "gamma", "x"}, "utility.");
  const auto ukind = rd.get<std::string>(ut, "kind", "exponential", "utility.");
  sc.x = rd.get<double>(ut, "x", 1.0, "utility.");
  out["utility"] = {{"kind", ukind}, {"x", sc.x}};
  if (ukind == "exponential") {
    const double a = rd.get<double>(ut, "alpha", 1.0, "utility.");
    rd.require(a > 0.0, "utility.alpha must be positive");
    if (ut.is_object() && ut.contains("gamma")) rd.problems.push_back("utility.gamma does not apply to exponential utility");
    sc.utility = UtilitySpec{UtilityKind::Exponential, a, 0.0};
    out["utility"]["alpha"] = a;
  } else if (ukind == "power") {
    const double g = rd.get<double>(ut, "gamma", 0.5, "utility.");
    rd.require(g > 0.0 && g < 1.0, "utility.gamma must lie in (0, 1)");
    if (ut.is_object() && ut.contains("alpha")) rd.problems.push_back("utility.alpha does not apply to power utility");
    sc.utility = UtilitySpec{UtilityKind::Power, 0.0, g};
    out["utility"]["gamma"] = g;
  } else if (ukind == "logarithmic") {
    if (ut.is_object() && (ut.contains("alpha") || ut.contains("gamma")))
      rd.problems.push_back("utility: logarithmic utility takes no alpha/gamma");
    sc.utility = UtilitySpec::logarithmic();
  } else {
    rd.problems.push_back("utility.kind must be exponential, power or logarithmic");
  }
  if (ukind == "power" || ukind == "logarithmic") rd.require(sc.x > 0.0, "utility.x must be positive for power/log utility");

  // liability
  const json& li = rd.section(cfg, "liability", "");
  rd.allow(li, {"payoff", "value", "component", "scale", "shift", "lo", "hi", "bound"}, "liability.");
  const auto payoff = rd.get<std::string>(li, "payoff", "zero", "liability.");
  out["liability"] = {{"payoff", payoff}};
  if (payoff == "zero") {
    sc.liability = Liability::zero();
  } else if (payoff == "constant") {
    const double c = rd.get<double>(li, "value", 0.0, "liability.");
    sc.liability = c == 0.0 ? Liability::zero() : Liability::constant(c);
    out["liability"]["value"] = c;
  } else if (payoff == "clipped") {
    const auto comp = rd.get<std::size_t>(li, "component", 0, "liability.");
    const double scale = rd.get<double>(li, "scale", 1.0, "liability."), shift = rd.get<double>(li, "shift", 0.0, "liability.");
    const double lo = rd.get<double>(li, "lo", -1.0, "liability."), hi = rd.get<double>(li, "hi", 1.0, "liability.");
    rd.require(comp < std::max<std::size_t>(m, 1), "liability.component must index a Brownian component");
    rd.require(std::isfinite(lo) && std::isfinite(hi) && lo <= hi, "liability: need finite lo <= hi");
    if (std::isfinite(lo) && std::isfinite(hi) && lo <= hi) sc.liability = Liability::clipped(comp, scale, shift, lo, hi);
    out["liability"].update({{"component", comp}, {"scale", scale}, {"shift", shift}, {"lo", lo}, {"hi", hi}});
  } else {
    rd.problems.push_back("liability.payoff must be zero, constant or clipped");
  }
  if (li.is_object() && li.contains("bound")) {
    const double bd = rd.get<double>(li, "bound", 0.0, "liability.");
    rd.require(bd >= sc.liability.bound, "liability.bound is below the payoff's supremum");
    sc.liability.bound = std::max(bd, sc.liability.bound);
  }
  out["liability"]["bound"] = sc.liability.bound;
  if (sc.utility.kind != UtilityKind::Exponential && !sc.liability.is_zero())
    rd.problems.push_back(
        "power and logarithmic utilities are solved without an additional liability; set liability.payoff to \"zero\"");

  // constraint
  const json& cs = rd.section(cfg, "constraint", "");
  rd.allow(cs, {"kind", "points", "lower", "upper", "generators", "resolution", "tau_proj", "max_iterations"}, "constraint.");
  const auto ckind = rd.get<std::string>(cs, "kind", "full_space", "constraint.");
  out["constraint"] = {{"kind", ckind}};
  try {
    if (ckind == "full_space") {
      sc.constraint = ConstraintSpec::full_space(std::max<std::size_t>(d, 1));
    } else if (ckind == "finite_set" || ckind == "custom_grid") {
      const auto pts = rd.get<std::vector<std::vector<double>>>(cs, "points", {}, "constraint.");
      out["constraint"]["points"] = pts;
      if (ckind == "finite_set") {
        sc.constraint = ConstraintSpec::finite_set(detail::to_points(pts));
      } else {
        const double res = rd.get<double>(cs, "resolution", 0.0, "constraint.");
        sc.constraint = ConstraintSpec::custom_grid(detail::to_points(pts), res);
        out["constraint"]["resolution"] = res;
      }
    } else if (ckind == "box") {
      const auto lo = rd.get<std::vector<double>>(cs, "lower", {}, "constraint.");
      const auto hi = rd.get<std::vector<double>>(cs, "upper", {}, "constraint.");
      sc.constraint = ConstraintSpec::box(detail::to_vector(lo), detail::to_vector(hi));
      out["constraint"]["lower"] = lo;
      out["constraint"]["upper"] = hi;
    } else if (ckind == "orthant") {
      sc.constraint = ConstraintSpec::orthant(std::max<std::size_t>(d, 1));
    } else if (ckind == "generated_cone") {
      const auto gens = rd.get<std::vector<std::vector<double>>>(cs, "generators", {}, "constraint.");
      sc.constraint = ConstraintSpec::generated_cone(detail::to_points(gens));
      out["constraint"]["generators"] = gens;
    } else {
      rd.problems.push_back("constraint.kind must be full_space, finite_set, box, orthant, generated_cone or custom_grid");
    }
  } catch (const InvalidArgument& e) {
    rd.problems.push_back(std::string("constraint: ") + e.what());
  }
  rd.require(sc.constraint.dim() == d, "constraint dimension must equal d (rows of market.sigma)");
  sc.projection.tol = rd.get<double>(cs, "tau_proj", 1e-10, "constraint.");
  sc.projection.max_iterations = rd.get<int>(cs, "max_iterations", 10000, "constraint.");
  rd.require(sc.projection.tol > 0.0 && sc.projection.max_iterations >= 1, "constraint: tau_proj and max_iterations must be positive");
  out["constraint"]["tau_proj"] = sc.projection.tol;
  out["constraint"]["max_iterations"] = sc.projection.max_iterations;

  // theta for defaults and model checks
  double theta_max = 0.0;
  if (rd.problems.empty() && rd.unknown.empty()) {
    try {
      theta_max = market_price_of_risk(sc.model(), 0.0, Vector::Zero(static_cast<Eigen::Index>(m))).norm();
    } catch (const Error& e) {
      rd.problems.push_back(std::string("market: ") + e.what());
    }
  }

  // solver
  const json& so = rd.section(cfg, "solver", "");
  rd.allow(so, {"method", "basis", "z_cap", "pde"}, "solver.");
  sc.method = rd.get<std::string>(so, "method", "lsmc", "solver.");
  rd.require(sc.method == "lsmc" || sc.method == "pde" || sc.method == "both", "solver.method must be lsmc, pde or both");
  if (sc.method != "lsmc") rd.require(m == 1, "solver.method '" + sc.method + "' needs m = 1 (the PDE solver is one-dimensional)");
  const json& ba = rd.section(so, "basis", "solver.");
  rd.allow(ba, {"kind", "degree", "bins"}, "solver.basis.");
  sc.basis = RegressionBasis::default_for(std::max<std::size_t>(m, 1));
  const auto bkind = rd.get<std::string>(ba, "kind", to_string(sc.basis.kind), "solver.basis.");
  if (bkind == "polynomial") {
    sc.basis = RegressionBasis::polynomial(rd.get<int>(ba, "degree", 2, "solver.basis."));
    rd.require(sc.basis.degree >= 0, "solver.basis.degree must be >= 0");
    out["solver"]["basis"] = {{"kind", "polynomial"}, {"degree", sc.basis.degree}};
  } else if (bkind == "bins" || bkind == "bins_linear") {
    const int nb = rd.get<int>(ba, "bins", 16, "solver.basis.");
    sc.basis = bkind == "bins" ? RegressionBasis::piecewise_constant(nb) : RegressionBasis::piecewise_linear(nb);
    rd.require(sc.basis.bins >= 1, "solver.basis.bins must be >= 1");
    out["solver"]["basis"] = {{"kind", bkind}, {"bins", sc.basis.bins}};
  } else {
    rd.problems.push_back("solver.basis.kind must be polynomial, bins or bins_linear");
  }
  sc.z_cap = rd.get<double>(so, "z_cap", Driver::default_z_cap(theta_max), "solver.");
  rd.require(sc.z_cap > 0.0, "solver.z_cap must be positive");
  out["solver"]["method"] = sc.method;
  out["solver"]["z_cap"] = sc.z_cap;
  const json& pd = rd.section(so, "pde", "solver.");
  rd.allow(pd, {"M", "N", "width"}, "solver.pde.");
  const auto pm = rd.get<std::size_t>(pd, "M", 401, "solver.pde."), pn = rd.get<std::size_t>(pd, "N", 0, "solver.pde.");
  const double width = rd.get<double>(pd, "width", 6.0, "solver.pde.");
  sc.pde = PdeGrid::centered(sc.horizon, pm, pn, width);
  if (sc.method != "lsmc") {
    try {
      sc.pde.validate();
    } catch (const InvalidArgument& e) {
      rd.problems.push_back(std::string("solver.pde: ") + e.what());
    }
  }
  out["solver"]["pde"] = {{"M", sc.pde.M}, {"N", sc.pde.N}, {"width", width}};

  // verification
  const json& ve = rd.section(cfg, "verification", "");
  rd.allow(ve, {"enabled", "dynamic_tau", "dominance", "adversarial_seed", "k_se"}, "verification.");
  auto& v = sc.verification;
  v.enabled = rd.get<bool>(ve, "enabled", true, "verification.");
  v.dynamic_tau = rd.get<std::vector<std::size_t>>(
      ve, "dynamic_tau", {0, sc.steps / 4, sc.steps / 2, 3 * sc.steps / 4, sc.steps}, "verification.");
  for (auto t : v.dynamic_tau) rd.require(t <= sc.steps, "verification.dynamic_tau entries must be <= grid.N");
  v.dominance = rd.get<bool>(ve, "dominance", true, "verification.");
  v.adversarial_seed = rd.get<std::uint64_t>(ve, "adversarial_seed", 7, "verification.");
  v.k_se = rd.get<double>(ve, "k_se", 3.0, "verification.");
  rd.require(v.k_se > 0.0, "verification.k_se must be positive");
  out["verification"] = {{"enabled", v.enabled},
                         {"dynamic_tau", v.dynamic_tau},
                         {"dominance", v.dominance},
                         {"adversarial_seed", v.adversarial_seed},
                         {"k_se", v.k_se}};

  // output
  const json& ou = rd.section(cfg, "output", "");
  rd.allow(ou, {"report", "csv"}, "output.");
  sc.report_file = rd.get<std::string>(ou, "report", "report.json", "output.");
  sc.csv_file = rd.get<std::string>(ou, "csv", "series.csv", "output.");
  out["output"] = {{"report", sc.report_file}, {"csv", sc.csv_file}};

  rd.finish();
  return sc;
}

inline Scenario parse_scenario_text(const std::string& text) {
  json cfg;
  try {
    cfg = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
  return parse_scenario(cfg);
}

// Rounds every floating-point leaf to 12 significant digits.
inline void canonicalize(json& j) {
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (!std::isfinite(v)) {
      j = nullptr;
      return;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    j = std::strtod(buf, nullptr);
  } else if (j.is_structured()) {
    for (auto& e : j) canonicalize(e);
  }
}

inline std::string dump_canonical(json j) {
  canonicalize(j);
  return j.dump(2) + "\n";
}

namespace detail {

inline json mean_se_json(const MeanSe& m) { return {{"mean", m.mean}, {"se", m.se}}; }

inline json diagnostics_json(const BsdeDiagnostics& d) {
  double worst = 0.0;
  for (const auto& r : d.martingale_residual) worst = std::max(worst, std::abs(r.mean) / std::max(r.se, 1e-15));
  double max_cond = 1.0, max_rms = 0.0;
  for (double c : d.condition) max_cond = std::max(max_cond, c);
  for (double r : d.regression_rms) max_rms = std::max(max_rms, r);
  return {{"driver_evaluations", d.driver_evaluations},
          {"clamp_fraction", d.clamp_fraction()},
          {"max_abs_y", d.max_abs_y},
          {"envelope", d.envelope},
          {"max_residual_over_se", worst},
          {"max_condition", max_cond},
          {"max_regression_rms", max_rms},
          {"warnings", d.warnings}};
}

}  // namespace detail

struct SolveOutput {
  json report;
  std::vector<std::string> log;  // human-readable progress, not part of the report
};

// Runs the solvers and verifications. Solver errors propagate as uopt::Error.
inline SolveOutput run_solve(const Scenario& sc) {
  SolveOutput res;
  json& rep = res.report;
  rep["version"] = kVersion;
  rep["config"] = sc.resolved;
  json notes = json::array();
  const MarketModel model = sc.model();
  const TimeGrid grid = sc.grid();
  const Driver driver(sc.utility, sc.z_cap);
  json results = json::object();

  std::optional<double> y_lsmc, y_pde;
  std::optional<BsdeSolution> sol;
  std::optional<PathEnsemble> ens;
  std::optional<ThetaPath> theta;
  std::optional<ConstraintField> sets;
  if (sc.method != "pde" || sc.verification.enabled) {
    ens = simulate_brownian(model, grid, sc.paths, sc.seed);
    theta = theta_path(model, *ens);
    sets = constraint_field(model, sc.constraint, grid, sc.projection);
  }
  if (sc.method != "pde") {
    sol = solve_bsde_lsmc(*ens, sc.liability, driver, *sets, *theta, sc.basis);
    y_lsmc = sol->y0;
    json l = {{"y0", sol->y0}, {"value", value(sc.utility, sc.x, sol->y0)}, {"diagnostics", detail::diagnostics_json(sol->diagnostics)}};
    if (sc.utility.kind == UtilityKind::Logarithmic) l["quadrature_y0"] = solve_log_quadrature(grid, *theta, *sets, sc.paths);
    results["lsmc"] = l;
    res.log.push_back("lsmc y0 = " + std::to_string(sol->y0));
  }
  if (sc.method != "lsmc") {
    const PdeSolution p = solve_bsde_pde(model, sc.constraint, sc.liability, driver, sc.pde);
    y_pde = p.y0;
    results["pde"] = {{"y0", p.y0},
                      {"value", value(sc.utility, sc.x, p.y0)},
                      {"grid", {{"M", sc.pde.M}, {"N", p.t.size() - 1}, {"w_min", sc.pde.w_min}, {"w_max", sc.pde.w_max}}}};
    res.log.push_back("pde y0 = " + std::to_string(p.y0));
  }
  if (y_lsmc && y_pde) results["cross_solver_delta"] = std::abs(*y_lsmc - *y_pde);
  rep["results"] = results;

  json ver = nullptr;
  if (sc.verification.enabled && !sol) {
    notes.push_back("verification needs the Monte Carlo solution; run with solver.method lsmc or both");
  } else if (sc.verification.enabled) {
    const auto& u = sc.utility;
    const double k = sc.verification.k_se;
    const Strategy opt = optimal_strategy(u, *sol, *theta, *sets);
    const RProcess rp = r_process(u, sc.x, opt, *sol, *ens, *theta);
    SupermartingaleReport sm = supermartingale_test(rp, u, *sol, *ens, k);
    attach_drift_gap(sm, u, opt, *sol, *theta, *sets);
    const double v0 = value(u, sc.x, sol->y0);
    ver["supermartingale"] = {{"verdict", to_string(sm.verdict)},
                              {"flat", sm.flat},
                              {"strict_decrease", sm.strict_decrease},
                              {"worst_increment_over_se", sm.worst_increment_z},
                              {"min_drift_gap", sm.min_drift_gap}};
    json dyn = json::array();
    for (auto tau : sc.verification.dynamic_tau) {
      const auto c = dynamic_principle_check(*sol, opt, *ens, *theta, sc.x, u, sc.liability, tau);
      dyn.push_back({{"tau_index", tau}, {"max_residual", c.max_residual}, {"max_ratio", c.max_ratio}, {"cells", c.cells}, {"pass", c.pass}});
    }
    ver["dynamic"] = dyn;
    if (sc.verification.dominance) {
      // R_T - R_0 under the optimum is U - V; its adjusted SE covers the noise in y0
      const MeanSe eo = expected_utility(u, sc.x, opt, *ens, *theta, sc.liability);
      const double gap_se = sm.from_start.back().se, vse = value_se(u, sc.x, *sol);
      json dom = {{"value", v0},
                  {"value_se", vse},
                  {"optimal", {{"mean", eo.mean}, {"se", gap_se}, {"within", std::abs(eo.mean - v0) <= k * gap_se}}},
                  {"family", json::array()}};
      for (const auto& ns : adversarial_family(u, opt, *theta, *sets, sc.verification.adversarial_seed)) {
        const MeanSe e = expected_utility(u, sc.x, ns.strategy, *ens, *theta, sc.liability);
        dom["family"].push_back({{"name", ns.name}, {"mean", e.mean}, {"se", e.se}, {"dominated", e.mean <= v0 + k * std::hypot(e.se, vse)}});
      }
      ver["dominance"] = dom;
    }
    const AdmissibilityReport ad = admissibility_proxy(opt, *ens, *sets, std::max(sc.projection.tol, 1e-8));
    json adj = {{"membership_ok", ad.membership_ok},
                {"max_violation", ad.max_violation},
                {"expected_l2", ad.expected_l2},
                {"bmo_strategy", ad.bmo.norm},
                {"bmo_z", bmo_norm_estimate(sol->Z, *ens).norm},
                {"pass", ad.pass()},
                {"note", ad.note}};
    if (ad.first_violation) adj["first_violation"] = {{"path", ad.first_violation->first}, {"step", ad.first_violation->second}};
    ver["admissibility"] = adj;

    json series = {{"t", grid.t}, {"mean_R", json::array()}, {"se_R", json::array()}, {"band_lo", json::array()},
                   {"band_hi", json::array()}, {"mean_Y", json::array()}, {"mean_strategy", json::array()}};
    const double r0 = sm.mean_r.front().mean;
    std::vector<double> buf(sc.paths);
    for (std::size_t i = 0; i <= sc.steps; ++i) {
      series["mean_R"].push_back(sm.mean_r[i].mean);
      series["se_R"].push_back(sm.mean_r[i].se);
      series["band_lo"].push_back(r0 - k * sm.from_start[i].se);
      series["band_hi"].push_back(r0 + k * sm.from_start[i].se);
      for (std::size_t p = 0; p < sc.paths; ++p) buf[p] = sol->Y(i, p);
      series["mean_Y"].push_back(mean_se(buf).mean);
      json comp = json::array();
      if (i < sc.steps)
        for (std::size_t c = 0; c < opt.values.dim(); ++c) {
          for (std::size_t p = 0; p < sc.paths; ++p) buf[p] = opt.values(i, p, c);
          comp.push_back(mean_se(buf).mean);
        }
      series["mean_strategy"].push_back(comp);
    }
    ver["series"] = series;
    notes.push_back("stopping times in the dynamic-principle and BMO checks are restricted to grid times");
    notes.push_back(ad.note);
  }
  rep["verification"] = ver;
  rep["notes"] = notes;
  return res;
}

// CSV of the verification series in a report. A report without a series
// gives the header only.
inline std::string emit_plotdata(const json& report) {
  std::ostringstream os;
  const json* series = nullptr;
  if (report.contains("verification") && report["verification"].is_object() && report["verification"].contains("series"))
    series = &report["verification"]["series"];
  std::size_t m = 0;
  if (series)
    for (const auto& s : (*series)["mean_strategy"]) m = std::max<std::size_t>(m, s.size());
  if (!series && report.contains("config")) {
    const auto& sg = report["config"]["market"]["sigma"];
    if (sg.is_array() && !sg.empty()) m = sg.front().size();
  }
  os << "# uopt plotdata " << kVersion << "\n"
     << "# t: grid time\n"
     << "# mean_R, se_R: cross-path mean of R_t under the optimal strategy and its standard error\n"
     << "# band_lo, band_hi: R_0 -/+ k_se standard errors of R_t - R_0 (flatness band)\n"
     << "# mean_Y: cross-path mean of Y_t\n"
     << "# mean_strategy_k: cross-path mean of strategy component k on [t_i, t_{i+1}); empty at t = T\n"
     << "t,mean_R,se_R,band_lo,band_hi,mean_Y";
  for (std::size_t c = 0; c < m; ++c) os << ",mean_strategy_" << c;
  os << "\n";
  if (!series) return os.str();
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::string(buf);
  };
  const auto& s = *series;
  for (std::size_t i = 0; i < s["t"].size(); ++i) {
    os << num(s["t"][i].get<double>());
    for (const char* col : {"mean_R", "se_R", "band_lo", "band_hi", "mean_Y"}) os << "," << num(s[col][i].get<double>());
    const auto& comp = s["mean_strategy"][i];
    for (std::size_t c = 0; c < m; ++c) os << "," << (c < comp.size() ? num(comp[c].get<double>()) : "");
    os << "\n";
  }
  return os.str();
}

}  // namespace uopt::scenario
