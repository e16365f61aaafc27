#pragma once

// Named verification suites run by `uopt verify`. Each returns a table of
// (check, value, tolerance, pass) rows.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "uopt/portfolio.hpp"
#include "uopt/solver_pde.hpp"

namespace uopt {

struct SuiteRow {
  std::string check;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct SuiteResult {
  std::string name;
  std::vector<SuiteRow> rows;
  bool pass() const {
    for (const auto& r : rows)
      if (!r.pass) return false;
    return !rows.empty();
  }
  void add(std::string check, double value, double tol) { rows.push_back({std::move(check), value, tol, std::abs(value) <= tol}); }
  void add_flag(std::string check, bool ok) { rows.push_back({std::move(check), ok ? 0.0 : 1.0, 0.0, ok}); }
};

namespace detail {

inline Vector gaussian(std::mt19937_64& rng, std::size_t m, double scale) {
  std::normal_distribution<double> nd(0.0, scale);
  Vector v(static_cast<Eigen::Index>(m));
  for (auto& x : v) x = nd(rng);
  return v;
}

// d x m with singular values in [0.5, 2].
inline Matrix well_conditioned(std::mt19937_64& rng, std::size_t d, std::size_t m) {
  const Matrix a = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m),
                                                [&] { return std::normal_distribution<double>(0.0, 1.0)(rng); });
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Matrix s = Matrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
  for (Eigen::Index k = 0; k < s.rows() && k < s.cols(); ++k) s(k, k) = u(rng);
  return svd.matrixU() * s * svd.matrixV().transpose();
}

// Scalar market with volatility `vol` and price of risk `theta`.
inline MarketModel scalar_model(double theta, double vol) {
  Vector b(1);
  b << theta * vol;
  return MarketModel::constant(b, Matrix::Constant(1, 1, vol), 0.1, 2.0);
}

struct Bench {
  PathEnsemble ens;
  ThetaPath theta;
  ConstraintField sets;
};

inline Bench bench(const MarketModel& model, const ConstraintSpec& spec, std::size_t steps, std::size_t paths,
                   std::uint64_t seed) {
  const TimeGrid grid = TimeGrid::uniform(1.0, steps);
  PathEnsemble ens = simulate_brownian(model, grid, paths, seed);
  ThetaPath th = theta_path(model, ens);
  return {std::move(ens), std::move(th), constraint_field(model, spec, grid)};
}

inline BsdeSolution solve(const Bench& b, const UtilitySpec& u, const Liability& f, const RegressionBasis& basis) {
  if (u.kind == UtilityKind::Logarithmic) return solve_log_bsde(b.ens, b.theta, b.sets);
  return solve_bsde_lsmc(b.ens, f, Driver(u, Driver::default_z_cap(b.theta.max_norm())), b.sets, b.theta, basis);
}

inline Vector scalar(double x) { return Vector::Constant(1, x); }

}  // namespace detail

struct ConeSweep {
  std::size_t cases = 0;
  double max_identity = 0.0;  // |<Pi(a), a - Pi(a)>|
  double max_exp = 0.0;       // exponential driver vs cone-form generator
  double max_pow = 0.0;       // power driver vs cone-form generator
};

// Random (z, theta, cone) triples: orthants and generated cones in
// dimension d <= m <= 3 under random well-conditioned sigma.
inline ConeSweep cone_residual_sweep(std::size_t cases, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ua(0.2, 3.0), ug(0.05, 0.95);
  ConeSweep out;
  out.cases = cases;
  for (std::size_t c = 0; c < cases; ++c) {
    const std::size_t m = 1 + c % 3, d = 1 + (c / 3) % m;
    ConstraintSpec spec = ConstraintSpec::orthant(d);
    if (c % 2) {
      std::vector<Vector> gens;
      for (std::size_t k = 0; k < 1 + (c / 2) % 4; ++k) gens.push_back(detail::gaussian(rng, d, 1.0));
      spec = ConstraintSpec::generated_cone(gens);
    }
    const InducedSet cone(spec, detail::well_conditioned(rng, d, m));
    const Vector z = detail::gaussian(rng, m, 1.0), th = detail::gaussian(rng, m, 0.5);
    out.max_identity = std::max(out.max_identity, std::abs(cone_identity_residual(z + th, cone)));
    out.max_exp = std::max(out.max_exp, std::abs(sekine_exp_residual(0.0, z, th, cone, ua(rng))));
    out.max_pow = std::max(out.max_pow, std::abs(sekine_pow_residual(0.0, z, th, cone, ug(rng))));
  }
  return out;
}

inline SuiteResult suite_cones(std::uint64_t seed, std::size_t cases = 10000) {
  const ConeSweep s = cone_residual_sweep(cases, seed);
  SuiteResult r{"cones", {}};
  r.add("cone identity <Pi(a), a - Pi(a)>, " + std::to_string(cases) + " cases", s.max_identity, 1e-10);
  r.add("exponential driver, cone form", s.max_exp, 1e-10);
  r.add("power driver, cone form", s.max_pow, 1e-10);
  return r;
}

inline SuiteResult suite_sekine(std::uint64_t seed) {
  SuiteResult r{"sekine", {}};
  const ConeSweep s = cone_residual_sweep(2000, seed);
  r.add("exponential driver, cone form, random cones", s.max_exp, 1e-10);
  r.add("power driver, cone form, random cones", s.max_pow, 1e-10);
  const InducedSet half(ConstraintSpec::orthant(1), Matrix::Identity(1, 1));
  const InducedSet line(ConstraintSpec::full_space(1), Matrix::Identity(1, 1));
  r.add("exponential, full space", sekine_exp_residual(0.0, detail::scalar(0.7), detail::scalar(0.2), line, 2.0), 1e-14);
  r.add("exponential, z = -theta on half-line", sekine_exp_residual(0.0, detail::scalar(-0.3), detail::scalar(0.3), half, 1.5), 1e-14);
  r.add("power, projection active", sekine_pow_residual(0.0, detail::scalar(-0.5), detail::scalar(0.2), half, 0.5), 1e-14);
  r.add("power, projection inactive", sekine_pow_residual(0.0, detail::scalar(0.5), detail::scalar(0.2), half, 0.5), 1e-14);
  return r;
}

inline SuiteResult suite_merton(std::uint64_t seed) {
  SuiteResult r{"merton", {}};
  const auto basis = RegressionBasis::polynomial(2);
  const auto full = ConstraintSpec::full_space(1);
  const auto b = detail::bench(detail::scalar_model(0.2, 0.5), full, 64, 20000, seed);
  const auto e = detail::solve(b, UtilitySpec::exponential(1.0), Liability::zero(), basis);
  r.add("lsmc exponential y0 + 0.02", e.y0 + 0.02, 2e-3);
  const auto p = detail::solve(b, UtilitySpec::power(0.5), Liability::zero(), basis);
  r.add("lsmc power y0 - 0.02", p.y0 - 0.02, 2e-3);
  r.add("power V(1) - exp(0.02)", value_pow(1.0, p.y0, 0.5) - std::exp(0.02), 3e-3);
  const auto rho = optimal_strategy_pow(p, b.theta, b.sets, 0.5);
  double worst = 0.0;
  for (double v : rho.values.raw()) worst = std::max(worst, std::abs(v - 0.4));
  r.add("power rho* - 0.4", worst, 5e-3);

  const auto lb = detail::bench(detail::scalar_model(0.3, 1.0), ConstraintSpec::box(detail::scalar(0), detail::scalar(0.1)), 64, 100, seed);
  const double q = solve_log_quadrature(lb.ens.grid, lb.theta, lb.sets);
  r.add("log V(1) - 0.025", value_log(1.0, q) - 0.025, 1e-10);

  const auto grid = PdeGrid::centered(1.0, 400, 1600);
  const auto pe = solve_bsde_pde(detail::scalar_model(0.2, 0.5), full, Liability::zero(), Driver(UtilitySpec::exponential(1.0), 20.0), grid);
  r.add("pde exponential y0 + 0.02", pe.y0 + 0.02, 5e-4);
  const auto pp = solve_bsde_pde(detail::scalar_model(0.2, 0.5), full, Liability::zero(), Driver(UtilitySpec::power(0.5), 20.0), grid);
  r.add("pde power y0 - 0.02", pp.y0 - 0.02, 5e-4);
  return r;
}

// Dominance and flatness on a box-constrained benchmark for each utility.
inline SuiteResult suite_supermartingale(std::uint64_t seed) {
  SuiteResult r{"supermartingale", {}};
  const auto f = Liability::clipped(0, 1.0, 0.0, -1.0, 1.0);
  const auto b = detail::bench(detail::scalar_model(0.3, 1.0), ConstraintSpec::box(detail::scalar(-0.4), detail::scalar(0.6)), 32,
                               20000, seed);
  for (const auto& u : {UtilitySpec::exponential(1.0), UtilitySpec::power(0.5), UtilitySpec::logarithmic()}) {
    const Liability term = u.kind == UtilityKind::Exponential ? f : Liability::zero();
    const std::string tag = to_string(u.kind);
    const auto sol = detail::solve(b, u, term, RegressionBasis::piecewise_constant(64));
    const auto opt = optimal_strategy(u, sol, b.theta, b.sets);
    const auto rep = supermartingale_test(r_process(u, 1.0, opt, sol, b.ens, b.theta), u, sol, b.ens);
    r.add_flag(tag + " optimal: martingale verdict", rep.verdict == Verdict::Martingale && rep.flat);
    const double v = value(u, 1.0, sol.y0);
    const MeanSe gap = rep.from_start.back();
    const double zo = gap.se > 0 ? std::abs(gap.mean) / gap.se : (gap.mean == 0.0 ? 0.0 : 1e300);
    r.rows.push_back({tag + " optimal: |E U - V| / SE", zo, 3.0, zo <= 3.0});
    const double vse = value_se(u, 1.0, sol);
    for (const auto& ns : adversarial_family(u, opt, b.theta, b.sets, seed)) {
      const MeanSe e = expected_utility(u, 1.0, ns.strategy, b.ens, b.theta, term);
      const double se = std::hypot(e.se, vse);
      const double z = se > 0 ? (e.mean - v) / se : (e.mean > v ? 1e300 : (e.mean < v ? -1e300 : 0.0));
      r.rows.push_back({tag + " " + ns.name + ": (E U - V) / SE", z, 3.0, z <= 3.0});
    }
  }
  return r;
}

inline SuiteResult suite_dynamic(std::uint64_t seed) {
  SuiteResult r{"dynamic", {}};
  const std::size_t n = 64;
  const auto b = detail::bench(detail::scalar_model(0.2, 0.5), ConstraintSpec::full_space(1), n, 20000, seed);
  for (const auto& u : {UtilitySpec::exponential(1.0), UtilitySpec::power(0.5)}) {
    const auto sol = detail::solve(b, u, Liability::zero(), RegressionBasis::polynomial(2));
    const auto s = optimal_strategy(u, sol, b.theta, b.sets);
    for (std::size_t tau : {std::size_t{0}, n / 4, n / 2, 3 * n / 4, n}) {
      const auto chk = dynamic_principle_check(sol, s, b.ens, b.theta, 1.0, u, Liability::zero(), tau);
      r.rows.push_back({std::string(to_string(u.kind)) + " tau=" + std::to_string(tau) + ": residual / tolerance", chk.max_ratio, 1.0,
                        chk.pass});
    }
  }
  return r;
}

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"merton", "cones", "sekine", "supermartingale", "dynamic"};
  return names;
}

inline SuiteResult run_suite(const std::string& name, std::uint64_t seed) {
  if (name == "merton") return suite_merton(seed);
  if (name == "cones") return suite_cones(seed);
  if (name == "sekine") return suite_sekine(seed);
  if (name == "supermartingale") return suite_supermartingale(seed);
  if (name == "dynamic") return suite_dynamic(seed);
  throw InvalidArgument("unknown suite '" + name + "'");
}

}  // namespace uopt
