#pragma once

// Optimal strategies, value functions and the Monte Carlo checks of the
// supermartingale/martingale optimality certificate.
//
// For each utility, R is built so that R_T is the terminal utility and R_0
// does not depend on the strategy:
//   exponential  R_t = -exp(-alpha (X_t - Y_t))      (amount wealth)
//   power        R_t = X_t^gamma exp(Y_t)            (fraction wealth)
//   log          R_t = log X_t + Y_t                 (fraction wealth)
// R is a supermartingale for every admissible strategy and a martingale
// for the optimal one.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "uopt/constraint_field.hpp"
#include "uopt/drivers.hpp"
#include "uopt/market.hpp"
#include "uopt/random.hpp"
#include "uopt/regression.hpp"
#include "uopt/solver_lsmc.hpp"

namespace uopt {

enum class StrategyKind { Amount, Fraction };

struct Strategy {
  StrategyKind kind = StrategyKind::Amount;
  PathField values;    // N x paths x m, in C_t
  PathField pullback;  // N x paths x d, strategy-space point mapping onto values
};

namespace detail {

template <class Target>
Strategy project_along(std::size_t steps, std::size_t paths, const ConstraintField& sets, StrategyKind kind,
                       Target&& target) {
  const std::size_t m = sets.image_dim();
  const std::size_t d = sets.at(0).base().dim();
  Strategy s{kind, PathField(steps, paths, m), PathField(steps, paths, d)};
  Vector last;
  Projection pr;
  for (std::size_t i = 0; i < steps; ++i) {
    if (!sets.is_constant()) last.resize(0);
    for (std::size_t p = 0; p < paths; ++p) {
      try {
        const Vector a = target(i, p);
        if (last.size() != a.size() || last != a) {
          pr = sets.at(i).project_full(a);
          last = a;
        }
        s.values.vec(i, p) = pr.image;
        s.pullback.vec(i, p) = pr.pullback;
      } catch (const ConvergenceFailure& e) {
        throw ConvergenceFailure(std::string(e.what()) + " (path " + std::to_string(p) + ", step " + std::to_string(i) + ")",
                                 e.best_distance());
      }
    }
  }
  return s;
}

}  // namespace detail

// p*_t in Pi_{C_t}(Z_t + theta_t / alpha).
inline Strategy optimal_strategy_exp(const BsdeSolution& sol, const ThetaPath& theta, const ConstraintField& sets,
                                     double alpha) {
  if (!(alpha > 0.0)) throw InvalidArgument("optimal_strategy_exp: alpha must be positive");
  return detail::project_along(sol.Z.steps(), sol.Z.paths(), sets, StrategyKind::Amount, [&](std::size_t i, std::size_t p) {
    return Vector(sol.Z.vec(i, p) + theta.at(i, p) / alpha);
  });
}

// rho*_t in Pi_{C_t}((Z_t + theta_t) / (1 - gamma)).
inline Strategy optimal_strategy_pow(const BsdeSolution& sol, const ThetaPath& theta, const ConstraintField& sets,
                                     double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("optimal_strategy_pow: gamma must lie in (0, 1)");
  return detail::project_along(sol.Z.steps(), sol.Z.paths(), sets, StrategyKind::Fraction, [&](std::size_t i, std::size_t p) {
    return Vector((sol.Z.vec(i, p) + theta.at(i, p)) / (1.0 - gamma));
  });
}

// rho*_t in Pi_{C_t}(theta_t); no BSDE needed.
inline Strategy optimal_strategy_log(const ThetaPath& theta, const ConstraintField& sets, std::size_t n_paths) {
  return detail::project_along(theta.steps() - 1, n_paths, sets, StrategyKind::Fraction,
                               [&](std::size_t i, std::size_t p) { return Vector(theta.at(i, p)); });
}

inline Strategy optimal_strategy(const UtilitySpec& u, const BsdeSolution& sol, const ThetaPath& theta,
                                 const ConstraintField& sets) {
  switch (u.kind) {
    case UtilityKind::Exponential: return optimal_strategy_exp(sol, theta, sets, u.alpha);
    case UtilityKind::Power: return optimal_strategy_pow(sol, theta, sets, u.gamma);
    case UtilityKind::Logarithmic: return optimal_strategy_log(theta, sets, sol.Y.paths());
  }
  return {};
}

inline double value_exp(double x, double y0, double alpha) {
  if (!(alpha > 0.0)) throw InvalidArgument("value_exp: alpha must be positive");
  return -std::exp(-alpha * (x - y0));
}

inline double value_pow(double x, double y0, double gamma) {
  if (!(x > 0.0)) throw InvalidArgument("value_pow: initial wealth must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("value_pow: gamma must lie in (0, 1)");
  return std::pow(x, gamma) * std::exp(y0);
}

inline double value_log(double x, double y0) {
  if (!(x > 0.0)) throw InvalidArgument("value_log: initial wealth must be positive");
  return std::log(x) + y0;
}

inline double value(const UtilitySpec& u, double x, double y0) {
  switch (u.kind) {
    case UtilityKind::Exponential: return value_exp(x, y0, u.alpha);
    case UtilityKind::Power: return value_pow(x, y0, u.gamma);
    case UtilityKind::Logarithmic: return value_log(x, y0);
  }
  return 0.0;
}

// Standard error of value(u, x, y0) carried by y0 = mean of the t = 0
// regression targets.
inline double value_se(const UtilitySpec& u, double x, const BsdeSolution& sol) {
  if (sol.fit_residual.paths() == 0) return 0.0;
  std::vector<double> buf(sol.fit_residual.paths());
  for (std::size_t p = 0; p < buf.size(); ++p) buf[p] = sol.fit_residual(0, p);
  const double se = mean_se(buf).se, v = value(u, x, sol.y0);
  switch (u.kind) {
    case UtilityKind::Exponential: return u.alpha * std::abs(v) * se;
    case UtilityKind::Power: return std::abs(v) * se;
    case UtilityKind::Logarithmic: return se;
  }
  return se;
}

// Utility of terminal wealth in the normalisation matching R_T:
// -exp(-alpha (x - F)), x^gamma, log x.
inline double terminal_utility(const UtilitySpec& u, double x, double f) {
  switch (u.kind) {
    case UtilityKind::Exponential: return -std::exp(-u.alpha * (x - f));
    case UtilityKind::Power: return std::pow(x, u.gamma);
    case UtilityKind::Logarithmic: return std::log(x);
  }
  return 0.0;
}

// Deterministic-theta log BSDE: Z = 0, Y_i = -sum_{j >= i} f(t_j) dt_j.
inline BsdeSolution solve_log_bsde(const PathEnsemble& ens, const ThetaPath& theta, const ConstraintField& sets) {
  if (!theta.is_deterministic()) throw InvalidArgument("solve_log_bsde: theta must be deterministic (use the LSMC solver)");
  const std::size_t n = ens.steps();
  BsdeSolution sol;
  sol.grid = ens.grid;
  sol.Y = PathField(n + 1, ens.n_paths, 1);
  sol.Z = PathField(n, ens.n_paths, ens.m);
  double y = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    y -= driver_log(ens.grid.t[i], theta.at(i, 0), sets.at(i)) * ens.grid.dt(i);
    for (std::size_t p = 0; p < ens.n_paths; ++p) sol.Y(i, p) = y;
  }
  sol.y0 = y;
  sol.diagnostics.martingale_residual.assign(n, {});
  return sol;
}

struct RProcess {
  PathField R;  // (N + 1) x paths x 1
  PathField X;  // wealth
};

inline PathField wealth(const Strategy& s, double x, const PathEnsemble& ens, const ThetaPath& theta) {
  return s.kind == StrategyKind::Amount ? wealth_amount(x, s.values, ens, theta) : wealth_fraction(x, s.values, ens, theta);
}

inline RProcess r_process(const UtilitySpec& u, double x, const Strategy& strategy, const BsdeSolution& sol,
                          const PathEnsemble& ens, const ThetaPath& theta) {
  if (sol.Y.steps() != ens.steps() + 1 || sol.Y.paths() != ens.n_paths) throw InvalidArgument("r_process: solution grid mismatch");
  const bool amount = u.kind == UtilityKind::Exponential;
  if ((strategy.kind == StrategyKind::Amount) != amount)
    throw InvalidArgument("r_process: exponential utility needs amount strategies, power/log need fractions");
  RProcess out;
  out.X = wealth(strategy, x, ens, theta);
  out.R = PathField(ens.steps() + 1, ens.n_paths, 1);
  for (std::size_t i = 0; i <= ens.steps(); ++i)
    for (std::size_t p = 0; p < ens.n_paths; ++p) {
      const double xi = out.X(i, p), yi = sol.Y(i, p);
      switch (u.kind) {
        case UtilityKind::Exponential: out.R(i, p) = -std::exp(-u.alpha * (xi - yi)); break;
        case UtilityKind::Power: out.R(i, p) = std::pow(xi, u.gamma) * std::exp(yi); break;
        case UtilityKind::Logarithmic: out.R(i, p) = std::log(xi) + yi; break;
      }
    }
  return out;
}

// Gap >= 0 in the supermartingale drift condition, zero at the optimum:
//   exponential  v(t,p,z) = -alpha p.theta + alpha f(t,z) + alpha^2 |p - z|^2 / 2
//   power        -(gamma rho.theta - gamma |rho|^2/2 + f(t,z) + |gamma rho + z|^2 / 2)
//   log          |rho - theta|^2 / 2 - dist^2(theta, C) / 2
inline double drift_gap(const UtilitySpec& u, double t, const Eigen::Ref<const Vector>& p, const Eigen::Ref<const Vector>& z,
                        const Eigen::Ref<const Vector>& theta, const InducedSet& s) {
  switch (u.kind) {
    case UtilityKind::Exponential:
      return -u.alpha * p.dot(theta) + u.alpha * driver_exp(t, z, theta, s, u.alpha) + 0.5 * u.alpha * u.alpha * (p - z).squaredNorm();
    case UtilityKind::Power: {
      const double g = u.gamma;
      return -(g * p.dot(theta) - 0.5 * g * p.squaredNorm() + driver_pow(t, z, theta, s, g) + 0.5 * (g * p + z).squaredNorm());
    }
    case UtilityKind::Logarithmic: {
      const double dist = s.distance(theta);
      return 0.5 * (p - theta).squaredNorm() - 0.5 * dist * dist;
    }
  }
  return 0.0;
}

enum class Verdict { NotSupermartingale, Supermartingale, Martingale };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::NotSupermartingale: return "NOT_SUPERMARTINGALE";
    case Verdict::Supermartingale: return "SUPERMARTINGALE";
    case Verdict::Martingale: return "MARTINGALE";
  }
  return "unknown";
}

struct SupermartingaleReport {
  std::vector<MeanSe> increments;   // per step: R_{i+1} - R_i
  std::vector<MeanSe> from_start;   // per grid time: R_i - R_0
  std::vector<MeanSe> mean_r;       // per grid time: R_i
  Verdict verdict = Verdict::Martingale;
  bool flat = true;                 // every |mean(R_i - R_0)| <= k SE
  bool strict_decrease = false;     // some increment or R_i - R_0 below -k SE
  double worst_increment_z = 0.0;   // max over steps of mean / SE (SE = 0 counted exactly)
  std::vector<MeanSe> drift_gap;    // optional diagnostic per step
  double min_drift_gap = 0.0;
};

namespace detail {
inline bool within(double mean, double se, double k) { return std::abs(mean) <= k * se + 1e-14 * (1.0 + std::abs(mean)); }
inline bool below(double mean, double se, double k) { return mean <= k * se + 1e-14 * (1.0 + std::abs(mean)); }
}  // namespace detail

namespace detail {
// R plus an optional per-path adjustment H that leaves every cross-path mean
// unchanged but carries extra variance into the standard errors.
inline SupermartingaleReport supermartingale_core(const PathField& R, const PathField* H, double k_se) {
  SupermartingaleReport rep;
  const std::size_t n = R.steps();
  if (n < 2) throw InvalidArgument("supermartingale_test: need at least two time points");
  const std::size_t np = R.paths();
  std::vector<double> buf(np);
  auto v = [&](std::size_t i, std::size_t p) { return H ? R(i, p) + (*H)(i, p) : R(i, p); };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < np; ++p) buf[p] = v(i, p);
    rep.mean_r.push_back(mean_se(buf));
    for (std::size_t p = 0; p < np; ++p) buf[p] = v(i, p) - v(0, p);
    rep.from_start.push_back(mean_se(buf));
  }
  bool super = true, mart = true;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    for (std::size_t p = 0; p < np; ++p) buf[p] = v(i + 1, p) - v(i, p);
    const MeanSe inc = mean_se(buf);
    rep.increments.push_back(inc);
    if (!below(inc.mean, inc.se, k_se)) super = false;
    if (!within(inc.mean, inc.se, k_se)) mart = false;
    if (!below(-inc.mean, inc.se, k_se)) rep.strict_decrease = true;
    const double zscore = inc.se > 0.0 ? inc.mean / inc.se : (inc.mean > 0 ? 1e300 : (inc.mean < 0 ? -1e300 : 0.0));
    rep.worst_increment_z = i == 0 ? zscore : std::max(rep.worst_increment_z, zscore);
  }
  for (const auto& fs : rep.from_start) {
    if (!within(fs.mean, fs.se, k_se)) rep.flat = false;
    if (!below(-fs.mean, fs.se, k_se)) rep.strict_decrease = true;
  }
  rep.verdict = !super ? Verdict::NotSupermartingale : (mart ? Verdict::Martingale : Verdict::Supermartingale);
  return rep;
}
}  // namespace detail

inline SupermartingaleReport supermartingale_test(const PathField& R, double k_se = 3.0) {
  return detail::supermartingale_core(R, nullptr, k_se);
}

// Same test with standard errors that account for Y being fitted on the
// same paths: each R_i gets the influence term c_i (S_i - Y_i), where c_i is
// the basis projection of dR_i/dY_i. The residuals are orthogonal to the
// basis, so the means are unchanged.
inline SupermartingaleReport supermartingale_test(const RProcess& rp, const UtilitySpec& u, const BsdeSolution& sol,
                                                  const PathEnsemble& ens, double k_se = 3.0) {
  const PathField& R = rp.R;
  if (sol.fit_residual.steps() != R.steps() || sol.fit_residual.paths() != R.paths())
    return detail::supermartingale_core(R, nullptr, k_se);
  const std::size_t np = R.paths();
  const auto rows = static_cast<Eigen::Index>(np);
  PathField H(R.steps(), np, 1);
  Matrix g(rows, 1);
  for (std::size_t i = 0; i < R.steps(); ++i) {
    bool any = false;
    for (std::size_t p = 0; p < np && !any; ++p) any = sol.fit_residual(i, p) != 0.0;
    if (!any) continue;
    for (std::size_t p = 0; p < np; ++p) {
      const auto r = static_cast<Eigen::Index>(p);
      switch (u.kind) {
        case UtilityKind::Exponential: g(r, 0) = u.alpha * R(i, p); break;
        case UtilityKind::Power: g(r, 0) = R(i, p); break;
        case UtilityKind::Logarithmic: g(r, 0) = 1.0; break;
      }
    }
    const RegressionFit c = regress(sol.basis, ens.W, i, ens.grid.t[i], g);
    for (std::size_t p = 0; p < np; ++p) H(i, p) = c.fitted(static_cast<Eigen::Index>(p), 0) * sol.fit_residual(i, p);
  }
  return detail::supermartingale_core(R, &H, k_se);
}

// Adds the per-step drift-gap diagnostic to a report.
inline void attach_drift_gap(SupermartingaleReport& rep, const UtilitySpec& u, const Strategy& s, const BsdeSolution& sol,
                             const ThetaPath& theta, const ConstraintField& sets) {
  rep.drift_gap.clear();
  rep.min_drift_gap = std::numeric_limits<double>::infinity();
  std::vector<double> buf(s.values.paths());
  for (std::size_t i = 0; i < s.values.steps(); ++i) {
    for (std::size_t p = 0; p < buf.size(); ++p) {
      buf[p] = drift_gap(u, sol.grid.t[i], s.values.vec(i, p), sol.Z.vec(i, p), theta.at(i, p), sets.at(i));
      rep.min_drift_gap = std::min(rep.min_drift_gap, buf[p]);
    }
    rep.drift_gap.push_back(mean_se(buf));
  }
}

struct DynamicCheck {
  std::size_t tau_index = 0;
  double max_residual = 0.0;   // max over cells |mean(G - H)|
  double max_ratio = 0.0;      // max over cells |mean| / (k SE + allowance)
  std::size_t cells = 0;
  bool pass = true;
};

// Dynamic programming check at grid index tau. With G the realised
// utility ratio from tau to T and H its value predicted by Y_tau,
//   exponential  G = exp(-alpha (X_T - X_tau - F)),  H = exp(alpha Y_tau)
//   power        G = (X_T / X_tau)^gamma,            H = exp(Y_tau)
//   log          G = log(X_T / X_tau),               H = Y_tau
// E[G - H | cell] must vanish on every cell of W_tau. Cells with fewer than
// `min_cell` paths are skipped.
inline DynamicCheck dynamic_principle_check(const BsdeSolution& sol, const Strategy& strategy, const PathEnsemble& ens,
                                            const ThetaPath& theta, double x, const UtilitySpec& u, const Liability& terminal,
                                            std::size_t tau, int bins = 8, double k_se = 5.0, double bias_allowance = 2e-3,
                                            std::size_t min_cell = 200) {
  const std::size_t n = ens.steps();
  if (tau > n) throw InvalidArgument("dynamic_principle_check: tau index beyond the grid");
  const PathField X = wealth(strategy, x, ens, theta);
  const auto cells = regression_cells(ens.W, tau, ens.grid.t[tau], bins);
  std::size_t ncell = 1;
  for (std::size_t k = 0; k < ens.m; ++k) ncell *= static_cast<std::size_t>(bins);
  std::vector<std::vector<double>> diff(ncell);
  std::vector<double> scale(ncell, 0.0);
  for (std::size_t p = 0; p < ens.n_paths; ++p) {
    const double f = terminal(Vector(ens.W.vec(n, p)));
    const double xt = X(n, p), xs = X(tau, p), y = sol.Y(tau, p);
    double g = 0.0, h = 0.0;
    switch (u.kind) {
      case UtilityKind::Exponential:
        g = std::exp(-u.alpha * (xt - xs - f));
        h = std::exp(u.alpha * y);
        break;
      case UtilityKind::Power:
        g = std::pow(xt / xs, u.gamma);
        h = std::exp(y);
        break;
      case UtilityKind::Logarithmic:
        g = std::log(xt / xs);
        h = y;
        break;
    }
    diff[cells[p]].push_back(g - h);
    scale[cells[p]] += std::abs(h);
  }
  DynamicCheck out;
  out.tau_index = tau;
  for (std::size_t c = 0; c < ncell; ++c) {
    if (diff[c].size() < std::min(min_cell, ens.n_paths)) continue;
    ++out.cells;
    const MeanSe ms = mean_se(diff[c]);
    const double allow = bias_allowance * scale[c] / static_cast<double>(diff[c].size());
    out.max_residual = std::max(out.max_residual, std::abs(ms.mean));
    const double denom = k_se * ms.se + allow;
    const double ratio = denom > 0.0 ? std::abs(ms.mean) / denom : (ms.mean == 0.0 ? 0.0 : 1e300);
    out.max_ratio = std::max(out.max_ratio, ratio);
    if (ratio > 1.0) out.pass = false;
  }
  return out;
}

struct AdmissibilityReport {
  bool membership_ok = true;
  std::optional<std::pair<std::size_t, std::size_t>> first_violation;  // (path, step)
  double max_violation = 0.0;
  double expected_l2 = 0.0;  // E[ int |p|^2 dt ]
  bool l2_finite = true;
  BmoEstimate bmo;
  bool bmo_finite = true;
  std::string note =
      "BMO finiteness of int p dW is a sufficient-condition proxy; the uniform-integrability clause itself is not tested";
  bool pass() const { return membership_ok && l2_finite && bmo_finite; }
};

inline AdmissibilityReport admissibility_proxy(const Strategy& strategy, const PathEnsemble& ens, const ConstraintField& sets,
                                               double tol = 1e-8) {
  AdmissibilityReport rep;
  const std::size_t n = strategy.values.steps(), np = strategy.values.paths();
  if (n != ens.steps() || np != ens.n_paths) throw InvalidArgument("admissibility_proxy: strategy does not match the ensemble");
  double l2 = 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto v = strategy.values.vec(i, p);
      const double viol = sets.at(i).distance(v);
      if (viol > tol * (1.0 + v.norm())) {
        if (rep.membership_ok || (rep.first_violation && (i < rep.first_violation->second ||
                                                           (i == rep.first_violation->second && p < rep.first_violation->first))))
          rep.first_violation = std::make_pair(p, i);
        rep.membership_ok = false;
      }
      rep.max_violation = std::max(rep.max_violation, viol);
      acc += v.squaredNorm() * ens.grid.dt(i);
    }
    l2 += acc;
  }
  rep.expected_l2 = l2 / static_cast<double>(np);
  rep.l2_finite = std::isfinite(rep.expected_l2);
  rep.bmo = bmo_norm_estimate(strategy.values, ens);
  rep.bmo_finite = std::isfinite(rep.bmo.norm);
  return rep;
}

// Monte Carlo estimate of E[U(terminal)] in the R_T normalisation.
inline MeanSe expected_utility(const UtilitySpec& u, double x, const Strategy& s, const PathEnsemble& ens,
                               const ThetaPath& theta, const Liability& terminal) {
  const PathField X = wealth(s, x, ens, theta);
  std::vector<double> buf(ens.n_paths);
  for (std::size_t p = 0; p < ens.n_paths; ++p)
    buf[p] = terminal_utility(u, X(ens.steps(), p), terminal(Vector(ens.W.vec(ens.steps(), p))));
  return mean_se(buf);
}

struct NamedStrategy {
  std::string name;
  Strategy strategy;
};

// Feasible comparison strategies: zero (when 0 is in C), the unconstrained
// Merton target projected per step, constant feasible points, and the
// optimal strategy with projected jitter.
inline std::vector<NamedStrategy> adversarial_family(const UtilitySpec& u, const Strategy& optimal, const ThetaPath& theta,
                                                     const ConstraintField& sets, std::uint64_t seed,
                                                     std::size_t constant_points = 3, double jitter = 0.2) {
  const std::size_t n = optimal.values.steps(), np = optimal.values.paths(), m = sets.image_dim();
  const StrategyKind kind = optimal.kind;
  std::vector<NamedStrategy> fam;
  const Vector zero = Vector::Zero(static_cast<Eigen::Index>(m));
  bool zero_ok = true;
  for (std::size_t i = 0; i < n && zero_ok; ++i) zero_ok = sets.at(i).distance(zero) <= 1e-12;
  if (zero_ok) fam.push_back({"zero", detail::project_along(n, np, sets, kind, [&](std::size_t, std::size_t) { return zero; })});

  const double scale = u.kind == UtilityKind::Exponential ? 1.0 / u.alpha
                       : u.kind == UtilityKind::Power      ? 1.0 / (1.0 - u.gamma)
                                                           : 1.0;
  fam.push_back({"merton_projected", detail::project_along(n, np, sets, kind, [&](std::size_t i, std::size_t p) {
                   return Vector(theta.at(i, p) * scale);
                 })});

  const KeyedNormal rng(seed);
  const double spread = 2.0 * theta.max_norm() * scale + 0.5;
  for (std::size_t c = 0; c < constant_points; ++c) {
    Vector a(static_cast<Eigen::Index>(m));
    for (std::size_t k = 0; k < m; ++k) a[static_cast<Eigen::Index>(k)] = spread * rng(1'000'000 + c, 0, static_cast<std::uint32_t>(k));
    const Vector pull = sets.at(0).project_full(a).pullback;
    Strategy s{kind, PathField(n, np, m), PathField(n, np, pull.size())};
    for (std::size_t i = 0; i < n; ++i) {
      const Vector img = sets.at(i).sigma().transpose() * pull;
      for (std::size_t p = 0; p < np; ++p) {
        s.values.vec(i, p) = img;
        s.pullback.vec(i, p) = pull;
      }
    }
    fam.push_back({"constant_" + std::to_string(c), std::move(s)});
  }

  fam.push_back({"optimal_jitter", detail::project_along(n, np, sets, kind, [&](std::size_t i, std::size_t p) {
                   Vector a = optimal.values.vec(i, p);
                   for (std::size_t k = 0; k < m; ++k)
                     a[static_cast<Eigen::Index>(k)] += jitter * rng(p, static_cast<std::uint32_t>(i), 1000 + static_cast<std::uint32_t>(k));
                   return a;
                 })});
  return fam;
}

// Upper envelope for the BMO norm of int Z dW from the bounded-Y argument:
// with k = sup|Y|, E[int |Z|^2 | F_tau] <= 8k^2 + 4kT theta^2/alpha + 16 k^2 theta^2 T.
inline double exp_z_bmo_envelope(double y_bound, double theta_max, double alpha, double horizon) {
  const double k = y_bound, th2 = theta_max * theta_max;
  return std::sqrt(8.0 * k * k + 4.0 * k * horizon * th2 / alpha + 16.0 * k * k * th2 * horizon);
}

}  // namespace uopt
