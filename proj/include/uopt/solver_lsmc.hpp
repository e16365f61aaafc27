#pragma once

// Backward regression Monte Carlo for the quadratic BSDE
//   Y_t = F - int_t^T Z dW - int_t^T f(s, Z_s) ds
// on a simulated ensemble:
//   Z_i = E[Y_{i+1} dW_i | W_i] / dt_i
//   Y_i = E[Y_{i+1} | W_i] - f(t_i, Z_i) dt_i
// with conditional expectations replaced by least-squares regression.
//
// Regression targets: Y is regressed from the pathwise sum
// S_i = F - sum_{j >= i} f(t_j, Z_j) dt_j, which has the same conditional
// expectation as Y_{i+1} - f dt but does not feed earlier regression
// errors back in. Z is regressed from (Y_{i+1} - E[Y_{i+1} | W_i]) dW_i,
// the centred version of the same target.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "uopt/constraint_field.hpp"
#include "uopt/drivers.hpp"
#include "uopt/market.hpp"
#include "uopt/regression.hpp"

namespace uopt {

struct BsdeDiagnostics {
  std::vector<double> regression_rms;  // per step, residual of the Y regression
  std::vector<int> degree_used;        // per step
  std::vector<double> condition;       // per step
  std::vector<MeanSe> martingale_residual;  // per step: Y_{i+1} - Y_i - f dt - Z dW
  std::size_t driver_evaluations = 0;
  std::size_t clamp_activations = 0;
  double envelope = 0.0;  // |Y| sanity bound
  double max_abs_y = 0.0;
  std::vector<std::string> warnings;

  double clamp_fraction() const {
    return driver_evaluations ? static_cast<double>(clamp_activations) / static_cast<double>(driver_evaluations) : 0.0;
  }
};

struct BsdeSolution {
  TimeGrid grid;
  PathField Y;  // (N + 1) x paths x 1
  PathField Z;  // N x paths x m
  PathField fit_residual;  // (N + 1) x paths x 1: regression target minus fitted Y
  RegressionBasis basis = RegressionBasis::polynomial(2);
  double y0 = 0.0;
  BsdeDiagnostics diagnostics;
};

namespace detail {
inline bool constant_values(const std::vector<double>& v) {
  for (double x : v)
    if (x != v.front()) return false;
  return true;
}
}  // namespace detail

inline BsdeSolution solve_bsde_lsmc(const PathEnsemble& ens, const Liability& terminal, const Driver& driver,
                                    const ConstraintField& sets, const ThetaPath& theta,
                                    const RegressionBasis& basis = RegressionBasis::polynomial(2)) {
  const std::size_t n = ens.steps(), np = ens.n_paths, m = ens.m;
  if (theta.steps() != n + 1 || theta.dim() != m) throw InvalidArgument("solve_bsde_lsmc: theta path does not match the ensemble");
  if (sets.image_dim() != m) throw InvalidArgument("solve_bsde_lsmc: constraint image dimension != m");

  BsdeSolution sol;
  sol.grid = ens.grid;
  sol.Y = PathField(n + 1, np, 1);
  sol.Z = PathField(n, np, m);
  sol.fit_residual = PathField(n + 1, np, 1);
  sol.basis = basis;
  auto& diag = sol.diagnostics;
  diag.regression_rms.assign(n, 0.0);
  diag.degree_used.assign(n, 0);
  diag.condition.assign(n, 1.0);
  diag.martingale_residual.assign(n, {});

  std::vector<double> S(np), fvals(np);
  for (std::size_t p = 0; p < np; ++p) S[p] = sol.Y(n, p) = terminal(Vector(ens.W.vec(n, p)));

  const auto rows = static_cast<Eigen::Index>(np);
  for (std::size_t ii = n; ii-- > 0;) {
    const double t = ens.grid.t[ii], dt = ens.grid.dt(ii);
    const InducedSet& set = sets.at(ii);
    std::vector<double> next(np);
    for (std::size_t p = 0; p < np; ++p) next[p] = sol.Y(ii + 1, p);

    if (detail::constant_values(next)) {
      // Y_{i+1} deterministic: Z_i = 0 exactly
      for (std::size_t p = 0; p < np; ++p) sol.Z.vec(ii, p).setZero();
    } else {
      Matrix target(rows, 1);
      for (std::size_t p = 0; p < np; ++p) target(static_cast<Eigen::Index>(p), 0) = next[p];
      const RegressionFit cond = regress(basis, ens.W, ii, t, target);
      Matrix zt(rows, static_cast<Eigen::Index>(m));
      for (std::size_t p = 0; p < np; ++p) {
        const auto r = static_cast<Eigen::Index>(p);
        const double c = next[p] - cond.fitted(r, 0);
        for (std::size_t k = 0; k < m; ++k) zt(r, static_cast<Eigen::Index>(k)) = c * ens.dW(ii, p, k);
      }
      const RegressionFit zf = regress(basis, ens.W, ii, t, zt);
      for (std::size_t p = 0; p < np; ++p) sol.Z.vec(ii, p) = zf.fitted.row(static_cast<Eigen::Index>(p)).transpose() / dt;
    }

    for (std::size_t p = 0; p < np; ++p) {
      const auto [f, capped] = driver.clamped(t, sol.Z.vec(ii, p), theta.at(ii, p), set);
      ++diag.driver_evaluations;
      if (capped) ++diag.clamp_activations;
      if (!std::isfinite(f)) throw Error("solve_bsde_lsmc: non-finite driver value at step " + std::to_string(ii));
      fvals[p] = f;
      S[p] -= f * dt;
    }

    if (detail::constant_values(S)) {
      for (std::size_t p = 0; p < np; ++p) sol.Y(ii, p) = S[p];
    } else {
      Matrix target(rows, 1);
      for (std::size_t p = 0; p < np; ++p) target(static_cast<Eigen::Index>(p), 0) = S[p];
      const RegressionFit fit = regress(basis, ens.W, ii, t, target);
      for (std::size_t p = 0; p < np; ++p) {
        sol.Y(ii, p) = fit.fitted(static_cast<Eigen::Index>(p), 0);
        sol.fit_residual(ii, p) = S[p] - sol.Y(ii, p);
      }
      diag.regression_rms[ii] = fit.residual_rms.front();
      diag.degree_used[ii] = fit.degree_used;
      diag.condition[ii] = fit.condition;
    }

    // The fitted Y reproduce the mean of their targets, so the residual mean
    // is driven by mean(Z dW); its SE is folded into the reported one.
    std::vector<double> res(np), hedge(np);
    for (std::size_t p = 0; p < np; ++p) {
      hedge[p] = sol.Z.vec(ii, p).dot(ens.dW.vec(ii, p));
      res[p] = sol.Y(ii + 1, p) - sol.Y(ii, p) - fvals[p] * dt - hedge[p];
    }
    MeanSe r = mean_se(res);
    r.se = std::hypot(r.se, mean_se(hedge).se);
    diag.martingale_residual[ii] = r;
  }

  double s = 0.0;
  for (std::size_t p = 0; p < np; ++p) s += S[p];
  sol.y0 = s / static_cast<double>(np);

  const auto g = driver.growth(theta.max_norm(), sets.k1_bound());
  diag.envelope = terminal.bound + (g.c0 + g.c1 * driver.z_cap() * driver.z_cap()) * ens.grid.horizon();
  for (double v : sol.Y.raw()) diag.max_abs_y = std::max(diag.max_abs_y, std::abs(v));
  if (diag.max_abs_y > diag.envelope) diag.warnings.push_back("|Y| exceeds the growth envelope");
  if (diag.clamp_fraction() > 0.01) diag.warnings.push_back("driver z-cap active on more than 1% of evaluations");
  return sol;
}

// Y_0 = -E[ int_0^T f(s) ds ] for the z-independent log generator, left-point
// rule on the grid (matching the explicit backward scheme).
inline double solve_log_quadrature(const TimeGrid& grid, const ThetaPath& theta, const ConstraintField& sets,
                                   std::size_t n_paths = 1) {
  grid.validate();
  if (theta.steps() != grid.steps() + 1) throw InvalidArgument("solve_log_quadrature: theta path does not match the grid");
  const std::size_t np = theta.is_deterministic() ? 1 : n_paths;
  double total = 0.0;
  for (std::size_t p = 0; p < np; ++p) {
    double integral = 0.0;
    for (std::size_t i = 0; i < grid.steps(); ++i) integral += driver_log(grid.t[i], theta.at(i, p), sets.at(i)) * grid.dt(i);
    total += integral;
  }
  return -total / static_cast<double>(np);
}

struct BmoEstimate {
  double norm = 0.0;
  std::vector<double> per_time;  // sqrt of the sup of conditional tail means at each t_i
};

// Grid-time approximation of sup_tau E[ int_tau^T |xi|^2 ds | F_tau ]^{1/2}:
// the supremum over stopping times is replaced by the max over grid times,
// so the estimate is an under-approximation. Fitted values are clipped to
// the observed range so that bounds on |xi| carry over.
inline BmoEstimate bmo_norm_estimate(const PathField& xi, const PathEnsemble& ens,
                                     const RegressionBasis& basis = RegressionBasis::piecewise_constant(16)) {
  const std::size_t n = ens.steps(), np = ens.n_paths;
  if (xi.steps() != n || xi.paths() != np) throw InvalidArgument("bmo_norm_estimate: process does not match the ensemble");
  BmoEstimate est;
  est.per_time.assign(n, 0.0);
  Matrix tail = Matrix::Zero(static_cast<Eigen::Index>(np), 1);
  for (std::size_t ii = n; ii-- > 0;) {
    const double dt = ens.grid.dt(ii);
    for (std::size_t p = 0; p < np; ++p) tail(static_cast<Eigen::Index>(p), 0) += xi.vec(ii, p).squaredNorm() * dt;
    const double lo = tail.minCoeff(), hi = tail.maxCoeff();
    double sup = hi;
    if (lo != hi) {
      const RegressionFit fit = regress(basis, ens.W, ii, ens.grid.t[ii], tail);
      sup = std::clamp(fit.fitted.maxCoeff(), lo, hi);
    }
    est.per_time[ii] = std::sqrt(std::max(sup, 0.0));
    est.norm = std::max(est.norm, est.per_time[ii]);
  }
  return est;
}

}  // namespace uopt
