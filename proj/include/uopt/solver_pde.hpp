#pragma once

// Finite-difference oracle for m = 1. With Y_t = u(t, W_t) and Z_t = u_w,
// the BSDE dY = f(t, Z) dt + Z dW becomes
//   u_t + u_ww / 2 - f(t, u_w) = 0,   u(T, w) = F(w),
// swept backward with an explicit scheme.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "uopt/constraint_sets.hpp"
#include "uopt/drivers.hpp"
#include "uopt/market.hpp"

namespace uopt {

struct PdeGrid {
  double horizon = 1.0;
  double w_min = -6.0;
  double w_max = 6.0;
  std::size_t M = 401;  // spatial nodes
  std::size_t N = 0;    // time steps; 0 picks the smallest stable count

  // Symmetric domain [-width sqrt(T), width sqrt(T)].
  static PdeGrid centered(double horizon, std::size_t M, std::size_t N = 0, double width = 6.0) {
    const double half = width * std::sqrt(horizon);
    return {horizon, -half, half, M, N};
  }

  double dw() const { return (w_max - w_min) / static_cast<double>(M - 1); }
  std::size_t resolved_steps() const {
    if (N > 0) return N;
    const double h = dw();
    return static_cast<std::size_t>(std::ceil(horizon / (0.9 * h * h)));
  }
  double dt() const { return horizon / static_cast<double>(resolved_steps()); }

  void validate() const {
    if (!(horizon > 0.0)) throw InvalidArgument("PdeGrid: horizon must be positive");
    if (M < 5) throw InvalidArgument("PdeGrid: need at least 5 spatial nodes");
    if (!(w_max > w_min)) throw InvalidArgument("PdeGrid: empty spatial range");
    if (w_min > -6.0 * std::sqrt(horizon) * 0.5 || w_max < 6.0 * std::sqrt(horizon) * 0.5)
      throw InvalidArgument("PdeGrid: spatial range must cover 6 sqrt(T) around 0");
    const double h = dw();
    if (dt() > h * h) throw InvalidArgument("PdeGrid: explicit stability bound dt <= dw^2 violated");
  }
};

struct PdeSolution {
  PdeGrid grid;
  std::vector<double> t;  // N + 1 levels
  Matrix u;               // (N + 1) x M
  Matrix uw;              // (N + 1) x M
  double y0 = 0.0;

  double w(std::size_t j) const { return grid.w_min + grid.dw() * static_cast<double>(j); }
};

struct PdeValue {
  double Y = 0.0;
  double Z = 0.0;
};

namespace detail {
inline void gradient(const Eigen::Ref<const Vector>& u, double h, Eigen::Ref<Vector> out) {
  const Eigen::Index m = u.size();
  out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
  out[m - 1] = (3.0 * u[m - 1] - 4.0 * u[m - 2] + u[m - 3]) / (2.0 * h);
  for (Eigen::Index j = 1; j + 1 < m; ++j) out[j] = (u[j + 1] - u[j - 1]) / (2.0 * h);
}
}  // namespace detail

// Bilinear interpolation of (u, u_w) at (t, w).
inline PdeValue evaluate_solution(const PdeSolution& sol, double t, double w) {
  const double tol = 1e-12 * std::max(1.0, sol.grid.horizon);
  if (t < -tol || t > sol.grid.horizon + tol || w < sol.grid.w_min - 1e-12 || w > sol.grid.w_max + 1e-12)
    throw InvalidArgument("evaluate_solution: point outside the grid");
  const std::size_t nt = sol.t.size() - 1, nw = sol.grid.M - 1;
  const double ft = std::clamp(t / sol.grid.horizon * static_cast<double>(nt), 0.0, static_cast<double>(nt));
  const double fw = std::clamp((w - sol.grid.w_min) / sol.grid.dw(), 0.0, static_cast<double>(nw));
  const auto i0 = std::min(static_cast<std::size_t>(ft), nt - 1);
  const auto j0 = std::min(static_cast<std::size_t>(fw), nw - 1);
  const double a = ft - static_cast<double>(i0), b = fw - static_cast<double>(j0);
  auto lerp2 = [&](const Matrix& f) {
    const auto i = static_cast<Eigen::Index>(i0), j = static_cast<Eigen::Index>(j0);
    return (1 - a) * ((1 - b) * f(i, j) + b * f(i, j + 1)) + a * ((1 - b) * f(i + 1, j) + b * f(i + 1, j + 1));
  };
  return {lerp2(sol.u), lerp2(sol.uw)};
}

// theta must depend on t only; the constraint set is rebuilt per level only
// when sigma varies in time.
inline PdeSolution solve_bsde_pde(const MarketModel& model, const ConstraintSpec& base, const Liability& terminal,
                                  const Driver& driver, const PdeGrid& grid, ProjectionOptions opts = {}) {
  if (model.m() != 1) throw InvalidArgument("solve_bsde_pde: requires m = 1");
  if (model.state_dependent()) throw InvalidArgument("solve_bsde_pde: theta must be a function of t only");
  grid.validate();
  const std::size_t nt = grid.resolved_steps(), M = grid.M;
  const double h = grid.dw(), dt = grid.dt();

  PdeSolution sol;
  sol.grid = grid;
  sol.grid.N = nt;
  sol.t.resize(nt + 1);
  for (std::size_t i = 0; i <= nt; ++i) sol.t[i] = grid.horizon * static_cast<double>(i) / static_cast<double>(nt);
  sol.u.resize(static_cast<Eigen::Index>(nt + 1), static_cast<Eigen::Index>(M));
  sol.uw.resize(static_cast<Eigen::Index>(nt + 1), static_cast<Eigen::Index>(M));

  const Vector w0 = Vector::Zero(1);
  const Matrix s0 = model.sigma(0.0, w0);
  bool constant_sigma = true;
  for (double t : sol.t)
    if (!model.sigma(t, w0).isApprox(s0, 0.0)) {
      constant_sigma = false;
      break;
    }
  std::optional<InducedSet> fixed;
  if (constant_sigma) fixed.emplace(base, s0, opts);

  Vector w1(1);
  for (std::size_t j = 0; j < M; ++j) {
    w1[0] = sol.w(j);
    sol.u(static_cast<Eigen::Index>(nt), static_cast<Eigen::Index>(j)) = terminal(w1);
  }

  Vector cur(static_cast<Eigen::Index>(M)), grad(static_cast<Eigen::Index>(M)), z(1);
  for (std::size_t n = nt; n-- > 0;) {
    const double t_next = sol.t[n + 1];
    cur = sol.u.row(static_cast<Eigen::Index>(n + 1)).transpose();
    detail::gradient(cur, h, grad);
    if (!grad.allFinite()) throw Divergence("solve_bsde_pde: non-finite gradient at time level " + std::to_string(n + 1), n + 1);
    sol.uw.row(static_cast<Eigen::Index>(n + 1)) = grad.transpose();
    const Vector theta = market_price_of_risk(model, t_next, w0);
    std::optional<InducedSet> level;
    if (!constant_sigma) level.emplace(base, model.sigma(t_next, w0), opts);
    const InducedSet& set = constant_sigma ? *fixed : *level;
    auto row = sol.u.row(static_cast<Eigen::Index>(n));
    for (std::size_t j = 1; j + 1 < M; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      z[0] = grad[jj];
      const double f = driver.clamped(t_next, z, theta, set).first;
      row[jj] = cur[jj] + dt * (0.5 * (cur[jj + 1] - 2.0 * cur[jj] + cur[jj - 1]) / (h * h) - f);
    }
    const auto last = static_cast<Eigen::Index>(M - 1);
    row[0] = 2.0 * row[1] - row[2];
    row[last] = 2.0 * row[last - 1] - row[last - 2];
    if (!row.allFinite()) throw Divergence("solve_bsde_pde: non-finite values at time level " + std::to_string(n), n);
  }
  cur = sol.u.row(0).transpose();
  detail::gradient(cur, h, grad);
  sol.uw.row(0) = grad.transpose();
  sol.y0 = evaluate_solution(sol, 0.0, 0.0).Y;
  return sol;
}

}  // namespace uopt
