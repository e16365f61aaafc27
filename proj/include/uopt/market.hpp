#pragma once

// Market model dS/S = b dt + sigma dW with d stocks driven by an
// m-dimensional Brownian motion, zero interest rate. Coefficients are
// Markovian: deterministic functions of (t, W_t).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "uopt/errors.hpp"
#include "uopt/path_field.hpp"
#include "uopt/random.hpp"

namespace uopt {

struct TimeGrid {
  std::vector<double> t;

  static TimeGrid uniform(double horizon, std::size_t steps) {
    if (!(horizon > 0.0) || steps == 0) throw InvalidArgument("uniform grid needs T > 0 and steps >= 1");
    TimeGrid g;
    g.t.resize(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i) g.t[i] = horizon * static_cast<double>(i) / static_cast<double>(steps);
    g.t.back() = horizon;
    return g;
  }

  static TimeGrid from_times(std::vector<double> times) {
    TimeGrid g{std::move(times)};
    g.validate();
    return g;
  }

  void validate() const {
    if (t.size() < 2) throw InvalidArgument("time grid needs at least two points");
    if (t.front() != 0.0) throw InvalidArgument("time grid must start at 0");
    for (std::size_t i = 1; i < t.size(); ++i)
      if (!(t[i] > t[i - 1])) throw InvalidArgument("time grid must be strictly increasing");
  }

  std::size_t steps() const noexcept { return t.size() - 1; }
  double horizon() const noexcept { return t.back(); }
  double dt(std::size_t i) const noexcept { return t[i + 1] - t[i]; }
};

class MarketModel {
public:
  using DriftFn = std::function<Vector(double, const Vector&)>;
  using VolFn = std::function<Matrix(double, const Vector&)>;

  MarketModel(std::size_t d, std::size_t m, DriftFn b, VolFn sigma, double epsilon, double K,
              bool state_dependent = false)
      : d_(d), m_(m), b_(std::move(b)), sigma_(std::move(sigma)), epsilon_(epsilon), k_(K),
        state_dependent_(state_dependent) {
    if (d == 0 || m < d) throw InvalidArgument("market needs 1 <= d <= m");
    if (!(epsilon > 0.0) || !(K > epsilon)) throw InvalidArgument("market needs K > epsilon > 0");
  }

  static MarketModel constant(Vector b, Matrix sigma, double epsilon, double K) {
    if (sigma.rows() != b.size()) throw InvalidArgument("drift length must equal sigma rows");
    const auto d = static_cast<std::size_t>(sigma.rows());
    const auto m = static_cast<std::size_t>(sigma.cols());
    return MarketModel(
        d, m, [b](double, const Vector&) { return b; }, [sigma](double, const Vector&) { return sigma; }, epsilon, K);
  }

  std::size_t d() const noexcept { return d_; }
  std::size_t m() const noexcept { return m_; }
  double epsilon() const noexcept { return epsilon_; }
  double K() const noexcept { return k_; }
  bool state_dependent() const noexcept { return state_dependent_; }

  Vector drift(double t, const Vector& w) const { return b_(t, w); }
  Matrix sigma(double t, const Vector& w) const { return sigma_(t, w); }

private:
  std::size_t d_, m_;
  DriftFn b_;
  VolFn sigma_;
  double epsilon_, k_;
  bool state_dependent_;
};

// theta = sigma' (sigma sigma')^{-1} b.
inline Vector market_price_of_risk(const MarketModel& model, double t, const Vector& w) {
  const Vector b = model.drift(t, w);
  const Matrix s = model.sigma(t, w);
  if (static_cast<std::size_t>(s.rows()) != model.d() || static_cast<std::size_t>(s.cols()) != model.m() ||
      static_cast<std::size_t>(b.size()) != model.d())
    throw InvalidArgument("market coefficient shape mismatch");
  const Matrix gram = s * s.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
  if (lmin < model.epsilon() * (1.0 - 1e-9) || lmax / lmin > (model.K() / model.epsilon()) * (1.0 + 1e-9))
    throw EllipticityViolation("sigma sigma' outside the declared ellipticity bounds at t=" + std::to_string(t));
  const Vector theta = s.transpose() * gram.llt().solve(b);
  // one refinement step keeps |sigma theta - b| at rounding level
  const Vector r = b - s * theta;
  return theta + s.transpose() * gram.llt().solve(r);
}

struct ValidationReport {
  bool pass = true;
  double worst_min_eigenvalue = 0.0;
  double worst_max_eigenvalue = 0.0;
  double max_drift = 0.0;
  double max_theta = 0.0;
  std::vector<std::string> failures;
};

inline ValidationReport validate_model(const MarketModel& model,
                                       const std::vector<std::pair<double, Vector>>& sample_points) {
  ValidationReport rep;
  rep.worst_min_eigenvalue = std::numeric_limits<double>::infinity();
  rep.worst_max_eigenvalue = 0.0;
  for (const auto& [t, w] : sample_points) {
    const Matrix s = model.sigma(t, w);
    const Vector b = model.drift(t, w);
    if (!s.allFinite() || !b.allFinite()) {
      rep.pass = false;
      rep.failures.push_back("non-finite coefficients at t=" + std::to_string(t));
      continue;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(s * s.transpose(), Eigen::EigenvaluesOnly);
    const double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
    rep.worst_min_eigenvalue = std::min(rep.worst_min_eigenvalue, lmin);
    rep.worst_max_eigenvalue = std::max(rep.worst_max_eigenvalue, lmax);
    rep.max_drift = std::max(rep.max_drift, b.norm());
    if (lmin < model.epsilon()) {
      rep.pass = false;
      rep.failures.push_back("min eigenvalue " + std::to_string(lmin) + " < epsilon at t=" + std::to_string(t));
    } else if (lmax > model.K()) {
      rep.pass = false;
      rep.failures.push_back("max eigenvalue " + std::to_string(lmax) + " > K at t=" + std::to_string(t));
    } else {
      rep.max_theta = std::max(rep.max_theta, market_price_of_risk(model, t, w).norm());
    }
  }
  return rep;
}

struct PathEnsemble {
  TimeGrid grid;
  std::size_t n_paths = 0;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  PathField dW;  // steps x paths x m
  PathField W;   // (steps + 1) x paths x m, W_0 = 0

  std::size_t steps() const noexcept { return grid.steps(); }
};

inline PathEnsemble simulate_brownian(std::size_t m, const TimeGrid& grid, std::size_t n_paths, std::uint64_t seed) {
  grid.validate();
  if (n_paths == 0) throw InvalidArgument("simulate_brownian: n_paths must be >= 1");
  if (m == 0) throw InvalidArgument("simulate_brownian: m must be >= 1");
  PathEnsemble ens;
  ens.grid = grid;
  ens.n_paths = n_paths;
  ens.m = m;
  ens.seed = seed;
  const std::size_t n = grid.steps();
  ens.dW = PathField(n, n_paths, m);
  ens.W = PathField(n + 1, n_paths, m);
  const KeyedNormal rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const double sq = std::sqrt(grid.dt(i));
    for (std::size_t p = 0; p < n_paths; ++p) {
      for (std::size_t k = 0; k < m; k += 2) {
        const auto z = rng.pair(p, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k / 2));
        ens.dW(i, p, k) = sq * z[0];
        if (k + 1 < m) ens.dW(i, p, k + 1) = sq * z[1];
      }
      for (std::size_t k = 0; k < m; ++k) ens.W(i + 1, p, k) = ens.W(i, p, k) + ens.dW(i, p, k);
    }
  }
  return ens;
}

inline PathEnsemble simulate_brownian(const MarketModel& model, const TimeGrid& grid, std::size_t n_paths,
                                      std::uint64_t seed) {
  return simulate_brownian(model.m(), grid, n_paths, seed);
}

// theta along an ensemble. Deterministic theta (no state dependence) is
// stored once per step and shared by all paths.
class ThetaPath {
public:
  ThetaPath() = default;

  static ThetaPath deterministic(std::vector<Vector> per_step) {
    if (per_step.empty()) throw InvalidArgument("ThetaPath: empty");
    ThetaPath tp;
    tp.per_path_ = false;
    tp.field_ = PathField(per_step.size(), 1, static_cast<std::size_t>(per_step.front().size()));
    for (std::size_t i = 0; i < per_step.size(); ++i) tp.field_.vec(i, 0) = per_step[i];
    return tp;
  }

  static ThetaPath constant(const Vector& theta, std::size_t steps) {
    return deterministic(std::vector<Vector>(steps + 1, theta));
  }

  static ThetaPath per_path(PathField f) {
    ThetaPath tp;
    tp.per_path_ = true;
    tp.field_ = std::move(f);
    return tp;
  }

  bool is_deterministic() const noexcept { return !per_path_; }
  std::size_t steps() const noexcept { return field_.steps(); }
  std::size_t dim() const noexcept { return field_.dim(); }
  Eigen::Map<const Vector> at(std::size_t step, std::size_t path) const {
    return field_.vec(step, per_path_ ? path : 0);
  }
  double max_norm() const {
    double mx = 0.0;
    for (std::size_t i = 0; i < field_.steps(); ++i)
      for (std::size_t p = 0; p < field_.paths(); ++p) mx = std::max(mx, field_.vec(i, p).norm());
    return mx;
  }

private:
  bool per_path_ = false;
  PathField field_;
};

inline ThetaPath theta_path(const MarketModel& model, const PathEnsemble& ens) {
  const std::size_t n = ens.steps();
  if (!model.state_dependent()) {
    std::vector<Vector> th;
    th.reserve(n + 1);
    const Vector w0 = Vector::Zero(static_cast<Eigen::Index>(model.m()));
    for (std::size_t i = 0; i <= n; ++i) th.push_back(market_price_of_risk(model, ens.grid.t[i], w0));
    return ThetaPath::deterministic(std::move(th));
  }
  PathField f(n + 1, ens.n_paths, model.m());
  for (std::size_t i = 0; i <= n; ++i)
    for (std::size_t p = 0; p < ens.n_paths; ++p)
      f.vec(i, p) = market_price_of_risk(model, ens.grid.t[i], Vector(ens.W.vec(i, p)));
  return ThetaPath::per_path(std::move(f));
}

namespace detail {
inline void check_strategy_shape(const PathField& p, const PathEnsemble& ens, const ThetaPath& theta) {
  if (p.steps() != ens.steps() || p.paths() != ens.n_paths || p.dim() != ens.m)
    throw InvalidArgument("strategy shape does not match the ensemble");
  if (theta.steps() != ens.steps() + 1 || theta.dim() != ens.m)
    throw InvalidArgument("theta path does not match the ensemble grid");
}
}  // namespace detail

// Euler form of X = x + int p (dW + theta dt); p at step i is used on
// [t_i, t_{i+1}].
inline PathField wealth_amount(double x0, const PathField& p, const PathEnsemble& ens, const ThetaPath& theta) {
  detail::check_strategy_shape(p, ens, theta);
  const std::size_t n = ens.steps();
  PathField x(n + 1, ens.n_paths, 1);
  for (std::size_t q = 0; q < ens.n_paths; ++q) x(0, q) = x0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = ens.grid.dt(i);
    for (std::size_t q = 0; q < ens.n_paths; ++q) {
      const auto pi = p.vec(i, q);
      x(i + 1, q) = x(i, q) + pi.dot(ens.dW.vec(i, q)) + pi.dot(theta.at(i, q)) * dt;
    }
  }
  return x;
}

// Log-Euler form of the stochastic exponential X = x E(int rho (dW + theta dt)).
inline PathField wealth_fraction(double x0, const PathField& rho, const PathEnsemble& ens, const ThetaPath& theta) {
  if (!(x0 > 0.0)) throw InvalidArgument("wealth_fraction: initial wealth must be positive");
  detail::check_strategy_shape(rho, ens, theta);
  const std::size_t n = ens.steps();
  PathField x(n + 1, ens.n_paths, 1);
  for (std::size_t q = 0; q < ens.n_paths; ++q) x(0, q) = x0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dt = ens.grid.dt(i);
    for (std::size_t q = 0; q < ens.n_paths; ++q) {
      const auto r = rho.vec(i, q);
      x(i + 1, q) = x(i, q) * std::exp(r.dot(ens.dW.vec(i, q)) + r.dot(theta.at(i, q)) * dt - 0.5 * r.squaredNorm() * dt);
    }
  }
  return x;
}

}  // namespace uopt
