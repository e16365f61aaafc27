#pragma once

// Shared oracles and property runners for the unit tests and the
// acceptance binary.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "uopt/constraint_sets.hpp"
#include "uopt/drivers.hpp"
#include "uopt/constraint_field.hpp"
#include "uopt/market.hpp"

namespace uopt::testing {

inline Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline Matrix mat1(double s) { return Matrix::Constant(1, 1, s); }

inline Vector normal_vec(std::mt19937_64& rng, std::size_t m, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Vector v(static_cast<Eigen::Index>(m));
  for (auto& x : v) x = n(rng);
  return v;
}

// d x m with singular values in [0.5, 2].
inline Matrix random_sigma(std::mt19937_64& rng, std::size_t d, std::size_t m) {
  Matrix g(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(m));
  std::normal_distribution<double> n;
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) g(i, j) = n(rng);
  Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeThinU | Eigen::ComputeThinV);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  Vector s(static_cast<Eigen::Index>(d));
  for (auto& x : s) x = u(rng);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

using Sampler = std::function<Vector(std::mt19937_64&)>;

struct PropertyResult {
  std::string name;
  std::size_t cases = 0;
  std::size_t nonexpansive_fail = 0;
  std::size_t membership_fail = 0;
  std::size_t optimality_fail = 0;
  std::size_t determinism_fail = 0;
  double worst_membership = 0.0;
  double worst_optimality = 0.0;
  bool ok() const { return cases > 0 && nonexpansive_fail + membership_fail + optimality_fail + determinism_fail == 0; }
};

// Nonexpansive distance, re-projection fixed point, optimality against a
// pool of sampled set points, and bit-identical repeat projections.
inline PropertyResult projection_properties(const std::string& name, const InducedSet& s, const Sampler& sample_image,
                                            std::size_t cases, std::uint64_t seed, double tol = 1e-9,
                                            std::size_t pool_size = 1000) {
  std::mt19937_64 rng(seed);
  PropertyResult r;
  r.name = name;
  const std::size_t m = s.image_dim();
  std::vector<Vector> pool;
  for (std::size_t i = 0; i < pool_size; ++i) pool.push_back(sample_image(rng));
  for (std::size_t c = 0; c < cases; ++c) {
    const Vector a = normal_vec(rng, m, 2.0);
    const Vector b = c % 2 ? Vector(a + normal_vec(rng, m, 0.05)) : normal_vec(rng, m, 2.0);
    const Projection pa = s.project_full(a);
    const double db = s.distance(b);
    if (std::abs(pa.distance - db) > (a - b).norm() + tol) ++r.nonexpansive_fail;
    const double fixed = (s.project(pa.image) - pa.image).norm();
    r.worst_membership = std::max(r.worst_membership, fixed);
    if (fixed > tol * (1.0 + pa.image.norm())) ++r.membership_fail;
    double best = ConstraintSpec::inf();
    for (const auto& p : pool) best = std::min(best, (a - p).norm());
    r.worst_optimality = std::max(r.worst_optimality, pa.distance - best);
    if (pa.distance > best + tol) ++r.optimality_fail;
    const Projection again = s.project_full(a);
    if (!(again.image.array() == pa.image.array()).all() || !(again.pullback.array() == pa.pullback.array()).all())
      ++r.determinism_fail;
    ++r.cases;
  }
  return r;
}

// Generated-set sampler: lambda drawn inside [lo, hi] (exponential tails on
// unbounded sides), mapped through G sigma.
inline Sampler generated_sampler(const InducedSet& s) {
  const Matrix a = s.base().generators() * s.sigma();
  const Vector lo = s.base().coeff_lower(), hi = s.base().coeff_upper();
  return [a, lo, hi](std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::exponential_distribution<double> e(1.0);
    std::normal_distribution<double> n(0.0, 2.0);
    Vector l(lo.size());
    for (Eigen::Index i = 0; i < l.size(); ++i) {
      const bool fl = std::isfinite(lo[i]), fh = std::isfinite(hi[i]);
      if (fl && fh) l[i] = lo[i] + (hi[i] - lo[i]) * u(rng);
      else if (fl) l[i] = lo[i] + e(rng);
      else if (fh) l[i] = hi[i] - e(rng);
      else l[i] = n(rng);
    }
    return Vector(a.transpose() * l);
  };
}

inline Sampler discrete_sampler(const InducedSet& s) {
  std::vector<Vector> imgs;
  for (const auto& p : s.base().points()) imgs.push_back(s.sigma().transpose() * p);
  return [imgs](std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> u(0, imgs.size() - 1);
    return imgs[u(rng)];
  };
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// (1/alpha) log E[exp(alpha clip(W_T, lo, hi))], W_T ~ N(0, T), closed form.
inline double entropic_clipped(double alpha, double T, double lo, double hi) {
  const double s = std::sqrt(T);
  const double below = std::exp(alpha * lo) * normal_cdf(lo / s);
  const double above = std::exp(alpha * hi) * normal_cdf(-hi / s);
  const double mid = std::exp(0.5 * alpha * alpha * T) * (normal_cdf((hi - alpha * T) / s) - normal_cdf((lo - alpha * T) / s));
  return std::log(below + above + mid) / alpha;
}

// Same functional by Gauss-Hermite quadrature (probabilists' weights),
// nodes from the Golub-Welsch eigenproblem.
inline double entropic_gauss_hermite(const std::function<double(double)>& payoff, double alpha, double T, int nodes = 200) {
  Matrix j = Matrix::Zero(nodes, nodes);
  for (int k = 1; k < nodes; ++k) j(k, k - 1) = j(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<Matrix> es(j);
  double acc = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const double x = es.eigenvalues()[k];
    const double w = es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
    acc += w * std::exp(alpha * payoff(std::sqrt(T) * x));
  }
  return std::log(acc) / alpha;
}

// (1/alpha) log of the ensemble mean of exp(alpha F(W_T)).
inline double entropic_on_ensemble(const PathEnsemble& ens, const Liability& f, double alpha) {
  double s = 0.0;
  for (std::size_t p = 0; p < ens.n_paths; ++p) s += std::exp(alpha * f(Vector(ens.W.vec(ens.steps(), p))));
  return std::log(s / static_cast<double>(ens.n_paths)) / alpha;
}

// Scalar market with sigma = vol and drift theta * vol, plus everything a
// solver needs on one ensemble.
struct Bench {
  MarketModel model;
  TimeGrid grid;
  PathEnsemble ens;
  ThetaPath theta;
  ConstraintField sets;
};

inline MarketModel scalar_market(double theta, double vol = 0.5) {
  return MarketModel::constant(vec({theta * vol}), mat1(vol), 0.1, 2.0);
}

inline Bench make_bench(const MarketModel& model, const ConstraintSpec& spec, std::size_t steps, std::size_t paths,
                        std::uint64_t seed, double horizon = 1.0) {
  const TimeGrid grid = TimeGrid::uniform(horizon, steps);
  PathEnsemble ens = simulate_brownian(model, grid, paths, seed);
  ThetaPath th = theta_path(model, ens);
  ConstraintField sets = constraint_field(model, spec, grid);
  return {model, grid, std::move(ens), std::move(th), std::move(sets)};
}

}  // namespace uopt::testing
