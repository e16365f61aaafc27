#pragma once

// Cross-sectional regression of path quantities on functions of the
// Brownian state W_t, the sufficient statistic for Markovian coefficients.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "uopt/errors.hpp"
#include "uopt/path_field.hpp"

namespace uopt {

struct RegressionBasis {
  enum class Kind { Polynomial, Bins, LinearBins };
  Kind kind = Kind::Polynomial;
  int degree = 2;  // total degree for polynomials
  int bins = 16;   // per dimension for bins

  static RegressionBasis polynomial(int degree) { return {Kind::Polynomial, degree, 0}; }
  static RegressionBasis piecewise_constant(int bins) { return {Kind::Bins, 0, bins}; }
  // same cells, intercept plus slope in each
  static RegressionBasis piecewise_linear(int bins) { return {Kind::LinearBins, 1, bins}; }
  bool binned() const { return kind != Kind::Polynomial; }

  // Default choice: quadratics, falling back to bins above m = 2.
  static RegressionBasis default_for(std::size_t m) {
    return m > 2 ? piecewise_constant(4) : polynomial(2);
  }
};

inline const char* to_string(RegressionBasis::Kind k) {
  switch (k) {
    case RegressionBasis::Kind::Polynomial: return "polynomial";
    case RegressionBasis::Kind::Bins: return "bins";
    case RegressionBasis::Kind::LinearBins: return "bins_linear";
  }
  return "unknown";
}

struct RegressionFit {
  Matrix fitted;            // paths x targets
  int degree_used = 0;      // polynomial degree actually used (bins: 0)
  double condition = 1.0;   // Gram condition number (bins: 1)
  std::size_t cells = 1;    // number of occupied cells (bins)
  std::vector<double> residual_rms;
};

namespace detail {

// Probabilists' Hermite polynomials He_0..He_n at x.
inline void hermite(double x, int n, double* out) {
  out[0] = 1.0;
  if (n >= 1) out[1] = x;
  for (int k = 2; k <= n; ++k) out[k] = x * out[k - 1] - static_cast<double>(k - 1) * out[k - 2];
}

inline void multi_indices(std::size_t m, int degree, std::vector<std::vector<int>>& out) {
  std::vector<int> idx(m, 0);
  // enumerate all exponent vectors with sum <= degree, graded order
  for (int total = 0; total <= degree; ++total) {
    std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int left) {
      if (pos + 1 == m) {
        idx[pos] = left;
        out.push_back(idx);
        return;
      }
      for (int e = left; e >= 0; --e) {
        idx[pos] = e;
        rec(pos + 1, left - e);
      }
    };
    rec(0, total);
  }
}

// Standardised state x = W_t / sqrt(t) (zero at t = 0).
inline Matrix standardised_state(const PathField& w, std::size_t step, double t) {
  Matrix x = w.slice(step);
  if (t > 0.0) x /= std::sqrt(t);
  else x.setZero();
  return x;
}

inline std::vector<std::size_t> bin_cells(const Matrix& x, int bins) {
  std::vector<std::size_t> cell(static_cast<std::size_t>(x.rows()), 0);
  for (Eigen::Index p = 0; p < x.rows(); ++p) {
    std::size_t c = 0, mult = 1;
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      // equal-width cells on [-3, 3], open outer cells
      const double u = (x(p, k) + 3.0) / 6.0 * bins;
      const auto b = static_cast<std::size_t>(std::clamp(std::floor(u), 0.0, static_cast<double>(bins - 1)));
      c += b * mult;
      mult *= static_cast<std::size_t>(bins);
    }
    cell[static_cast<std::size_t>(p)] = c;
  }
  return cell;
}

}  // namespace detail

// Cell index of each path at a given step (bins basis); used by checks that
// need conditional means over explicit cells.
inline std::vector<std::size_t> regression_cells(const PathField& w, std::size_t step, double t, int bins) {
  return detail::bin_cells(detail::standardised_state(w, step, t), bins);
}

// Least-squares fit of each column of `targets` on basis(W_step). For
// polynomials the degree is lowered until the Gram matrix is well
// conditioned (at t = 0 the state is constant and only degree 0 survives).
inline RegressionFit regress(const RegressionBasis& basis, const PathField& w, std::size_t step, double t,
                             const Matrix& targets, double max_condition = 1e10) {
  const auto n = static_cast<Eigen::Index>(w.paths());
  if (targets.rows() != n) throw InvalidArgument("regress: target rows must equal path count");
  const Matrix x = detail::standardised_state(w, step, t);
  RegressionFit fit;
  if (basis.binned()) {
    if (basis.bins < 1) throw InvalidArgument("regress: bins must be >= 1");
    const auto cell = detail::bin_cells(x, basis.bins);
    std::size_t ncell = 1;
    for (Eigen::Index k = 0; k < x.cols(); ++k) ncell *= static_cast<std::size_t>(basis.bins);
    const auto nc = static_cast<Eigen::Index>(ncell);
    Matrix sums = Matrix::Zero(nc, targets.cols()), xsum = Matrix::Zero(nc, x.cols());
    std::vector<double> counts(ncell, 0.0);
    for (Eigen::Index p = 0; p < n; ++p) {
      const auto c = static_cast<Eigen::Index>(cell[static_cast<std::size_t>(p)]);
      sums.row(c) += targets.row(p);
      xsum.row(c) += x.row(p);
      counts[static_cast<std::size_t>(c)] += 1.0;
    }
    fit.cells = static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0; }));
    fit.fitted.resize(n, targets.cols());
    for (Eigen::Index p = 0; p < n; ++p) {
      const auto c = cell[static_cast<std::size_t>(p)];
      fit.fitted.row(p) = sums.row(static_cast<Eigen::Index>(c)) / counts[c];
    }
    if (basis.kind == RegressionBasis::Kind::LinearBins) {
      // centred slopes per cell; sparse or flat cells keep the mean
      const Eigen::Index m = x.cols();
      for (Eigen::Index c = 0; c < nc; ++c)
        if (counts[static_cast<std::size_t>(c)] > 0) xsum.row(c) /= counts[static_cast<std::size_t>(c)];
      std::vector<Matrix> sxx(ncell, Matrix::Zero(m, m)), sxy(ncell, Matrix::Zero(m, targets.cols()));
      for (Eigen::Index p = 0; p < n; ++p) {
        const auto c = cell[static_cast<std::size_t>(p)];
        const Vector dx = (x.row(p) - xsum.row(static_cast<Eigen::Index>(c))).transpose();
        sxx[c] += dx * dx.transpose();
        sxy[c] += dx * (targets.row(p) - fit.fitted.row(p));
      }
      std::vector<Matrix> slope(ncell);
      for (std::size_t c = 0; c < ncell; ++c) {
        if (counts[c] < 3.0 * static_cast<double>(m + 1)) continue;
        Eigen::SelfAdjointEigenSolver<Matrix> es(sxx[c] / counts[c], Eigen::EigenvaluesOnly);
        if (!(es.eigenvalues().minCoeff() > 1e-12)) continue;
        slope[c] = sxx[c].ldlt().solve(sxy[c]);
      }
      for (Eigen::Index p = 0; p < n; ++p) {
        const auto c = cell[static_cast<std::size_t>(p)];
        if (slope[c].size() == 0) continue;
        fit.fitted.row(p) += (x.row(p) - xsum.row(static_cast<Eigen::Index>(c))) * slope[c];
      }
      fit.degree_used = 1;
    }
  } else {
    if (basis.degree < 0) throw InvalidArgument("regress: degree must be >= 0");
    const auto m = static_cast<std::size_t>(x.cols());
    for (int deg = basis.degree; deg >= 0; --deg) {
      std::vector<std::vector<int>> idx;
      detail::multi_indices(m, deg, idx);
      const auto nb = static_cast<Eigen::Index>(idx.size());
      Matrix phi(n, nb);
      std::vector<double> he(static_cast<std::size_t>((deg + 1) * static_cast<int>(m)));
      for (Eigen::Index p = 0; p < n; ++p) {
        for (std::size_t k = 0; k < m; ++k) detail::hermite(x(p, static_cast<Eigen::Index>(k)), deg, he.data() + k * static_cast<std::size_t>(deg + 1));
        for (Eigen::Index b = 0; b < nb; ++b) {
          double v = 1.0;
          for (std::size_t k = 0; k < m; ++k) v *= he[k * static_cast<std::size_t>(deg + 1) + static_cast<std::size_t>(idx[static_cast<std::size_t>(b)][k])];
          phi(p, b) = v;
        }
      }
      const Matrix gram = (phi.transpose() * phi) / static_cast<double>(n);
      Eigen::SelfAdjointEigenSolver<Matrix> es(gram, Eigen::EigenvaluesOnly);
      const double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
      const double cond = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
      if (cond > max_condition || static_cast<Eigen::Index>(n) < nb) {
        if (deg == 0) throw BasisDegeneracy("regression design is rank deficient even at degree 0");
        continue;
      }
      const Matrix beta = gram.ldlt().solve((phi.transpose() * targets) / static_cast<double>(n));
      fit.fitted = phi * beta;
      fit.degree_used = deg;
      fit.condition = cond;
      break;
    }
  }
  fit.residual_rms.resize(static_cast<std::size_t>(targets.cols()));
  for (Eigen::Index c = 0; c < targets.cols(); ++c)
    fit.residual_rms[static_cast<std::size_t>(c)] =
        std::sqrt((targets.col(c) - fit.fitted.col(c)).squaredNorm() / static_cast<double>(std::max<Eigen::Index>(n, 1)));
  return fit;
}

}  // namespace uopt
