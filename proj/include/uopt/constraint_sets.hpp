#pragma once

// Closed constraint sets in strategy space and their images under a
// volatility matrix. All sets are handled through one of two internal
// forms:
//   * discrete:   an explicit point list (FiniteSet, CustomGrid);
//   * generated:  { lambda * G : lo <= lambda <= hi } for a generator
//                 matrix G (rows) and coefficient bounds, which covers
//                 FullSpace, Box and the orthant (G = I) and GeneratedCone.
// Projection onto the image is then a bounded least-squares problem in the
// coefficients, min |lambda * A - a|^2 with A = G * sigma.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "uopt/errors.hpp"
#include "uopt/path_field.hpp"

namespace uopt {

enum class SetKind { FullSpace, FiniteSet, Box, NonnegativeOrthantCone, GeneratedCone, CustomGrid };

inline const char* to_string(SetKind k) {
  switch (k) {
    case SetKind::FullSpace: return "full_space";
    case SetKind::FiniteSet: return "finite_set";
    case SetKind::Box: return "box";
    case SetKind::NonnegativeOrthantCone: return "orthant";
    case SetKind::GeneratedCone: return "generated_cone";
    case SetKind::CustomGrid: return "custom_grid";
  }
  return "unknown";
}

struct ProjectionOptions {
  double tol = 1e-10;         // tau_proj
  int max_iterations = 10000; // projected-gradient cap
};

namespace detail {

inline bool lex_less(const Vector& a, const Vector& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

inline void require_finite(const Eigen::Ref<const Vector>& v, const char* what) {
  if (!v.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite input");
}

}  // namespace detail

class ConstraintSpec {
public:
  static ConstraintSpec full_space(std::size_t d) {
    ConstraintSpec s(SetKind::FullSpace, d);
    s.set_generated(Matrix::Identity(d, d), Vector::Constant(d, -inf()), Vector::Constant(d, inf()));
    return s;
  }

  static ConstraintSpec finite_set(std::vector<Vector> points) {
    ConstraintSpec s(SetKind::FiniteSet, check_points(points, "finite_set"));
    s.points_ = std::move(points);
    return s;
  }

  static ConstraintSpec box(Vector lower, Vector upper) {
    if (lower.size() == 0 || lower.size() != upper.size())
      throw InvalidArgument("box: lower/upper must be nonempty and of equal length");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
      if (std::isnan(lower[i]) || std::isnan(upper[i])) throw InvalidArgument("box: NaN bound");
      if (lower[i] > upper[i]) throw InvalidArgument("box: lower > upper in component " + std::to_string(i));
      if (lower[i] == inf() || upper[i] == -inf()) throw InvalidArgument("box: empty component");
    }
    const auto d = static_cast<std::size_t>(lower.size());
    ConstraintSpec s(SetKind::Box, d);
    s.set_generated(Matrix::Identity(d, d), std::move(lower), std::move(upper));
    return s;
  }

  static ConstraintSpec orthant(std::size_t d) {
    ConstraintSpec s(SetKind::NonnegativeOrthantCone, d);
    s.set_generated(Matrix::Identity(d, d), Vector::Zero(d), Vector::Constant(d, inf()));
    return s;
  }

  static ConstraintSpec generated_cone(const std::vector<Vector>& generators) {
    const std::size_t d = check_points(generators, "generated_cone");
    Matrix g(generators.size(), d);
    for (std::size_t i = 0; i < generators.size(); ++i) {
      if (generators[i].norm() == 0.0) throw InvalidArgument("generated_cone: zero generator");
      g.row(i) = generators[i].transpose();
    }
    ConstraintSpec s(SetKind::GeneratedCone, d);
    const auto k = static_cast<Eigen::Index>(generators.size());
    s.set_generated(std::move(g), Vector::Zero(k), Vector::Constant(k, inf()));
    return s;
  }

  // Explicit point list standing in for a set sampled at spacing `resolution`.
  // Ties are broken by list index rather than lexicographically.
  static ConstraintSpec custom_grid(std::vector<Vector> points, double resolution) {
    if (!(resolution > 0.0) || !std::isfinite(resolution))
      throw InvalidArgument("custom_grid: resolution must be positive");
    ConstraintSpec s(SetKind::CustomGrid, check_points(points, "custom_grid"));
    s.points_ = std::move(points);
    s.resolution_ = resolution;
    return s;
  }

  SetKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  bool is_discrete() const noexcept { return kind_ == SetKind::FiniteSet || kind_ == SetKind::CustomGrid; }
  bool is_truncated() const noexcept { return truncated_; }
  bool is_convex_cone() const noexcept {
    return !truncated_ && (kind_ == SetKind::FullSpace || kind_ == SetKind::NonnegativeOrthantCone ||
                           kind_ == SetKind::GeneratedCone);
  }
  bool is_convex() const noexcept { return !is_discrete(); }
  bool is_bounded() const noexcept {
    return is_discrete() || (lower_.allFinite() && upper_.allFinite());
  }

  const std::vector<Vector>& points() const noexcept { return points_; }
  const Matrix& generators() const noexcept { return generators_; }
  const Vector& coeff_lower() const noexcept { return lower_; }
  const Vector& coeff_upper() const noexcept { return upper_; }
  double resolution() const noexcept { return resolution_; }

  // Bounded subset used by the grid selection. Discrete sets are cut by the
  // Euclidean ball B_r; generated sets by the cube |lambda_i| <= r on their
  // coefficients, which also exhausts the set as r grows.
  ConstraintSpec truncated(double r) const {
    if (!(r > 0.0)) throw InvalidArgument("truncation radius must be positive");
    ConstraintSpec s = *this;
    s.truncated_ = true;
    if (is_discrete()) {
      s.points_.clear();
      for (const auto& p : points_)
        if (p.norm() <= r) s.points_.push_back(p);
      if (s.points_.empty()) throw InvalidArgument("truncated set is empty");
      return s;
    }
    for (Eigen::Index i = 0; i < lower_.size(); ++i) {
      s.lower_[i] = std::max(lower_[i], -r);
      s.upper_[i] = std::min(upper_[i], r);
      if (s.lower_[i] > s.upper_[i]) throw InvalidArgument("truncated set is empty");
    }
    return s;
  }

  static constexpr double inf() { return std::numeric_limits<double>::infinity(); }

private:
  ConstraintSpec(SetKind k, std::size_t d) : kind_(k), dim_(d) {
    if (d == 0) throw InvalidArgument("constraint dimension must be positive");
  }

  static std::size_t check_points(const std::vector<Vector>& pts, const char* what) {
    if (pts.empty()) throw InvalidArgument(std::string(what) + ": empty point list");
    const auto d = pts.front().size();
    for (const auto& p : pts) {
      if (p.size() != d) throw InvalidArgument(std::string(what) + ": inconsistent point dimensions");
      if (!p.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite point");
    }
    return static_cast<std::size_t>(d);
  }

  void set_generated(Matrix g, Vector lo, Vector hi) {
    generators_ = std::move(g);
    lower_ = std::move(lo);
    upper_ = std::move(hi);
  }

  SetKind kind_;
  std::size_t dim_;
  bool truncated_ = false;
  std::vector<Vector> points_;
  Matrix generators_;
  Vector lower_, upper_;
  double resolution_ = 0.0;
};

// Nearest point of C_t = C~ sigma to a query, together with a strategy-space
// pullback c~ with c~ sigma = image.
struct Projection {
  Vector image;
  Vector pullback;
  double distance = 0.0;
};

class InducedSet {
public:
  InducedSet(ConstraintSpec base, Matrix sigma, ProjectionOptions opts = {})
      : base_(std::move(base)), sigma_(std::move(sigma)), opts_(opts) {
    if (static_cast<std::size_t>(sigma_.rows()) != base_.dim())
      throw InvalidArgument("sigma rows must equal the constraint dimension d");
    if (sigma_.cols() < sigma_.rows()) throw InvalidArgument("sigma must be d x m with d <= m");
    if (!sigma_.allFinite()) throw InvalidArgument("sigma: non-finite entries");
    gram_ = sigma_ * sigma_.transpose();
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram_);
    if (es.eigenvalues().minCoeff() <= 1e-14 * std::max(1.0, es.eigenvalues().maxCoeff()))
      throw InvalidArgument("sigma must have full row rank");

    if (base_.is_discrete()) {
      images_.reserve(base_.points().size());
      for (const auto& p : base_.points()) images_.push_back(sigma_.transpose() * p);
    } else {
      a_ = base_.generators() * sigma_;
      h_ = a_ * a_.transpose();
      Eigen::SelfAdjointEigenSolver<Matrix> hs(h_);
      lambda_max_ = hs.eigenvalues().maxCoeff();
      h_pinv_ = hs.eigenvectors() *
                hs.eigenvalues()
                    .unaryExpr([&](double l) { return l > 1e-13 * lambda_max_ ? 1.0 / l : 0.0; })
                    .asDiagonal() *
                hs.eigenvectors().transpose();
      diagonal_ = true;
      for (Eigen::Index i = 0; i < h_.rows() && diagonal_; ++i)
        for (Eigen::Index j = 0; j < h_.cols(); ++j)
          if (i != j && std::abs(h_(i, j)) > 1e-15 * lambda_max_) {
            diagonal_ = false;
            break;
          }
      const auto& lo = base_.coeff_lower();
      const auto& hi = base_.coeff_upper();
      unconstrained_ = (lo.array() == -ConstraintSpec::inf()).all() && (hi.array() == ConstraintSpec::inf()).all();
      nonneg_ = (lo.array() == 0.0).all() && (hi.array() == ConstraintSpec::inf()).all();
    }
    k1_bound_ = distance(Vector::Zero(sigma_.cols()));
  }

  const ConstraintSpec& base() const noexcept { return base_; }
  const Matrix& sigma() const noexcept { return sigma_; }
  const Matrix& gram() const noexcept { return gram_; }
  double k1_bound() const noexcept { return k1_bound_; }
  std::size_t image_dim() const noexcept { return static_cast<std::size_t>(sigma_.cols()); }
  const ProjectionOptions& options() const noexcept { return opts_; }

  // Whether the projection is computed in closed form / by a finite method.
  bool exact() const noexcept { return base_.is_discrete() || unconstrained_ || diagonal_ || nonneg_; }

  Projection project_full(const Eigen::Ref<const Vector>& a) const {
    check_query(a);
    return base_.is_discrete() ? project_discrete(a) : project_generated(a);
  }

  Vector project(const Eigen::Ref<const Vector>& a) const { return project_full(a).image; }
  double distance(const Eigen::Ref<const Vector>& a) const { return project_full(a).distance; }

  bool contains(const Eigen::Ref<const Vector>& b, double tol) const { return distance(b) <= tol; }

  // Axis-aligned bounding box of the image; only valid for bounded sets.
  std::pair<Vector, Vector> image_bounds() const {
    if (!base_.is_bounded()) throw InvalidArgument("image_bounds: set is unbounded");
    const auto m = static_cast<Eigen::Index>(image_dim());
    Vector lo = Vector::Constant(m, ConstraintSpec::inf()), hi = Vector::Constant(m, -ConstraintSpec::inf());
    if (base_.is_discrete()) {
      for (const auto& p : images_) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
      return {lo, hi};
    }
    lo.setZero();
    hi.setZero();
    const auto& cl = base_.coeff_lower();
    const auto& cu = base_.coeff_upper();
    for (Eigen::Index i = 0; i < a_.rows(); ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        const double x = cl[i] * a_(i, j), y = cu[i] * a_(i, j);
        lo[j] += std::min(x, y);
        hi[j] += std::max(x, y);
      }
    return {lo, hi};
  }

private:
  void check_query(const Eigen::Ref<const Vector>& a) const {
    if (static_cast<std::size_t>(a.size()) != image_dim())
      throw InvalidArgument("query dimension does not match m");
    detail::require_finite(a, "projection query");
  }

  Projection project_discrete(const Eigen::Ref<const Vector>& a) const {
    std::vector<double> d2(images_.size());
    double best = ConstraintSpec::inf();
    double scale = a.squaredNorm();
    for (std::size_t i = 0; i < images_.size(); ++i) {
      d2[i] = (images_[i] - a).squaredNorm();
      best = std::min(best, d2[i]);
      scale = std::max(scale, images_[i].squaredNorm());
    }
    const double tie = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + scale);
    std::size_t pick = images_.size();
    const bool by_index = base_.kind() == SetKind::CustomGrid;
    for (std::size_t i = 0; i < images_.size(); ++i) {
      if (d2[i] > best + tie) continue;
      if (pick == images_.size()) {
        pick = i;
        if (by_index) break;
      } else if (detail::lex_less(base_.points()[i], base_.points()[pick])) {
        pick = i;
      }
    }
    return {images_[pick], base_.points()[pick], std::sqrt(d2[pick])};
  }

  Projection finish(const Vector& lambda, const Eigen::Ref<const Vector>& a) const {
    Projection p;
    p.image = a_.transpose() * lambda;
    p.pullback = base_.generators().transpose() * lambda;
    p.distance = (p.image - a).norm();
    return p;
  }

  Projection project_generated(const Eigen::Ref<const Vector>& a) const {
    const Vector g = a_ * a;  // gradient offset: objective 1/2 l'Hl - l'g
    const auto& lo = base_.coeff_lower();
    const auto& hi = base_.coeff_upper();
    if (unconstrained_) return finish(h_pinv_ * g, a);
    if (diagonal_) {
      Vector l(g.size());
      for (Eigen::Index i = 0; i < g.size(); ++i) l[i] = std::clamp(g[i] / h_(i, i), lo[i], hi[i]);
      return finish(l, a);
    }
    if (nonneg_) return finish(nnls(a), a);
    return finish(projected_gradient(g, a), a);
  }

  // Lawson-Hanson active set for min |A' l - a|, l >= 0.
  Vector nnls(const Eigen::Ref<const Vector>& a) const {
    const Matrix m = a_.transpose();  // m x k
    const Eigen::Index k = m.cols();
    Vector l = Vector::Zero(k);
    std::vector<bool> passive(static_cast<std::size_t>(k), false);
    const double tol = 1e-13 * (1.0 + a.norm()) * std::max(1.0, m.cwiseAbs().maxCoeff());
    for (int outer = 0; outer < 3 * static_cast<int>(k) + 10; ++outer) {
      const Vector w = m.transpose() * (a - m * l);
      Eigen::Index jmax = -1;
      double wmax = tol;
      for (Eigen::Index j = 0; j < k; ++j)
        if (!passive[static_cast<std::size_t>(j)] && w[j] > wmax) {
          wmax = w[j];
          jmax = j;
        }
      if (jmax < 0) break;
      passive[static_cast<std::size_t>(jmax)] = true;
      for (int inner = 0; inner < 3 * static_cast<int>(k) + 10; ++inner) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index j = 0; j < k; ++j)
          if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        Matrix mp(m.rows(), static_cast<Eigen::Index>(idx.size()));
        for (std::size_t c = 0; c < idx.size(); ++c) mp.col(static_cast<Eigen::Index>(c)) = m.col(idx[c]);
        const Vector zp = mp.completeOrthogonalDecomposition().solve(a);
        bool feasible = true;
        for (Eigen::Index c = 0; c < zp.size(); ++c)
          if (zp[c] <= 0.0) feasible = false;
        if (feasible) {
          l.setZero();
          for (std::size_t c = 0; c < idx.size(); ++c) l[idx[c]] = zp[static_cast<Eigen::Index>(c)];
          break;
        }
        double step = 1.0;
        for (std::size_t c = 0; c < idx.size(); ++c) {
          const double z = zp[static_cast<Eigen::Index>(c)];
          if (z <= 0.0) step = std::min(step, l[idx[c]] / (l[idx[c]] - z));
        }
        for (std::size_t c = 0; c < idx.size(); ++c)
          l[idx[c]] += step * (zp[static_cast<Eigen::Index>(c)] - l[idx[c]]);
        for (std::size_t c = 0; c < idx.size(); ++c)
          if (l[idx[c]] <= 1e-15 * (1.0 + a.norm())) {
            l[idx[c]] = 0.0;
            passive[static_cast<std::size_t>(idx[c])] = false;
          }
      }
    }
    return l;
  }

  Vector projected_gradient(const Vector& g, const Eigen::Ref<const Vector>& a) const {
    const auto& lo = base_.coeff_lower();
    const auto& hi = base_.coeff_upper();
    auto clip = [&](Vector v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
      return v;
    };
    const double step = 1.0 / lambda_max_;
    Vector l = clip(h_pinv_ * g);
    Vector best = l;
    double best_obj = (a_.transpose() * l - a).squaredNorm();
    for (int it = 0; it < opts_.max_iterations; ++it) {
      Vector next = clip(l - step * (h_ * l - g));
      const double moved = (a_.transpose() * (next - l)).norm();
      l = std::move(next);
      const double obj = (a_.transpose() * l - a).squaredNorm();
      if (obj <= best_obj) {
        best_obj = obj;
        best = l;
      }
      if (moved <= opts_.tol) return l;
    }
    throw ConvergenceFailure("projected gradient did not reach tau_proj", std::sqrt(best_obj));
  }

  ConstraintSpec base_;
  Matrix sigma_;
  ProjectionOptions opts_;
  Matrix gram_;
  std::vector<Vector> images_;
  Matrix a_, h_, h_pinv_;
  double lambda_max_ = 0.0;
  bool diagonal_ = false;
  bool unconstrained_ = false;
  bool nonneg_ = false;
  double k1_bound_ = 0.0;
};

inline double distance(const Eigen::Ref<const Vector>& a, const InducedSet& s) { return s.distance(a); }
inline Vector project(const Eigen::Ref<const Vector>& a, const InducedSet& s) { return s.project(a); }

// <Pi_C(a), a - Pi_C(a)>, which vanishes for convex cones.
inline double cone_identity_residual(const Eigen::Ref<const Vector>& a, const InducedSet& cone) {
  if (!cone.base().is_convex_cone()) throw InvalidArgument("cone_identity_residual: set is not a convex cone");
  const Vector p = cone.project(a);
  return p.dot(a - p);
}

// Constructive selection on the dyadic grid of spacing ~1/n: among grid
// points within 1/n of the (truncated) set, the nearest to `a`, ties going
// to the smallest enumeration index. Unbounded sets need `radius`.
struct GridSelection {
  Vector point;
  double spacing = 0.0;
  std::size_t candidates = 0;
};

namespace detail {

// Enumeration order of Z^m: by sup-norm shell, then lexicographic.
inline bool enum_less(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  auto shell = [](const std::vector<std::int64_t>& v) {
    std::int64_t s = 0;
    for (auto x : v) s = std::max<std::int64_t>(s, x < 0 ? -x : x);
    return s;
  };
  const auto sa = shell(a), sb = shell(b);
  if (sa != sb) return sa < sb;
  return a < b;
}

}  // namespace detail

inline GridSelection grid_select_detailed(const Eigen::Ref<const Vector>& a, const InducedSet& s, int n,
                                          std::optional<double> radius = std::nullopt,
                                          std::size_t max_candidates = 20'000'000) {
  if (n < 1) throw InvalidArgument("grid_select: resolution index must be >= 1");
  if (static_cast<std::size_t>(a.size()) != s.image_dim()) throw InvalidArgument("grid_select: dimension mismatch");
  detail::require_finite(a, "grid_select");
  std::optional<InducedSet> truncated;
  if (radius) {
    truncated.emplace(s.base().truncated(*radius), s.sigma(), s.options());
  } else if (!s.base().is_bounded()) {
    throw InvalidArgument("grid_select: unbounded set needs a truncation radius");
  }
  const InducedSet& set = truncated ? *truncated : s;

  const auto m = static_cast<Eigen::Index>(set.image_dim());
  const double inv_n = 1.0 / n;
  const double h = m <= 4 ? inv_n : 2.0 * inv_n / std::sqrt(static_cast<double>(m));
  const double reach = set.distance(a) + inv_n + 1e-12;
  auto [blo, bhi] = set.image_bounds();

  std::vector<std::int64_t> klo(static_cast<std::size_t>(m)), khi(static_cast<std::size_t>(m));
  double count = 1.0;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double lo = std::max(blo[j] - inv_n, a[j] - reach);
    const double hi = std::min(bhi[j] + inv_n, a[j] + reach);
    klo[static_cast<std::size_t>(j)] = static_cast<std::int64_t>(std::ceil(lo / h - 1e-9));
    khi[static_cast<std::size_t>(j)] = static_cast<std::int64_t>(std::floor(hi / h + 1e-9));
    count *= std::max<double>(0.0, static_cast<double>(khi[static_cast<std::size_t>(j)] - klo[static_cast<std::size_t>(j)] + 1));
  }
  if (count > static_cast<double>(max_candidates))
    throw InvalidArgument("grid_select: too many grid candidates; lower n or the radius");

  GridSelection out;
  out.spacing = h;
  std::vector<std::int64_t> k = klo, best_k;
  double best = ConstraintSpec::inf();
  Vector g(m);
  bool done = count == 0.0;
  while (!done) {
    for (Eigen::Index j = 0; j < m; ++j) g[j] = h * static_cast<double>(k[static_cast<std::size_t>(j)]);
    const double d = (g - a).norm();
    if (d <= reach + h && d <= best + 1e-12) {
      ++out.candidates;
      if (set.distance(g) <= inv_n + 1e-12) {
        if (d < best - 1e-12 || best_k.empty() || detail::enum_less(k, best_k)) {
          best = std::min(best, d);
          best_k = k;
        }
      }
    }
    std::size_t j = 0;
    for (; j < k.size(); ++j) {
      if (++k[j] <= khi[j]) break;
      k[j] = klo[j];
    }
    done = j == k.size();
  }
  if (best_k.empty()) throw InvalidArgument("grid_select: no grid point within 1/n of the set");
  out.point = Vector(m);
  for (Eigen::Index j = 0; j < m; ++j) out.point[j] = h * static_cast<double>(best_k[static_cast<std::size_t>(j)]);
  return out;
}

inline Vector grid_select(const Eigen::Ref<const Vector>& a, const InducedSet& s, int n,
                          std::optional<double> radius = std::nullopt) {
  return grid_select_detailed(a, s, n, radius).point;
}

}  // namespace uopt
