#pragma once

// BSDE generators for exponential, power and log utility under a closed
// constraint set C_t, and the cone-case comparison generators used to
// cross-check them.
//
// Sign convention: Y_t = F - int_t^T Z dW - int_t^T f(s, Z_s) ds.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "uopt/constraint_sets.hpp"
#include "uopt/errors.hpp"
#include "uopt/path_field.hpp"

namespace uopt {

enum class UtilityKind { Exponential, Power, Logarithmic };

inline const char* to_string(UtilityKind k) {
  switch (k) {
    case UtilityKind::Exponential: return "exponential";
    case UtilityKind::Power: return "power";
    case UtilityKind::Logarithmic: return "log";
  }
  return "unknown";
}

struct UtilitySpec {
  UtilityKind kind = UtilityKind::Exponential;
  double alpha = 0.0;  // exponential risk aversion
  double gamma = 0.0;  // power exponent

  static UtilitySpec exponential(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidArgument("exponential utility needs alpha > 0");
    return {UtilityKind::Exponential, alpha, 0.0};
  }
  static UtilitySpec power(double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("power utility needs 0 < gamma < 1");
    return {UtilityKind::Power, 0.0, gamma};
  }
  static UtilitySpec logarithmic() { return {UtilityKind::Logarithmic, 0.0, 0.0}; }
};

// Bounded terminal liability F = payoff(W_T).
struct Liability {
  std::function<double(const Vector&)> payoff;
  double bound = 0.0;
  std::string name = "zero";

  double operator()(const Vector& w_terminal) const {
    const double f = payoff(w_terminal);
    if (!(std::abs(f) <= bound * (1.0 + 1e-12))) throw InvalidArgument("liability exceeds its declared bound");
    return f;
  }
  bool is_zero() const noexcept { return bound == 0.0; }

  static Liability zero() {
    return {[](const Vector&) { return 0.0; }, 0.0, "zero"};
  }
  static Liability constant(double c) {
    return {[c](const Vector&) { return c; }, std::abs(c), "constant"};
  }
  // clamp(scale * W_T[component] + shift, lo, hi)
  static Liability clipped(std::size_t component, double scale, double shift, double lo, double hi) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw InvalidArgument("clipped payoff needs finite lo <= hi");
    const auto k = static_cast<Eigen::Index>(component);
    return {[=](const Vector& w) { return std::clamp(scale * w[k] + shift, lo, hi); },
            std::max(std::abs(lo), std::abs(hi)), "clipped"};
  }
};

inline double driver_exp(double /*t*/, const Eigen::Ref<const Vector>& z, const Eigen::Ref<const Vector>& theta,
                         const InducedSet& s, double alpha) {
  if (!(alpha > 0.0)) throw InvalidArgument("driver_exp: alpha must be positive");
  const double dist = s.distance(z + theta / alpha);
  return -0.5 * alpha * dist * dist + z.dot(theta) + theta.squaredNorm() / (2.0 * alpha);
}

inline double driver_pow(double /*t*/, const Eigen::Ref<const Vector>& z, const Eigen::Ref<const Vector>& theta,
                         const InducedSet& s, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("driver_pow: gamma must lie in (0, 1)");
  const double q = 1.0 - gamma;
  const Vector zt = z + theta;
  const double dist = s.distance(zt / q);
  return 0.5 * gamma * q * dist * dist - gamma * zt.squaredNorm() / (2.0 * q) - 0.5 * z.squaredNorm();
}

inline double driver_log(double /*t*/, const Eigen::Ref<const Vector>& theta, const InducedSet& s) {
  const double dist = s.distance(theta);
  return 0.5 * dist * dist - 0.5 * theta.squaredNorm();
}

// Generator bound |f(t, z)| <= c0 + c1 |z|^2.
struct GrowthConstants {
  double c0 = 0.0;
  double c1 = 0.0;
};

// Uses dist^2(x, C) <= 2|x|^2 + 2 k1^2 (k1 >= min-norm of C) and
// |z||theta| <= (|z|^2 + |theta|^2)/2.
inline GrowthConstants growth_constants(const UtilitySpec& u, double theta_max, double k1) {
  if (!(theta_max >= 0.0) || !(k1 >= 0.0) || !std::isfinite(theta_max) || !std::isfinite(k1))
    throw InvalidArgument("growth_constants: bounds must be finite and nonnegative");
  const double th2 = theta_max * theta_max;
  switch (u.kind) {
    case UtilityKind::Exponential: {
      const double a = u.alpha;
      const double r = theta_max / a + k1;
      return {a * r * r + 0.5 * th2 + th2 / (2.0 * a), a + 0.5};
    }
    case UtilityKind::Power: {
      const double g = u.gamma, q = 1.0 - g;
      return {3.0 * g * th2 / q + g * q * k1 * k1, 0.5 + 3.0 * g / q};
    }
    case UtilityKind::Logarithmic:
      return {0.5 * (theta_max + k1) * (theta_max + k1) + 0.5 * th2, 0.0};
  }
  return {};
}

// Driver bound to one utility. The solvers call it with the cap applied to
// z; both raw and capped evaluations are available.
class Driver {
public:
  Driver(UtilitySpec u, double z_cap) : u_(u), z_cap_(z_cap) {
    if (!(z_cap > 0.0)) throw InvalidArgument("Driver: z_cap must be positive");
  }

  static double default_z_cap(double theta_max) { return 50.0 * theta_max + 10.0; }

  const UtilitySpec& utility() const noexcept { return u_; }
  double z_cap() const noexcept { return z_cap_; }
  bool depends_on_z() const noexcept { return u_.kind != UtilityKind::Logarithmic; }

  double raw(double t, const Eigen::Ref<const Vector>& z, const Eigen::Ref<const Vector>& theta,
             const InducedSet& s) const {
    switch (u_.kind) {
      case UtilityKind::Exponential: return driver_exp(t, z, theta, s, u_.alpha);
      case UtilityKind::Power: return driver_pow(t, z, theta, s, u_.gamma);
      case UtilityKind::Logarithmic: return driver_log(t, theta, s);
    }
    return 0.0;
  }

  // Returns (value, whether the cap was active).
  std::pair<double, bool> clamped(double t, const Eigen::Ref<const Vector>& z, const Eigen::Ref<const Vector>& theta,
                                  const InducedSet& s) const {
    const double n = z.norm();
    if (n <= z_cap_ || !depends_on_z()) return {raw(t, z, theta, s), false};
    const Vector zc = z * (z_cap_ / n);
    return {raw(t, zc, theta, s), true};
  }

  GrowthConstants growth(double theta_max, double k1) const { return growth_constants(u_, theta_max, k1); }

private:
  UtilitySpec u_;
  double z_cap_;
};

// alpha f(t, z/alpha) minus the cone-case exponential generator
// theta Pi(z + theta) - |z - Pi(z + theta)|^2 / 2.
inline double sekine_exp_residual(double t, const Eigen::Ref<const Vector>& z, const Eigen::Ref<const Vector>& theta,
                                  const InducedSet& cone, double alpha) {
  if (!cone.base().is_convex_cone()) throw InvalidArgument("sekine_exp_residual: set is not a convex cone");
  const Vector p = cone.project(z + theta);
  const double other = theta.dot(p) - 0.5 * (z - p).squaredNorm();
  return alpha * driver_exp(t, z / alpha, theta, cone, alpha) - other;
}

// Cone-case power generator g(t, z~).
inline double sekine_pow_generator(const Eigen::Ref<const Vector>& zt, const Eigen::Ref<const Vector>& theta,
                                   const InducedSet& cone, double gamma) {
  const double q = 1.0 - gamma;
  const Vector p = cone.project(zt + theta / q);
  return 0.5 * theta.squaredNorm() - 0.5 * (theta - p).squaredNorm() - 0.5 * q * (zt - p).squaredNorm();
}

// (1 - gamma) g(t, z / (1 - gamma)) - f(t, z).
inline double sekine_pow_residual(double t, const Eigen::Ref<const Vector>& z, const Eigen::Ref<const Vector>& theta,
                                  const InducedSet& cone, double gamma) {
  if (!cone.base().is_convex_cone()) throw InvalidArgument("sekine_pow_residual: set is not a convex cone");
  const double q = 1.0 - gamma;
  return q * sekine_pow_generator(z / q, theta, cone, gamma) - driver_pow(t, z, theta, cone, gamma);
}

}  // namespace uopt
