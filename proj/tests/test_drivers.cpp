#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "uopt/drivers.hpp"

using namespace uopt;
using uopt::testing::mat1;
using uopt::testing::vec;

namespace {

InducedSet scalar_set(ConstraintSpec s, double sigma = 1.0) { return InducedSet(std::move(s), mat1(sigma)); }

InducedSet real_line() { return scalar_set(ConstraintSpec::full_space(1)); }
InducedSet no_trading() { return scalar_set(ConstraintSpec::finite_set({vec({0})})); }

}  // namespace

TEST(DriverExp, FullSpace) {
  EXPECT_NEAR(driver_exp(0.0, vec({0.1}), vec({0.2}), real_line(), 1.0), 0.04, 1e-15);
}

TEST(DriverExp, NoTrading) {
  EXPECT_NEAR(driver_exp(0.0, vec({0.1}), vec({0.3}), no_trading(), 2.0), -0.01, 1e-15);
}

TEST(DriverExp, OnTheSet) {
  const auto s = scalar_set(ConstraintSpec::box(vec({-0.2}), vec({0.4})), 1.5);
  const double alpha = 2.0, th = 0.25;
  for (double c : {-0.3, 0.0, 0.2, 0.6}) {
    const double z = -th / alpha + c;
    EXPECT_NEAR(driver_exp(0.0, vec({z}), vec({th}), s, alpha), z * th + th * th / (2 * alpha), 1e-15);
  }
}

TEST(DriverExp, RejectsBadAlpha) {
  EXPECT_THROW(driver_exp(0.0, vec({0.1}), vec({0.2}), real_line(), 0.0), InvalidArgument);
  EXPECT_THROW(UtilitySpec::exponential(-1.0), InvalidArgument);
  EXPECT_THROW(UtilitySpec::power(1.0), InvalidArgument);
  EXPECT_THROW(UtilitySpec::power(0.0), InvalidArgument);
}

TEST(DriverPow, FullSpace) {
  EXPECT_NEAR(driver_pow(0.0, vec({0}), vec({0.2}), real_line(), 0.5), -0.02, 1e-15);
}

TEST(DriverPow, NoTradingVanishes) {
  EXPECT_NEAR(driver_pow(0.0, vec({0}), vec({0.2}), no_trading(), 0.5), 0.0, 1e-16);
}

TEST(DriverPow, ConeForm) {
  std::mt19937_64 rng(4);
  const InducedSet cone(ConstraintSpec::orthant(2), uopt::testing::random_sigma(rng, 2, 2));
  for (int i = 0; i < 200; ++i) {
    const Vector z = uopt::testing::normal_vec(rng, 2), th = uopt::testing::normal_vec(rng, 2, 0.3);
    const double g = 0.3 + 0.4 * (i % 2);
    const Vector p = cone.project(z + th);
    const double expect = -g / (2 * (1 - g)) * p.squaredNorm() - 0.5 * z.squaredNorm();
    EXPECT_NEAR(driver_pow(0.0, z, th, cone, g), expect, 1e-12 * (1 + z.squaredNorm()));
  }
}

TEST(DriverLog, Examples) {
  EXPECT_NEAR(driver_log(0.0, vec({0.3}), real_line()), -0.045, 1e-15);
  EXPECT_NEAR(driver_log(0.0, vec({0.3}), scalar_set(ConstraintSpec::box(vec({0}), vec({0.1})))), -0.025, 1e-15);
  EXPECT_NEAR(driver_log(0.0, vec({0.3}), scalar_set(ConstraintSpec::box(vec({0}), vec({1})))), -0.045, 1e-15);
}

TEST(DriverLog, ConstantInZ) {
  const Driver d(UtilitySpec::logarithmic(), 10.0);
  const auto s = scalar_set(ConstraintSpec::box(vec({0}), vec({0.1})));
  EXPECT_FALSE(d.depends_on_z());
  EXPECT_EQ(d.raw(0.0, vec({0.0}), vec({0.3}), s), d.raw(0.0, vec({123.0}), vec({0.3}), s));
}

TEST(Growth, ExponentialRandomSearch) {
  const auto u = UtilitySpec::exponential(1.0);
  const auto g = growth_constants(u, 0.2, 0.0);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> mag(0.0, 3.0), th(-0.2, 0.2);
  const InducedSet sets[] = {real_line(), no_trading(), scalar_set(ConstraintSpec::box(vec({-1}), vec({0.5})))};
  for (int i = 0; i < 10000; ++i) {
    const double z = (i % 2 ? 1 : -1) * std::pow(10.0, mag(rng));
    const double t = th(rng);
    for (const auto& s : sets) {
      if (s.k1_bound() > 0.0) continue;
      EXPECT_LE(std::abs(driver_exp(0.0, vec({z}), vec({t}), s, 1.0)), g.c0 + g.c1 * z * z);
    }
  }
}

TEST(Growth, AllDriversWithOffsetSets) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> mag(-2.0, 3.0), th(-0.4, 0.4);
  const InducedSet s = scalar_set(ConstraintSpec::finite_set({vec({0.7}), vec({1.5})}), 0.8);
  const double k1 = s.k1_bound();
  const UtilitySpec us[] = {UtilitySpec::exponential(0.5), UtilitySpec::exponential(3.0), UtilitySpec::power(0.2),
                            UtilitySpec::power(0.8), UtilitySpec::logarithmic()};
  for (const auto& u : us) {
    const Driver d(u, 1e9);
    const auto g = growth_constants(u, 0.4, k1);
    for (int i = 0; i < 10000; ++i) {
      const double z = (i % 2 ? 1 : -1) * std::pow(10.0, mag(rng));
      EXPECT_LE(std::abs(d.raw(0.0, vec({z}), vec({th(rng)}), s)), g.c0 + g.c1 * z * z) << to_string(u.kind);
    }
  }
}

TEST(Growth, LogAndPowerConstants) {
  EXPECT_EQ(growth_constants(UtilitySpec::logarithmic(), 0.3, 0.1).c1, 0.0);
  for (double g : {0.1, 0.5, 0.9}) {
    const auto c = growth_constants(UtilitySpec::power(g), 0.3, 0.1);
    EXPECT_GE(c.c1, 0.5 + g / (2 * (1 - g)) + g * (1 - g));
  }
  EXPECT_THROW(growth_constants(UtilitySpec::logarithmic(), -1.0, 0.0), InvalidArgument);
}

TEST(Sekine, ExponentialOrthantRandom) {
  std::mt19937_64 rng(10);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t m = 1 + i % 3;
    const InducedSet cone(ConstraintSpec::orthant(m), uopt::testing::random_sigma(rng, m, m));
    const Vector z = uopt::testing::normal_vec(rng, m, 2.0), th = uopt::testing::normal_vec(rng, m, 0.5);
    const double alpha = 0.5 + (i % 4);
    EXPECT_LE(std::abs(sekine_exp_residual(0.0, z, th, cone, alpha)), 1e-10 * (1 + z.squaredNorm() + th.squaredNorm()));
  }
}

TEST(Sekine, ExponentialFullSpaceAndOppositeZ) {
  const auto s = real_line();
  EXPECT_LE(std::abs(sekine_exp_residual(0.0, vec({0.7}), vec({0.2}), s, 2.0)), 1e-15);
  const InducedSet cone(ConstraintSpec::orthant(2), Matrix::Identity(2, 2));
  const Vector th = vec({0.3, -0.4});
  EXPECT_LE(std::abs(sekine_exp_residual(0.0, -th, th, cone, 1.5)), 1e-15);
}

TEST(Sekine, PowerOrthantRandom) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t m = 1 + i % 3;
    const InducedSet cone(ConstraintSpec::orthant(m), uopt::testing::random_sigma(rng, m, m));
    const Vector z = uopt::testing::normal_vec(rng, m, 2.0), th = uopt::testing::normal_vec(rng, m, 0.5);
    const double g = 0.1 + 0.2 * (i % 5);
    EXPECT_LE(std::abs(sekine_pow_residual(0.0, z, th, cone, g)), 1e-10 * (1 + z.squaredNorm() + th.squaredNorm()));
  }
}

TEST(Sekine, PowerBranches) {
  const InducedSet cone(ConstraintSpec::orthant(1), mat1(1.0));
  // z + theta in the cone
  EXPECT_LE(std::abs(sekine_pow_residual(0.0, vec({0.5}), vec({0.2}), cone, 0.5)), 1e-15);
  // projection is zero: both sides reduce to -|z|^2/2
  EXPECT_NEAR(driver_pow(0.0, vec({-0.5}), vec({0.2}), cone, 0.5), -0.125, 1e-15);
  EXPECT_LE(std::abs(sekine_pow_residual(0.0, vec({-0.5}), vec({0.2}), cone, 0.5)), 1e-15);
}

TEST(Sekine, NonConeRejected) {
  const auto box = scalar_set(ConstraintSpec::box(vec({0}), vec({1})));
  EXPECT_THROW(sekine_exp_residual(0.0, vec({0.1}), vec({0.2}), box, 1.0), InvalidArgument);
  EXPECT_THROW(sekine_pow_residual(0.0, vec({0.1}), vec({0.2}), box, 0.5), InvalidArgument);
}

TEST(DriverInvariants, ExpUpperBound) {
  std::mt19937_64 rng(3);
  const InducedSet s(ConstraintSpec::finite_set({vec({0.5, -1}), vec({2, 0})}), uopt::testing::random_sigma(rng, 2, 2));
  for (int i = 0; i < 2000; ++i) {
    const Vector z = uopt::testing::normal_vec(rng, 2, 2.0), th = uopt::testing::normal_vec(rng, 2, 0.3);
    EXPECT_LE(driver_exp(0.0, z, th, s, 1.3), z.dot(th) + th.squaredNorm() / 2.6 + 1e-15);
  }
}

TEST(DriverInvariants, SetMonotonicity) {
  const auto small = scalar_set(ConstraintSpec::finite_set({vec({0}), vec({0.5})}), 0.7);
  const auto mid = scalar_set(ConstraintSpec::box(vec({0}), vec({0.5})), 0.7);
  const auto big = scalar_set(ConstraintSpec::orthant(1), 0.7);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  for (int i = 0; i < 2000; ++i) {
    const Vector z = vec({n(rng)}), th = vec({0.3 * n(rng)});
    EXPECT_LE(driver_exp(0.0, z, th, small, 1.0), driver_exp(0.0, z, th, mid, 1.0) + 1e-15);
    EXPECT_LE(driver_exp(0.0, z, th, mid, 1.0), driver_exp(0.0, z, th, big, 1.0) + 1e-15);
    EXPECT_GE(driver_log(0.0, th, small), driver_log(0.0, th, mid) - 1e-15);
    EXPECT_GE(driver_log(0.0, th, mid), driver_log(0.0, th, big) - 1e-15);
  }
}

TEST(DriverInvariants, LocallyLipschitz) {
  std::mt19937_64 rng(6);
  const InducedSet s(ConstraintSpec::finite_set({vec({0.5, -1}), vec({2, 0}), vec({-1, 1})}),
                     uopt::testing::random_sigma(rng, 2, 2));
  const double k1 = s.k1_bound(), th_max = 0.5;
  for (int i = 0; i < 4000; ++i) {
    const Vector z1 = uopt::testing::normal_vec(rng, 2, 3.0), z2 = uopt::testing::normal_vec(rng, 2, 3.0);
    Vector th = uopt::testing::normal_vec(rng, 2, 0.3);
    if (th.norm() > th_max) th *= th_max / th.norm();
    const double dz = (z1 - z2).norm(), r = 1 + z1.norm() + z2.norm();
    const double alpha = 1.5, g = 0.4, q = 1 - g;
    const double c_exp = alpha / 2 + 2 * th_max + alpha * k1;
    const double c_pow = std::max(g / q + 0.5, 2 * g * th_max / q + g * k1);
    EXPECT_LE(std::abs(driver_exp(0, z1, th, s, alpha) - driver_exp(0, z2, th, s, alpha)), c_exp * r * dz + 1e-12);
    EXPECT_LE(std::abs(driver_pow(0, z1, th, s, g) - driver_pow(0, z2, th, s, g)), c_pow * r * dz + 1e-12);
  }
}

TEST(DriverClamp, CapAppliedAndReported) {
  const Driver d(UtilitySpec::exponential(1.0), 2.0);
  const auto s = no_trading();
  const auto [v, capped] = d.clamped(0.0, vec({5.0}), vec({0.2}), s);
  EXPECT_TRUE(capped);
  EXPECT_EQ(v, d.raw(0.0, vec({2.0}), vec({0.2}), s));
  const auto [w, not_capped] = d.clamped(0.0, vec({1.0}), vec({0.2}), s);
  EXPECT_FALSE(not_capped);
  EXPECT_EQ(w, d.raw(0.0, vec({1.0}), vec({0.2}), s));
  EXPECT_EQ(Driver::default_z_cap(0.2), 20.0);
  EXPECT_THROW(Driver(UtilitySpec::logarithmic(), 0.0), InvalidArgument);
}

TEST(LiabilityTest, BoundEnforced) {
  const auto f = Liability::clipped(0, 1.0, 0.0, -1.0, 1.0);
  EXPECT_EQ(f(vec({3.0})), 1.0);
  EXPECT_EQ(f(vec({-0.25})), -0.25);
  EXPECT_EQ(f.bound, 1.0);
  const Liability bad{[](const Vector&) { return 2.0; }, 1.0, "bad"};
  EXPECT_THROW(bad(vec({0.0})), InvalidArgument);
  EXPECT_TRUE(Liability::zero().is_zero());
  EXPECT_FALSE(Liability::constant(0.3).is_zero());
}
