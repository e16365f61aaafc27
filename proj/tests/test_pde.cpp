#include <gtest/gtest.h>

#include "support.hpp"
#include "uopt/solver_pde.hpp"

using namespace uopt;
using uopt::testing::mat1;
using uopt::testing::vec;

namespace {

MarketModel scalar_market(double theta) { return MarketModel::constant(vec({theta * 0.5}), mat1(0.5), 0.1, 2.0); }

PdeGrid spec_grid() { return PdeGrid::centered(1.0, 400, 1600); }

}  // namespace

TEST(PdeGridTest, Validation) {
  EXPECT_NO_THROW(spec_grid().validate());
  EXPECT_THROW(PdeGrid::centered(1.0, 400, 100).validate(), InvalidArgument);  // dt > dw^2
  EXPECT_THROW((PdeGrid{1.0, -1.0, 1.0, 101, 0}).validate(), InvalidArgument);  // too narrow
  EXPECT_THROW(PdeGrid::centered(1.0, 3).validate(), InvalidArgument);
  const auto auto_n = PdeGrid::centered(1.0, 201);
  EXPECT_LE(auto_n.dt(), auto_n.dw() * auto_n.dw());
}

TEST(SolvePde, MertonExponential) {
  const auto sol = solve_bsde_pde(scalar_market(0.2), ConstraintSpec::full_space(1), Liability::zero(),
                                  Driver(UtilitySpec::exponential(1.0), 20.0), spec_grid());
  EXPECT_NEAR(sol.y0, -0.02, 5e-4);
  EXPECT_EQ(sol.t.size(), 1601u);
}

TEST(SolvePde, MertonPower) {
  const auto sol = solve_bsde_pde(scalar_market(0.2), ConstraintSpec::full_space(1), Liability::zero(),
                                  Driver(UtilitySpec::power(0.5), 20.0), spec_grid());
  EXPECT_NEAR(sol.y0, 0.02, 5e-4);
}

TEST(SolvePde, LogConstrained) {
  const auto sol = solve_bsde_pde(scalar_market(0.3), ConstraintSpec::box(vec({0}), vec({0.2})), Liability::zero(),
                                  Driver(UtilitySpec::logarithmic(), 25.0), spec_grid());
  EXPECT_NEAR(sol.y0, 0.025, 1e-12);
}

TEST(SolvePde, EntropicClippedPayoff) {
  const auto f = Liability::clipped(0, 1.0, 0.0, -1.0, 1.0);
  const auto sol = solve_bsde_pde(scalar_market(0.2), ConstraintSpec::finite_set({vec({0})}), f,
                                  Driver(UtilitySpec::exponential(1.0), 20.0), spec_grid());
  const double gh = uopt::testing::entropic_gauss_hermite([](double w) { return std::clamp(w, -1.0, 1.0); }, 1.0, 1.0);
  const double exact = uopt::testing::entropic_clipped(1.0, 1.0, -1.0, 1.0);
  EXPECT_NEAR(gh, exact, 3e-3);  // kinks at +-1 slow the quadrature down
  EXPECT_NEAR(sol.y0, gh, 2e-3);
  EXPECT_NEAR(sol.y0, exact, 1e-3);
}

TEST(SolvePde, GridConvergenceOnClippedPayoff) {
  const auto f = Liability::clipped(0, 1.0, 0.0, -1.0, 1.0);
  const double exact = uopt::testing::entropic_clipped(2.0, 1.0, -1.0, 1.0);
  double prev = 1e300;
  for (std::size_t m : {51, 101, 201}) {
    const auto sol = solve_bsde_pde(scalar_market(0.2), ConstraintSpec::finite_set({vec({0})}), f,
                                    Driver(UtilitySpec::exponential(2.0), 20.0), PdeGrid::centered(1.0, m));
    const double err = std::abs(sol.y0 - exact);
    EXPECT_LT(err, prev);
    prev = err;
  }
}

TEST(SolvePde, ComparisonPrinciple) {
  const auto drv = Driver(UtilitySpec::exponential(1.5), 20.0);
  const auto set = ConstraintSpec::box(vec({-0.5}), vec({0.5}));
  const auto grid = PdeGrid::centered(1.0, 161);
  const auto lo = solve_bsde_pde(scalar_market(0.2), set, Liability::clipped(0, 1.0, 0.0, -1.0, 1.0), drv, grid);
  const auto hi = solve_bsde_pde(scalar_market(0.2), set, Liability::clipped(0, 1.0, 0.2, -0.8, 1.2), drv, grid);
  const auto shift = solve_bsde_pde(scalar_market(0.2), set, Liability::clipped(0, 1.0, 0.0, -1.0, 1.0), drv, grid);
  EXPECT_EQ(lo.u, shift.u);
  const double delta = 0.2;
  EXPECT_GE((hi.u - lo.u).minCoeff(), -1e-12);
  EXPECT_LE((hi.u - lo.u).maxCoeff(), delta + 1e-12);
}

TEST(SolvePde, ConstantShiftOfTerminal) {
  const auto drv = Driver(UtilitySpec::exponential(1.0), 20.0);
  const auto set = ConstraintSpec::finite_set({vec({-1}), vec({1})});
  const auto grid = PdeGrid::centered(1.0, 121);
  const auto a = solve_bsde_pde(scalar_market(0.2), set, Liability::zero(), drv, grid);
  const auto b = solve_bsde_pde(scalar_market(0.2), set, Liability::constant(0.3), drv, grid);
  EXPECT_LE(((b.u - a.u).array() - 0.3).abs().maxCoeff(), 1e-12);
}

TEST(SolvePde, Errors) {
  Matrix s(1, 2);
  s << 0.5, 0.0;
  const auto two_noise = MarketModel::constant(vec({0.1}), s, 0.1, 2.0);
  const Driver drv(UtilitySpec::exponential(1.0), 20.0);
  EXPECT_THROW(solve_bsde_pde(two_noise, ConstraintSpec::full_space(1), Liability::zero(), drv, spec_grid()),
               InvalidArgument);
  const MarketModel state(
      1, 1, [](double, const Vector& w) { return vec({0.1 * std::tanh(w[0])}); },
      [](double, const Vector&) { return mat1(0.5); }, 0.1, 2.0, true);
  EXPECT_THROW(solve_bsde_pde(state, ConstraintSpec::full_space(1), Liability::zero(), drv, spec_grid()), InvalidArgument);
  const Liability huge{[](const Vector& w) { return w[0] > 0 ? 1e308 : -1e308; }, 1e308, "huge"};
  try {
    solve_bsde_pde(scalar_market(0.2), ConstraintSpec::full_space(1), huge, drv, PdeGrid::centered(1.0, 41));
    FAIL() << "expected Divergence";
  } catch (const Divergence& e) {
    EXPECT_GT(e.step(), 0u);
  }
}

TEST(EvaluateSolution, TerminalNodesAndLinearity) {
  const auto f = Liability::clipped(0, 0.5, 0.1, -2.0, 2.0);  // linear on the whole domain
  const auto grid = PdeGrid::centered(1.0, 81);
  const auto sol = solve_bsde_pde(scalar_market(0.2), ConstraintSpec::full_space(1), f,
                                  Driver(UtilitySpec::exponential(1.0), 20.0), grid);
  const auto at_t = evaluate_solution(sol, 1.0, 0.37);
  EXPECT_NEAR(at_t.Y, 0.5 * 0.37 + 0.1, 1e-12);
  EXPECT_NEAR(at_t.Z, 0.5, 1e-10);
  const auto node = evaluate_solution(sol, sol.t[7], sol.w(13));
  EXPECT_NEAR(node.Y, sol.u(7, 13), 1e-12);
  EXPECT_NEAR(node.Z, sol.uw(7, 13), 1e-12);
  const double mid = 0.5 * (sol.w(20) + sol.w(21));
  EXPECT_NEAR(evaluate_solution(sol, 1.0, mid).Y, 0.5 * mid + 0.1, 1e-12);
  EXPECT_THROW(evaluate_solution(sol, 1.5, 0.0), InvalidArgument);
  EXPECT_THROW(evaluate_solution(sol, 0.5, 100.0), InvalidArgument);
}
