#pragma once

#include <cstddef>
#include <vector>

#include "uopt/constraint_sets.hpp"
#include "uopt/market.hpp"

namespace uopt {

// C_t = C~ sigma_t along a time grid. One set when sigma is constant in
// time, otherwise one per grid point. State-dependent sigma is rejected.
class ConstraintField {
public:
  explicit ConstraintField(InducedSet constant) { sets_.push_back(std::move(constant)); }
  explicit ConstraintField(std::vector<InducedSet> per_step) : sets_(std::move(per_step)) {
    if (sets_.empty()) throw InvalidArgument("ConstraintField: no sets");
  }

  const InducedSet& at(std::size_t step) const { return sets_.size() == 1 ? sets_.front() : sets_.at(step); }
  bool is_constant() const noexcept { return sets_.size() == 1; }
  std::size_t image_dim() const noexcept { return sets_.front().image_dim(); }

  double k1_bound() const {
    double k = 0.0;
    for (const auto& s : sets_) k = std::max(k, s.k1_bound());
    return k;
  }

private:
  std::vector<InducedSet> sets_;
};

inline ConstraintField constraint_field(const MarketModel& model, const ConstraintSpec& base, const TimeGrid& grid,
                                        ProjectionOptions opts = {}) {
  if (model.state_dependent()) throw InvalidArgument("constraint_field: sigma must not depend on the state");
  const Vector w0 = Vector::Zero(static_cast<Eigen::Index>(model.m()));
  std::vector<InducedSet> sets;
  const Matrix s0 = model.sigma(grid.t.front(), w0);
  bool constant = true;
  for (double t : grid.t)
    if (!model.sigma(t, w0).isApprox(s0, 0.0)) constant = false;
  if (constant) return ConstraintField(InducedSet(base, s0, opts));
  for (double t : grid.t) sets.emplace_back(base, model.sigma(t, w0), opts);
  return ConstraintField(std::move(sets));
}

}  // namespace uopt
