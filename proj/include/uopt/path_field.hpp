#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "uopt/errors.hpp"

namespace uopt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Dense (step, path, component) array, step-major so that one time slice
// across all paths is contiguous. Backward solvers sweep slice by slice.
class PathField {
public:
  PathField() = default;
  PathField(std::size_t steps, std::size_t paths, std::size_t dim, double fill = 0.0)
      : steps_(steps), paths_(paths), dim_(dim), data_(steps * paths * dim, fill) {}

  std::size_t steps() const noexcept { return steps_; }
  std::size_t paths() const noexcept { return paths_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t step, std::size_t path, std::size_t k = 0) {
    return data_[(step * paths_ + path) * dim_ + k];
  }
  double operator()(std::size_t step, std::size_t path, std::size_t k = 0) const {
    return data_[(step * paths_ + path) * dim_ + k];
  }

  std::span<double> at(std::size_t step, std::size_t path) {
    return {data_.data() + (step * paths_ + path) * dim_, dim_};
  }
  std::span<const double> at(std::size_t step, std::size_t path) const {
    return {data_.data() + (step * paths_ + path) * dim_, dim_};
  }

  Eigen::Map<const Vector> vec(std::size_t step, std::size_t path) const {
    return {data_.data() + (step * paths_ + path) * dim_, static_cast<Eigen::Index>(dim_)};
  }
  Eigen::Map<Vector> vec(std::size_t step, std::size_t path) {
    return {data_.data() + (step * paths_ + path) * dim_, static_cast<Eigen::Index>(dim_)};
  }

  // Whole time slice, one row per path.
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
  slice(std::size_t step) const {
    return {data_.data() + step * paths_ * dim_, static_cast<Eigen::Index>(paths_),
            static_cast<Eigen::Index>(dim_)};
  }

  const std::vector<double>& raw() const noexcept { return data_; }

  bool same_shape(const PathField& o) const noexcept {
    return steps_ == o.steps_ && paths_ == o.paths_ && dim_ == o.dim_;
  }

private:
  std::size_t steps_ = 0;
  std::size_t paths_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

// Mean and standard error with a fixed summation order.
struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

template <class Range>
MeanSe mean_se(const Range& xs) {
  double n = 0.0;
  double s = 0.0;
  for (double x : xs) {
    s += x;
    n += 1.0;
  }
  if (n == 0.0) return {};
  const double mean = s / n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double var = n > 1.0 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

}  // namespace uopt
