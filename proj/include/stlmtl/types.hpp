#pragma once

#include <Eigen/Dense>

namespace stlmtl {

/// Row k holds the vector at time step k. Row-major so a flat view stacks the
/// per-step vectors in time order.
using StepMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<const Eigen::VectorXd> flatten(const StepMatrix& m) {
  return {m.data(), m.size()};
}

inline Eigen::Map<Eigen::VectorXd> flatten(StepMatrix& m) { return {m.data(), m.size()}; }

inline StepMatrix unflatten(const Eigen::Ref<const Eigen::VectorXd>& v, Eigen::Index cols) {
  return Eigen::Map<const StepMatrix>(v.data(), v.size() / cols, cols);
}

}  // namespace stlmtl
