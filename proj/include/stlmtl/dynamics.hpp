#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stlmtl/robustness.hpp"
#include "stlmtl/types.hpp"

namespace stlmtl {

/// x_{k+1} = A x_k + B u_k with sampling period dt.
struct LinearSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  double dt = 0.0;
  std::vector<std::string> var_names;
  std::vector<std::string> u_names;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }

  /// Throws std::invalid_argument on inconsistent dimensions or dt <= 0.
  void validate() const;
};

/// Forward-Euler discretization of m x'' + b x' + ks x = u.
/// States (x1 position, x2 velocity), one force input.
LinearSystem mass_spring_damper(double mass, double ks, double b, double dt);

/// Linearized quadrotor with 0.2 s sampling. States x1..x3 are velocities and
/// x4..x6 positions; inputs are roll, pitch and thrust.
LinearSystem quadrotor();

struct Trajectory {
  Trace trace;
  StepMatrix controls;  // N_T x m

  int num_steps() const { return static_cast<int>(controls.rows()); }
};

Trajectory rollout(const LinearSystem& sys, const Eigen::VectorXd& x0, const StepMatrix& controls);

/// Single-shooting condensation: stacked x_1..x_{N_T} = gamma * stacked u + d.
struct CondensedMap {
  Eigen::MatrixXd gamma;  // (N_T n) x (N_T m), block lower triangular
  Eigen::VectorXd d;      // (N_T n), d_i = A^i x0
};

CondensedMap condensed_map(const LinearSystem& sys, const Eigen::VectorXd& x0, int num_steps);

/// Open-loop controls minimizing sum (x_k - x_ref)' Q (x_k - x_ref) + u_k' R u_k
/// over the horizon, solved on the condensed map.
StepMatrix lqr_tracking_controls(const LinearSystem& sys, const Eigen::VectorXd& x0, int num_steps,
                                 const Eigen::VectorXd& x_ref, const Eigen::MatrixXd& Q,
                                 const Eigen::MatrixXd& R);

}  // namespace stlmtl
