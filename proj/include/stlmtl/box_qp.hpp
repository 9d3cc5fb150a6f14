#pragma once

#include <Eigen/Dense>

namespace stlmtl {

/// minimize 0.5 x'Gx - c'x  subject to  lower <= x <= upper, with G PSD.
struct BoxQp {
  Eigen::MatrixXd G;
  Eigen::VectorXd c;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  double objective(const Eigen::VectorXd& x) const { return 0.5 * x.dot(G * x) - c.dot(x); }
};

struct BoxQpResult {
  Eigen::VectorXd x;
  /// ||x - clamp(x - grad)||_inf / (1 + ||c||_inf); zero exactly at a KKT point.
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

double kkt_residual(const BoxQp& qp, const Eigen::VectorXd& x);

/// Alternates a projected-gradient search (to fix the active face) with
/// Newton steps restricted to the face, in the style of More-Toraldo.
/// Singular G, including G = 0, is handled by a tiny diagonal shift on the
/// free block.
BoxQpResult solve_box_qp(const BoxQp& qp, const Eigen::VectorXd& start, double tol = 1e-9, int max_iterations = 500);

}  // namespace stlmtl
