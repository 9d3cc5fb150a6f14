#include "stlmtl/dynamics.hpp"

#include <stdexcept>

namespace stlmtl {

void LinearSystem::validate() const {
  if (A.rows() == 0 || A.rows() != A.cols()) throw std::invalid_argument("A must be square and nonempty");
  if (B.rows() != A.rows() || B.cols() == 0) throw std::invalid_argument("B must have n rows and m >= 1 columns");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (static_cast<int>(var_names.size()) != n()) throw std::invalid_argument("need one name per state");
  if (static_cast<int>(u_names.size()) != m()) throw std::invalid_argument("need one name per input");
}

LinearSystem mass_spring_damper(double mass, double ks, double b, double dt) {
  if (!(mass > 0.0)) throw std::invalid_argument("mass must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  Eigen::Matrix2d Ac;
  Ac << 0.0, 1.0, -ks / mass, -b / mass;
  Eigen::Vector2d Bc(0.0, 1.0 / mass);

  LinearSystem sys;
  sys.A = Eigen::Matrix2d::Identity() + Ac * dt;
  sys.B = Bc * dt;
  sys.dt = dt;
  sys.var_names = {"x1", "x2"};
  sys.u_names = {"u1"};
  return sys;
}

LinearSystem quadrotor() {
  LinearSystem sys;
  sys.A = Eigen::MatrixXd::Identity(6, 6);
  sys.A(3, 0) = 0.2;
  sys.A(4, 1) = 0.2;
  sys.A(5, 2) = 0.2;
  sys.B = Eigen::MatrixXd::Zero(6, 3);
  sys.B(0, 0) = 1.96;
  sys.B(1, 1) = -1.96;
  sys.B(2, 2) = 0.4;
  sys.B(3, 0) = 0.196;
  sys.B(4, 1) = -0.196;
  sys.B(5, 2) = 0.04;
  sys.dt = 0.2;
  sys.var_names = {"x1", "x2", "x3", "x4", "x5", "x6"};
  sys.u_names = {"roll", "pitch", "thrust"};
  return sys;
}

Trajectory rollout(const LinearSystem& sys, const Eigen::VectorXd& x0, const StepMatrix& controls) {
  const int N = static_cast<int>(controls.rows());
  if (N < 1) throw std::invalid_argument("rollout needs at least one control step");
  if (x0.size() != sys.n()) throw std::invalid_argument("x0 dimension mismatch");
  if (controls.cols() != sys.m()) throw std::invalid_argument("control dimension mismatch");

  Trajectory out;
  out.controls = controls;
  out.trace.dt = sys.dt;
  out.trace.var_names = sys.var_names;
  out.trace.states.resize(N + 1, sys.n());
  out.trace.states.row(0) = x0.transpose();
  for (int k = 0; k < N; ++k) {
    out.trace.states.row(k + 1) =
        (sys.A * out.trace.states.row(k).transpose() + sys.B * controls.row(k).transpose()).transpose();
  }
  return out;
}

CondensedMap condensed_map(const LinearSystem& sys, const Eigen::VectorXd& x0, int num_steps) {
  if (num_steps < 1) throw std::invalid_argument("condensed_map needs N_T >= 1");
  if (x0.size() != sys.n()) throw std::invalid_argument("x0 dimension mismatch");
  const int n = sys.n();
  const int m = sys.m();
  CondensedMap out;
  out.gamma = Eigen::MatrixXd::Zero(num_steps * n, num_steps * m);
  out.d.resize(num_steps * n);

  // A^i B fills the i-th block subdiagonal.
  Eigen::MatrixXd AiB = sys.B;
  Eigen::VectorXd Aix = x0;
  for (int i = 0; i < num_steps; ++i) {
    Aix = sys.A * Aix;
    out.d.segment(i * n, n) = Aix;
    for (int row = i; row < num_steps; ++row) {
      out.gamma.block(row * n, (row - i) * m, n, m) = AiB;
    }
    AiB = sys.A * AiB;
  }
  return out;
}

StepMatrix lqr_tracking_controls(const LinearSystem& sys, const Eigen::VectorXd& x0, int num_steps,
                                 const Eigen::VectorXd& x_ref, const Eigen::MatrixXd& Q,
                                 const Eigen::MatrixXd& R) {
  const int n = sys.n();
  const int m = sys.m();
  if (x_ref.size() != n || Q.rows() != n || Q.cols() != n || R.rows() != m || R.cols() != m) {
    throw std::invalid_argument("lqr_tracking_controls: dimension mismatch");
  }
  const CondensedMap cm = condensed_map(sys, x0, num_steps);
  Eigen::MatrixXd Qbar = Eigen::MatrixXd::Zero(num_steps * n, num_steps * n);
  Eigen::MatrixXd Rbar = Eigen::MatrixXd::Zero(num_steps * m, num_steps * m);
  Eigen::VectorXd ref(num_steps * n);
  for (int k = 0; k < num_steps; ++k) {
    Qbar.block(k * n, k * n, n, n) = Q;
    Rbar.block(k * m, k * m, m, m) = R;
    ref.segment(k * n, n) = x_ref;
  }
  const Eigen::MatrixXd H = cm.gamma.transpose() * Qbar * cm.gamma + Rbar;
  const Eigen::VectorXd rhs = cm.gamma.transpose() * Qbar * (ref - cm.d);
  const Eigen::VectorXd u = H.ldlt().solve(rhs);
  return unflatten(u, m);
}

}  // namespace stlmtl
