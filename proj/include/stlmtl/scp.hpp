#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stlmtl/box_qp.hpp"
#include "stlmtl/dynamics.hpp"
#include "stlmtl/formula.hpp"
#include "stlmtl/robustness.hpp"

namespace stlmtl {

enum class Linearization { FirstOrder, GaussNewton };

const char* to_string(Linearization l);
Linearization linearization_from_string(const std::string& s);

/// Knobs of the trust-region SCP loop. Empty Q / R mean identity.
struct ScpConfig {
  int max_iterations = 100;  // N_h
  double K = 10.0;
  double alpha = 1e-3;
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  double r0 = 1.0;
  double r_min = 1e-4;
  double r_max = 100.0;
  double shrink = 0.5;
  double grow = 2.0;
  double eta_accept = 0.1;
  double eta_good = 0.7;
  std::optional<Eigen::VectorXd> u_lower;
  std::optional<Eigen::VectorXd> u_upper;
  Linearization linearization = Linearization::FirstOrder;
  double tol_kkt = 1e-9;
  int stall_limit = 50;

  /// Fills empty Q/R with identities of the given sizes and checks every invariant.
  void resolve(int n, int m);
  void validate(int n, int m) const;
};

struct WeightedFormula {
  double weight = 1.0;
  Formula formula;
};

/// Converged when sum_i w_i * rho_exact(f_i) > 0 and every `must_hold`
/// formula is boolean-satisfied on the current rollout.
struct StopRule {
  std::vector<WeightedFormula> robustness;
  std::vector<Formula> must_hold;

  static StopRule single(const Formula& task);
};

/// Concave quadratic model m(u) = value + g'(u - anchor) + 0.5 (u - anchor)' H (u - anchor)
/// over the flattened control vector.
struct QuadraticModel {
  Eigen::VectorXd anchor;
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;  // NSD

  double operator()(const Eigen::VectorXd& u) const;
};

/// sum_i w_i * smooth_rho_i(x(u)) - alpha * (sum_{k=1}^{N_T} x_k'Qx_k + sum_{k=0}^{N_T-1} u_k'Ru_k)
class ScpObjective {
 public:
  ScpObjective(const LinearSystem& sys, const Eigen::VectorXd& x0, int num_steps,
               std::vector<WeightedFormula> formulas, const ScpConfig& cfg);

  int num_steps() const { return num_steps_; }
  int num_controls() const { return num_steps_ * sys_.m(); }
  const LinearSystem& system() const { return sys_; }
  const CondensedMap& condensed() const { return cmap_; }

  Trajectory trajectory(const StepMatrix& u) const;
  double smooth_robustness(const Trajectory& traj) const;
  double lqr_cost(const Trajectory& traj) const;
  double value(const Trajectory& traj) const;
  double value(const StepMatrix& u) const { return value(trajectory(u)); }

  /// Gradient of the full objective with respect to the flattened controls.
  Eigen::VectorXd gradient(const StepMatrix& u) const;

  QuadraticModel linearize(const StepMatrix& u_h) const;

 private:
  LinearSystem sys_;
  Eigen::VectorXd x0_;
  int num_steps_;
  std::vector<double> weights_;
  std::vector<RobustnessProgram> programs_;
  ScpConfig cfg_;
  CondensedMap cmap_;
  Eigen::MatrixXd lqr_hessian_;  // 2 alpha (G'QG + R)
  Eigen::VectorXd lqr_linear_;   // 2 alpha G'Q d
};

QuadraticModel linearize_objective(const ScpObjective& obj, const StepMatrix& u_h);

struct ControlBox {
  std::optional<Eigen::VectorXd> lower;  // per input channel, repeated over steps
  std::optional<Eigen::VectorXd> upper;
};

struct SubproblemResult {
  Eigen::VectorXd u;
  double kkt_residual = 0.0;
  bool ok = false;
};

/// Maximizes the model over {||u - anchor||_inf <= radius} intersected with the control box.
SubproblemResult solve_subproblem(const QuadraticModel& model, double radius, const ControlBox& bounds, int m,
                                  double tol_kkt);

enum class ScpStatus { Converged, MaxIterations, Stalled, SubproblemFailed };

const char* to_string(ScpStatus s);

struct ScpResult {
  Trajectory trajectory;
  double rho_exact = 0.0;
  std::vector<double> rho_smooth_history;
  std::vector<double> rho_exact_history;
  std::vector<double> objective_history;
  std::vector<double> radius_history;
  int iterations = 0;
  int accepted_steps = 0;
  bool converged = false;
  ScpStatus status = ScpStatus::MaxIterations;
  std::string message;
};

/// Called once per loop pass with the pass index (1-based) and the current iterate.
using IterationObserver = std::function<void(int, const Trajectory&)>;

/// Trust-region sequential convex programming. Each pass checks the stop rule
/// on the current rollout, then linearizes, solves the subproblem and applies
/// the ratio test. `iterations` is the pass at which the stop rule held.
ScpResult scp_run(const LinearSystem& sys, const Eigen::VectorXd& x0, const std::vector<WeightedFormula>& objective,
                  const ScpConfig& cfg, const StepMatrix& u_init, const StopRule& stop,
                  const IterationObserver& observer = {});

}  // namespace stlmtl
