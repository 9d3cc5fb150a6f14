#pragma once

#include <functional>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stlmtl/formula.hpp"
#include "stlmtl/types.hpp"

namespace stlmtl {

/// Sampled signal x_0 .. x_{N_T}.
struct Trace {
  StepMatrix states;  // (N_T + 1) x n
  double dt = 1.0;
  std::vector<std::string> var_names;

  int num_steps() const { return static_cast<int>(states.rows()) - 1; }
  int dim() const { return static_cast<int>(states.cols()); }
};

struct SmoothConfig {
  double K = 10.0;
};

/// The formula does not fit in the trace when evaluated at the requested step.
class HorizonError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Log-sum-exp reductions. Both subtract the extremum before exponentiating.
// When `weights` is nonempty it receives d(result)/d(args[i]).
double smooth_max(std::span<const double> args, double K, std::span<double> weights = {});
double smooth_min(std::span<const double> args, double K, std::span<double> weights = {});

bool boolean_sat(const Formula& f, const Trace& tr, int k = 0);
double eval_exact(const Formula& f, const Trace& tr, int k = 0);
double eval_smooth(const Formula& f, const Trace& tr, const SmoothConfig& cfg, int k = 0);

struct SmoothGradient {
  double value = 0.0;
  StepMatrix gradient;  // same shape as Trace::states
};

SmoothGradient grad_smooth(const Formula& f, const Trace& tr, const SmoothConfig& cfg, int k = 0);

/// A formula unrolled over a fixed trace length into a DAG of min/max/negate
/// operations on predicate leaves. Subformulas evaluated at the same step are
/// shared. Building it once and evaluating many traces is the fast path used by
/// the solver.
class RobustnessProgram {
 public:
  RobustnessProgram(const Formula& f, double dt, int num_steps, int k = 0);

  double exact(const StepMatrix& x) const;
  double smooth(const StepMatrix& x, double K) const;
  /// Writes d(smooth)/dx into `grad` (resized to the shape of x) and returns the value.
  double smooth_gradient(const StepMatrix& x, double K, StepMatrix& grad) const;

  /// Enumerates the negative-curvature part of the Hessian of `smooth` as
  /// rank-one terms coef * v v' with coef < 0, v flattened like `x`.
  /// Positive-curvature contributions are dropped, so the sum is NSD.
  void concave_curvature(const StepMatrix& x, double K,
                         const std::function<void(double coef, const Eigen::VectorXd& v)>& sink) const;

  /// Observer called for each min/max node during a smooth evaluation.
  struct NodeEvent {
    bool is_max;
    std::span<const double> args;
    double value;
  };
  double smooth_observed(const StepMatrix& x, double K, const std::function<void(const NodeEvent&)>& observer) const;

  int num_ops() const { return static_cast<int>(ops_.size()); }
  int num_steps() const { return num_steps_; }

 private:
  enum class OpKind { Leaf, Neg, Max, Min, PosInf };
  struct Op {
    OpKind kind = OpKind::PosInf;
    const Predicate* pred = nullptr;
    int step = 0;
    std::vector<int> args;
  };

  int compile(const Formula& f, int k);
  int push(Op op);
  StepRange window(const TimeInterval& iv, int k) const;

  // Forward pass. `weights[i]` holds per-argument LSE weights (empty in exact mode).
  void forward(const StepMatrix& x, double K, bool smooth, std::vector<double>& values,
               std::vector<std::vector<double>>* weights,
               const std::function<void(const NodeEvent&)>* observer = nullptr) const;

  Formula formula_;
  double dt_;
  int num_steps_;
  std::vector<Op> ops_;
  std::map<std::pair<const void*, int>, int> memo_;
  int root_ = -1;
};

}  // namespace stlmtl
