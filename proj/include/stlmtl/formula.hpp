#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace stlmtl {

/// Quadratic predicate h(x) = x'Px + q'x + r, satisfied iff h(x) >= 0.
///
/// P is symmetrized on construction so that every predicate has a unique
/// coefficient representation.
class Predicate {
 public:
  Predicate(Eigen::MatrixXd P, Eigen::VectorXd q, double r, std::string display_name = {});

  /// Affine predicate q'x + r.
  static Predicate affine(Eigen::VectorXd q, double r, std::string display_name = {});

  int dim() const { return static_cast<int>(q_.size()); }
  const Eigen::MatrixXd& P() const { return P_; }
  const Eigen::VectorXd& q() const { return q_; }
  double r() const { return r_; }
  const std::string& display_name() const { return name_; }
  bool is_affine() const { return affine_; }

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const;

  /// Structural equality; display names are ignored.
  bool operator==(const Predicate& other) const;

 private:
  Eigen::MatrixXd P_;
  Eigen::VectorXd q_;
  double r_;
  std::string name_;
  bool affine_;
};

struct TimeInterval {
  double a = 0.0;
  double b = 0.0;

  TimeInterval() = default;
  TimeInterval(double lo, double hi);

  bool operator==(const TimeInterval&) const = default;
};

/// Inclusive range of trace indices.
struct StepRange {
  int first = 0;
  int last = 0;

  int size() const { return last - first + 1; }
  bool operator==(const StepRange&) const = default;
};

class WindowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Maps [a, b] seconds onto trace indices [round(a/dt), round(b/dt)] clamped
/// to [0, num_steps]. Rounding is half away from zero.
StepRange time_to_steps(const TimeInterval& iv, double dt, int num_steps);

enum class FormulaKind { True, Pred, Not, And, Or, Until, Eventually, Always, Implies };

const char* to_string(FormulaKind kind);

/// Immutable STL syntax tree. Copies share structure.
class Formula {
 public:
  static Formula truth();
  static Formula pred(Predicate p);
  static Formula negate(Formula f);
  /// A single operand is returned unchanged, so And/Or nodes have >= 2 children.
  static Formula conj(std::vector<Formula> args);
  static Formula disj(std::vector<Formula> args);
  static Formula until(TimeInterval iv, Formula lhs, Formula rhs);
  static Formula eventually(TimeInterval iv, Formula f);
  static Formula always(TimeInterval iv, Formula f);
  static Formula implies(Formula lhs, Formula rhs);

  FormulaKind kind() const { return node_->kind; }
  /// Only valid for Pred.
  const Predicate& predicate() const;
  /// Only valid for Until, Eventually and Always.
  const TimeInterval& interval() const;
  std::span<const Formula> children() const { return node_->children; }
  const Formula& child(std::size_t i) const { return node_->children.at(i); }

  /// Identity of the underlying node; equal for copies of the same formula.
  const void* id() const { return node_.get(); }

  /// Structural equality with exact numeric comparison.
  bool operator==(const Formula& other) const;

 private:
  struct Node {
    FormulaKind kind = FormulaKind::True;
    std::vector<Formula> children;
    std::unique_ptr<Predicate> pred;
    TimeInterval iv;
  };

  explicit Formula(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  static Formula make(FormulaKind kind, std::vector<Formula> children, TimeInterval iv = {});

  std::shared_ptr<const Node> node_;
};

/// Largest accumulated interval upper bound over all nesting paths, in seconds.
double formula_horizon(const Formula& f);

/// Operator nesting depth counting every node that reduces with min/max.
int lse_depth(const Formula& f);

/// Structural equality up to a relative tolerance on every numeric literal.
bool approx_equal(const Formula& a, const Formula& b, double rel_tol = 1e-12);

}  // namespace stlmtl
