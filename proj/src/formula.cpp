#include "stlmtl/formula.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stlmtl {

Predicate::Predicate(Eigen::MatrixXd P, Eigen::VectorXd q, double r, std::string display_name)
    : P_(std::move(P)), q_(std::move(q)), r_(r), name_(std::move(display_name)) {
  if (P_.rows() != q_.size() || P_.cols() != q_.size()) {
    throw std::invalid_argument("predicate: P must be n x n with n = size(q)");
  }
  P_ = 0.5 * (P_ + P_.transpose()).eval();
  affine_ = P_.isZero(0.0);
}

Predicate Predicate::affine(Eigen::VectorXd q, double r, std::string display_name) {
  const auto n = q.size();
  return Predicate(Eigen::MatrixXd::Zero(n, n), std::move(q), r, std::move(display_name));
}

double Predicate::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  double v = q_.dot(x) + r_;
  if (!affine_) v += x.dot(P_ * x);
  return v;
}

Eigen::VectorXd Predicate::gradient(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  if (affine_) return q_;
  return 2.0 * (P_ * x) + q_;
}

bool Predicate::operator==(const Predicate& other) const {
  return r_ == other.r_ && q_.size() == other.q_.size() && q_ == other.q_ && P_ == other.P_;
}

TimeInterval::TimeInterval(double lo, double hi) : a(lo), b(hi) {
  if (!(lo >= 0.0) || !(lo <= hi) || !std::isfinite(hi)) {
    throw std::invalid_argument("time interval requires 0 <= a <= b < inf");
  }
}

StepRange time_to_steps(const TimeInterval& iv, double dt, int num_steps) {
  if (!(dt > 0.0)) throw std::invalid_argument("time_to_steps: dt must be positive");
  const auto lo = static_cast<long long>(std::round(iv.a / dt));
  const auto hi = static_cast<long long>(std::round(iv.b / dt));
  if (num_steps < 0 || lo > num_steps || hi < 0) {
    throw WindowError("time interval [" + std::to_string(iv.a) + ", " + std::to_string(iv.b) +
                      "] lies outside the available " + std::to_string(num_steps) + " steps");
  }
  StepRange out;
  out.first = static_cast<int>(std::max<long long>(lo, 0));
  out.last = static_cast<int>(std::min<long long>(hi, num_steps));
  return out;
}

const char* to_string(FormulaKind kind) {
  switch (kind) {
    case FormulaKind::True: return "true";
    case FormulaKind::Pred: return "pred";
    case FormulaKind::Not: return "not";
    case FormulaKind::And: return "and";
    case FormulaKind::Or: return "or";
    case FormulaKind::Until: return "until";
    case FormulaKind::Eventually: return "eventually";
    case FormulaKind::Always: return "always";
    case FormulaKind::Implies: return "implies";
  }
  return "?";
}

Formula Formula::make(FormulaKind kind, std::vector<Formula> children, TimeInterval iv) {
  auto node = std::make_shared<Node>();
  node->kind = kind;
  node->children = std::move(children);
  node->iv = iv;
  return Formula(std::move(node));
}

Formula Formula::truth() { return make(FormulaKind::True, {}); }

Formula Formula::pred(Predicate p) {
  auto node = std::make_shared<Node>();
  node->kind = FormulaKind::Pred;
  node->pred = std::make_unique<Predicate>(std::move(p));
  return Formula(std::move(node));
}

Formula Formula::negate(Formula f) { return make(FormulaKind::Not, {std::move(f)}); }

Formula Formula::conj(std::vector<Formula> args) {
  if (args.empty()) throw std::invalid_argument("conjunction needs at least one operand");
  if (args.size() == 1) return std::move(args.front());
  return make(FormulaKind::And, std::move(args));
}

Formula Formula::disj(std::vector<Formula> args) {
  if (args.empty()) throw std::invalid_argument("disjunction needs at least one operand");
  if (args.size() == 1) return std::move(args.front());
  return make(FormulaKind::Or, std::move(args));
}

Formula Formula::until(TimeInterval iv, Formula lhs, Formula rhs) {
  return make(FormulaKind::Until, {std::move(lhs), std::move(rhs)}, iv);
}

Formula Formula::eventually(TimeInterval iv, Formula f) {
  return make(FormulaKind::Eventually, {std::move(f)}, iv);
}

Formula Formula::always(TimeInterval iv, Formula f) {
  return make(FormulaKind::Always, {std::move(f)}, iv);
}

Formula Formula::implies(Formula lhs, Formula rhs) {
  return make(FormulaKind::Implies, {std::move(lhs), std::move(rhs)});
}

const Predicate& Formula::predicate() const {
  if (!node_->pred) throw std::logic_error("formula node is not a predicate");
  return *node_->pred;
}

const TimeInterval& Formula::interval() const {
  switch (kind()) {
    case FormulaKind::Until:
    case FormulaKind::Eventually:
    case FormulaKind::Always: return node_->iv;
    default: throw std::logic_error("formula node has no time interval");
  }
}

namespace {

bool has_interval(FormulaKind k) {
  return k == FormulaKind::Until || k == FormulaKind::Eventually || k == FormulaKind::Always;
}

bool close(double a, double b, double rel) {
  if (a == b) return true;
  return std::abs(a - b) <= rel * std::max({std::abs(a), std::abs(b), 1e-300});
}

template <typename Derived>
bool close(const Eigen::MatrixBase<Derived>& a, const Eigen::MatrixBase<Derived>& b, double rel) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      if (!close(a(i, j), b(i, j), rel)) return false;
  return true;
}

template <typename LeafEq, typename NumEq>
bool structural_equal(const Formula& a, const Formula& b, const LeafEq& leaf_eq, const NumEq& num_eq) {
  if (a.id() == b.id()) return true;
  if (a.kind() != b.kind()) return false;
  if (a.kind() == FormulaKind::Pred) return leaf_eq(a.predicate(), b.predicate());
  if (has_interval(a.kind())) {
    if (!num_eq(a.interval().a, b.interval().a) || !num_eq(a.interval().b, b.interval().b)) return false;
  }
  if (a.children().size() != b.children().size()) return false;
  for (std::size_t i = 0; i < a.children().size(); ++i) {
    if (!structural_equal(a.child(i), b.child(i), leaf_eq, num_eq)) return false;
  }
  return true;
}

}  // namespace

bool Formula::operator==(const Formula& other) const {
  return structural_equal(
      *this, other, [](const Predicate& p, const Predicate& q) { return p == q; },
      [](double x, double y) { return x == y; });
}

bool approx_equal(const Formula& a, const Formula& b, double rel_tol) {
  return structural_equal(
      a, b,
      [rel_tol](const Predicate& p, const Predicate& q) {
        return p.dim() == q.dim() && close(p.r(), q.r(), rel_tol) && close(p.q(), q.q(), rel_tol) &&
               close(p.P(), q.P(), rel_tol);
      },
      [rel_tol](double x, double y) { return close(x, y, rel_tol); });
}

double formula_horizon(const Formula& f) {
  double deepest = 0.0;
  for (const auto& c : f.children()) deepest = std::max(deepest, formula_horizon(c));
  if (has_interval(f.kind())) deepest += f.interval().b;
  return deepest;
}

int lse_depth(const Formula& f) {
  int deepest = 0;
  for (const auto& c : f.children()) deepest = std::max(deepest, lse_depth(c));
  switch (f.kind()) {
    case FormulaKind::And:
    case FormulaKind::Or:
    case FormulaKind::Eventually:
    case FormulaKind::Always:
    case FormulaKind::Implies: return deepest + 1;
    case FormulaKind::Until: return deepest + 2;
    default: return deepest;
  }
}

}  // namespace stlmtl
