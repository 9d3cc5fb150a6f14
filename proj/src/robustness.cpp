#include "stlmtl/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace stlmtl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double smooth_max(std::span<const double> args, double K, std::span<double> weights) {
  const std::size_t m = args.size();
  if (m == 0) throw std::invalid_argument("smooth_max of an empty set");
  if (!(K > 0.0)) throw std::invalid_argument("smooth_max: K must be positive");
  if (m == 1) {
    if (!weights.empty()) weights[0] = 1.0;
    return args[0];
  }
  const double top = *std::max_element(args.begin(), args.end());
  if (!std::isfinite(top)) {
    // All arguments -inf, or at least one +inf: the extremum dominates.
    std::size_t hits = 0;
    for (double a : args) hits += (a == top);
    if (!weights.empty()) {
      for (std::size_t i = 0; i < m; ++i) weights[i] = args[i] == top ? 1.0 / static_cast<double>(hits) : 0.0;
    }
    return top;
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double e = std::exp(K * (args[i] - top));
    if (!weights.empty()) weights[i] = e;
    sum += e;
  }
  if (!weights.empty()) {
    for (std::size_t i = 0; i < m; ++i) weights[i] /= sum;
  }
  return top + std::log(sum) / K;
}

double smooth_min(std::span<const double> args, double K, std::span<double> weights) {
  std::vector<double> neg(args.size());
  std::transform(args.begin(), args.end(), neg.begin(), [](double a) { return -a; });
  return -smooth_max(neg, K, weights);
}

// ---------------------------------------------------------------------------
// Boolean semantics, evaluated directly on the syntax tree.

namespace {

StepRange shifted_window(const TimeInterval& iv, double dt, int num_steps, int k) {
  if (k > num_steps) throw HorizonError("evaluation step beyond the end of the trace");
  try {
    StepRange r = time_to_steps(iv, dt, num_steps - k);
    return {r.first + k, r.last + k};
  } catch (const WindowError& e) {
    throw HorizonError(e.what());
  }
}

void check_horizon(const Formula& f, double dt, int num_steps, int k) {
  if (!(dt > 0.0)) throw std::invalid_argument("trace dt must be positive");
  if (num_steps < 0) throw std::invalid_argument("trace is empty");
  if (k < 0 || k > num_steps) throw HorizonError("evaluation step outside the trace");
  const double need = formula_horizon(f) + k * dt;
  if (need > num_steps * dt + 1e-9 * dt) {
    throw HorizonError("formula horizon " + std::to_string(need) + " s exceeds trace length " +
                       std::to_string(num_steps * dt) + " s");
  }
}

bool sat(const Formula& f, const Trace& tr, int k) {
  switch (f.kind()) {
    case FormulaKind::True: return true;
    case FormulaKind::Pred: return f.predicate()(tr.states.row(k).transpose()) >= 0.0;
    case FormulaKind::Not: return !sat(f.child(0), tr, k);
    case FormulaKind::And:
      return std::all_of(f.children().begin(), f.children().end(), [&](const Formula& c) { return sat(c, tr, k); });
    case FormulaKind::Or:
      return std::any_of(f.children().begin(), f.children().end(), [&](const Formula& c) { return sat(c, tr, k); });
    case FormulaKind::Implies: return !sat(f.child(0), tr, k) || sat(f.child(1), tr, k);
    case FormulaKind::Eventually:
    case FormulaKind::Always: {
      const auto w = shifted_window(f.interval(), tr.dt, tr.num_steps(), k);
      const bool want = f.kind() == FormulaKind::Always;
      for (int j = w.first; j <= w.last; ++j) {
        if (sat(f.child(0), tr, j) != want) return !want;
      }
      return want;
    }
    case FormulaKind::Until: {
      const auto w = shifted_window(f.interval(), tr.dt, tr.num_steps(), k);
      for (int k1 = w.first; k1 <= w.last; ++k1) {
        if (!sat(f.child(1), tr, k1)) continue;
        bool hold = true;
        for (int k2 = k; k2 <= k1 && hold; ++k2) hold = sat(f.child(0), tr, k2);
        if (hold) return true;
      }
      return false;
    }
  }
  return false;
}

}  // namespace

bool boolean_sat(const Formula& f, const Trace& tr, int k) {
  check_horizon(f, tr.dt, tr.num_steps(), k);
  return sat(f, tr, k);
}

double eval_exact(const Formula& f, const Trace& tr, int k) {
  return RobustnessProgram(f, tr.dt, tr.num_steps(), k).exact(tr.states);
}

double eval_smooth(const Formula& f, const Trace& tr, const SmoothConfig& cfg, int k) {
  return RobustnessProgram(f, tr.dt, tr.num_steps(), k).smooth(tr.states, cfg.K);
}

SmoothGradient grad_smooth(const Formula& f, const Trace& tr, const SmoothConfig& cfg, int k) {
  SmoothGradient out;
  out.value = RobustnessProgram(f, tr.dt, tr.num_steps(), k).smooth_gradient(tr.states, cfg.K, out.gradient);
  return out;
}

// ---------------------------------------------------------------------------
// Compiled program.

RobustnessProgram::RobustnessProgram(const Formula& f, double dt, int num_steps, int k)
    : formula_(f), dt_(dt), num_steps_(num_steps) {
  check_horizon(f, dt, num_steps, k);
  root_ = compile(formula_, k);
  memo_.clear();
}

int RobustnessProgram::push(Op op) {
  ops_.push_back(std::move(op));
  return static_cast<int>(ops_.size()) - 1;
}

StepRange RobustnessProgram::window(const TimeInterval& iv, int k) const {
  return shifted_window(iv, dt_, num_steps_, k);
}

int RobustnessProgram::compile(const Formula& f, int k) {
  const auto key = std::make_pair(f.id(), k);
  if (auto it = memo_.find(key); it != memo_.end()) return it->second;

  Op op;
  switch (f.kind()) {
    case FormulaKind::True: op.kind = OpKind::PosInf; break;
    case FormulaKind::Pred:
      op.kind = OpKind::Leaf;
      op.pred = &f.predicate();
      op.step = k;
      break;
    case FormulaKind::Not:
      op.kind = OpKind::Neg;
      op.args = {compile(f.child(0), k)};
      break;
    case FormulaKind::And:
    case FormulaKind::Or:
      op.kind = f.kind() == FormulaKind::And ? OpKind::Min : OpKind::Max;
      for (const auto& c : f.children()) op.args.push_back(compile(c, k));
      break;
    case FormulaKind::Implies: {
      Op neg{OpKind::Neg, nullptr, 0, {compile(f.child(0), k)}};
      const int lhs = push(std::move(neg));
      op.kind = OpKind::Max;
      op.args = {lhs, compile(f.child(1), k)};
      break;
    }
    case FormulaKind::Eventually:
    case FormulaKind::Always: {
      op.kind = f.kind() == FormulaKind::Always ? OpKind::Min : OpKind::Max;
      const auto w = window(f.interval(), k);
      for (int j = w.first; j <= w.last; ++j) op.args.push_back(compile(f.child(0), j));
      break;
    }
    case FormulaKind::Until: {
      // max over k1 in window of min(rho2(k1), rho1(k), ..., rho1(k1)).
      op.kind = OpKind::Max;
      const auto w = window(f.interval(), k);
      for (int k1 = w.first; k1 <= w.last; ++k1) {
        Op group{OpKind::Min, nullptr, 0, {compile(f.child(1), k1)}};
        for (int k2 = k; k2 <= k1; ++k2) group.args.push_back(compile(f.child(0), k2));
        op.args.push_back(push(std::move(group)));
      }
      break;
    }
  }
  const int idx = push(std::move(op));
  memo_.emplace(key, idx);
  return idx;
}

void RobustnessProgram::forward(const StepMatrix& x, double K, bool smooth, std::vector<double>& values,
                                std::vector<std::vector<double>>* weights,
                                const std::function<void(const NodeEvent&)>* observer) const {
  if (x.rows() != num_steps_ + 1) throw std::invalid_argument("trace length does not match the program");
  values.assign(ops_.size(), 0.0);
  if (weights) weights->assign(ops_.size(), {});
  std::vector<double> args;
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const Op& op = ops_[i];
    switch (op.kind) {
      case OpKind::PosInf: values[i] = kInf; break;
      case OpKind::Leaf: values[i] = (*op.pred)(x.row(op.step).transpose()); break;
      case OpKind::Neg: values[i] = -values[op.args[0]]; break;
      case OpKind::Max:
      case OpKind::Min: {
        args.resize(op.args.size());
        for (std::size_t a = 0; a < op.args.size(); ++a) args[a] = values[op.args[a]];
        const bool is_max = op.kind == OpKind::Max;
        if (!smooth) {
          values[i] = is_max ? *std::max_element(args.begin(), args.end()) : *std::min_element(args.begin(), args.end());
          break;
        }
        std::span<double> w;
        if (weights) {
          (*weights)[i].resize(args.size());
          w = (*weights)[i];
        }
        values[i] = is_max ? smooth_max(args, K, w) : smooth_min(args, K, w);
        if (observer) (*observer)(NodeEvent{is_max, args, values[i]});
        break;
      }
    }
  }
}

double RobustnessProgram::exact(const StepMatrix& x) const {
  std::vector<double> values;
  forward(x, 1.0, false, values, nullptr);
  return values[root_];
}

double RobustnessProgram::smooth(const StepMatrix& x, double K) const {
  std::vector<double> values;
  forward(x, K, true, values, nullptr);
  return values[root_];
}

double RobustnessProgram::smooth_observed(const StepMatrix& x, double K,
                                          const std::function<void(const NodeEvent&)>& observer) const {
  std::vector<double> values;
  forward(x, K, true, values, nullptr, &observer);
  return values[root_];
}

double RobustnessProgram::smooth_gradient(const StepMatrix& x, double K, StepMatrix& grad) const {
  std::vector<double> values;
  std::vector<std::vector<double>> weights;
  forward(x, K, true, values, &weights);

  grad.setZero(x.rows(), x.cols());
  std::vector<double> adj(ops_.size(), 0.0);
  adj[root_] = 1.0;
  for (int i = root_; i >= 0; --i) {
    const Op& op = ops_[i];
    const double a = adj[i];
    if (a == 0.0) continue;
    switch (op.kind) {
      case OpKind::PosInf: break;
      case OpKind::Leaf: grad.row(op.step) += a * op.pred->gradient(x.row(op.step).transpose()).transpose(); break;
      case OpKind::Neg: adj[op.args[0]] -= a; break;
      case OpKind::Max:
      case OpKind::Min:
        for (std::size_t j = 0; j < op.args.size(); ++j) adj[op.args[j]] += a * weights[i][j];
        break;
    }
  }
  return values[root_];
}

void RobustnessProgram::concave_curvature(
    const StepMatrix& x, double K, const std::function<void(double, const Eigen::VectorXd&)>& sink) const {
  std::vector<double> values;
  std::vector<std::vector<double>> weights;
  forward(x, K, true, values, &weights);

  const Eigen::Index n = x.cols();
  const Eigen::Index flat = x.size();

  // Forward-mode gradients of every op.
  std::vector<Eigen::VectorXd> grads(ops_.size());
  for (std::size_t i = 0; i < ops_.size(); ++i) {
    const Op& op = ops_[i];
    Eigen::VectorXd g = Eigen::VectorXd::Zero(flat);
    switch (op.kind) {
      case OpKind::PosInf: break;
      case OpKind::Leaf: g.segment(op.step * n, n) = op.pred->gradient(x.row(op.step).transpose()); break;
      case OpKind::Neg: g = -grads[op.args[0]]; break;
      case OpKind::Max:
      case OpKind::Min:
        for (std::size_t j = 0; j < op.args.size(); ++j) {
          if (weights[i][j] != 0.0) g += weights[i][j] * grads[op.args[j]];
        }
        break;
    }
    grads[i] = std::move(g);
  }

  std::vector<double> adj(ops_.size(), 0.0);
  adj[root_] = 1.0;
  for (int i = root_; i >= 0; --i) {
    const Op& op = ops_[i];
    const double a = adj[i];
    if (a == 0.0) continue;
    switch (op.kind) {
      case OpKind::PosInf: break;
      case OpKind::Leaf: {
        if (op.pred->is_affine()) break;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(op.pred->P());
        for (Eigen::Index j = 0; j < eig.eigenvalues().size(); ++j) {
          const double coef = 2.0 * a * eig.eigenvalues()[j];
          if (!(coef < 0.0)) continue;
          Eigen::VectorXd v = Eigen::VectorXd::Zero(flat);
          v.segment(op.step * n, n) = eig.eigenvectors().col(j);
          sink(coef, v);
        }
        break;
      }
      case OpKind::Neg: adj[op.args[0]] -= a; break;
      case OpKind::Max:
      case OpKind::Min: {
        // Hessian of an LSE node in its arguments is +-K (diag(w) - w w').
        const double sign = op.kind == OpKind::Max ? 1.0 : -1.0;
        for (std::size_t j = 0; j < op.args.size(); ++j) {
          const double w = weights[i][j];
          adj[op.args[j]] += a * w;
          const double coef = sign * a * K * w;
          if (op.args.size() < 2 || !(coef < 0.0)) continue;
          Eigen::VectorXd v = grads[op.args[j]] - grads[i];
          if (!v.isZero(0.0)) sink(coef, v);
        }
        break;
      }
    }
  }
}

}  // namespace stlmtl
