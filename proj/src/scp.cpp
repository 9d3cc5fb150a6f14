#include "stlmtl/scp.hpp"

#include <cmath>
#include <stdexcept>

#include <spdlog/spdlog.h>

namespace stlmtl {

const char* to_string(Linearization l) {
  return l == Linearization::FirstOrder ? "first_order" : "gauss_newton";
}

Linearization linearization_from_string(const std::string& s) {
  if (s == "first_order") return Linearization::FirstOrder;
  if (s == "gauss_newton") return Linearization::GaussNewton;
  throw std::invalid_argument("unknown linearization '" + s + "'");
}

const char* to_string(ScpStatus s) {
  switch (s) {
    case ScpStatus::Converged: return "converged";
    case ScpStatus::MaxIterations: return "max_iterations";
    case ScpStatus::Stalled: return "stalled";
    case ScpStatus::SubproblemFailed: return "subproblem_failed";
  }
  return "?";
}

namespace {

bool is_psd(const Eigen::MatrixXd& M) {
  if (!M.isApprox(M.transpose(), 1e-12)) return false;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
}

}  // namespace

void ScpConfig::resolve(int n, int m) {
  if (Q.size() == 0) Q = Eigen::MatrixXd::Identity(n, n);
  if (R.size() == 0) R = Eigen::MatrixXd::Identity(m, m);
  validate(n, m);
}

void ScpConfig::validate(int n, int m) const {
  auto bad = [](const std::string& what) { throw std::invalid_argument("solver config: " + what); };
  if (max_iterations < 0) bad("max_iterations must be >= 0");
  if (!(K > 0.0)) bad("K must be positive");
  if (!(alpha >= 0.0)) bad("alpha must be >= 0");
  if (Q.rows() != n || Q.cols() != n || !is_psd(Q)) bad("Q must be an n x n PSD matrix");
  if (R.rows() != m || R.cols() != m || !is_psd(R)) bad("R must be an m x m PSD matrix");
  if (!(0.0 < r_min && r_min <= r0 && r0 <= r_max)) bad("need 0 < r_min <= r0 <= r_max");
  if (!(shrink > 0.0 && shrink < 1.0)) bad("shrink must lie in (0, 1)");
  if (!(grow > 1.0)) bad("grow must exceed 1");
  if (!(0.0 < eta_accept && eta_accept < eta_good && eta_good < 1.0)) bad("need 0 < eta_accept < eta_good < 1");
  if (u_lower && u_lower->size() != m) bad("u_lower must have m entries");
  if (u_upper && u_upper->size() != m) bad("u_upper must have m entries");
  if (u_lower && u_upper && (u_lower->array() > u_upper->array()).any()) bad("u_lower exceeds u_upper");
  if (!(tol_kkt > 0.0)) bad("tol_kkt must be positive");
  if (stall_limit < 1) bad("stall_limit must be >= 1");
}

StopRule StopRule::single(const Formula& task) {
  return StopRule{{WeightedFormula{1.0, task}}, {task}};
}

double QuadraticModel::operator()(const Eigen::VectorXd& u) const {
  const Eigen::VectorXd d = u - anchor;
  return value + gradient.dot(d) + 0.5 * d.dot(hessian * d);
}

ScpObjective::ScpObjective(const LinearSystem& sys, const Eigen::VectorXd& x0, int num_steps,
                           std::vector<WeightedFormula> formulas, const ScpConfig& cfg)
    : sys_(sys), x0_(x0), num_steps_(num_steps), cfg_(cfg) {
  sys_.validate();
  cfg_.resolve(sys_.n(), sys_.m());
  if (formulas.empty()) throw std::invalid_argument("objective needs at least one formula");
  for (auto& wf : formulas) {
    weights_.push_back(wf.weight);
    programs_.emplace_back(wf.formula, sys_.dt, num_steps_, 0);
  }
  cmap_ = condensed_map(sys_, x0_, num_steps_);

  const int n = sys_.n();
  const int m = sys_.m();
  Eigen::MatrixXd QG(cmap_.gamma.rows(), cmap_.gamma.cols());
  Eigen::VectorXd Qd(cmap_.d.size());
  for (int k = 0; k < num_steps_; ++k) {
    QG.middleRows(k * n, n) = cfg_.Q * cmap_.gamma.middleRows(k * n, n);
    Qd.segment(k * n, n) = cfg_.Q * cmap_.d.segment(k * n, n);
  }
  lqr_hessian_ = cmap_.gamma.transpose() * QG;
  for (int k = 0; k < num_steps_; ++k) lqr_hessian_.block(k * m, k * m, m, m) += cfg_.R;
  lqr_hessian_ = (cfg_.alpha * (lqr_hessian_ + lqr_hessian_.transpose())).eval();
  lqr_linear_ = (2.0 * cfg_.alpha) * (cmap_.gamma.transpose() * Qd);
}

Trajectory ScpObjective::trajectory(const StepMatrix& u) const { return rollout(sys_, x0_, u); }

double ScpObjective::smooth_robustness(const Trajectory& traj) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < programs_.size(); ++i) acc += weights_[i] * programs_[i].smooth(traj.trace.states, cfg_.K);
  return acc;
}

double ScpObjective::lqr_cost(const Trajectory& traj) const {
  double acc = 0.0;
  const auto& x = traj.trace.states;
  for (int k = 1; k <= num_steps_; ++k) acc += x.row(k) * cfg_.Q * x.row(k).transpose();
  for (int k = 0; k < num_steps_; ++k) acc += traj.controls.row(k) * cfg_.R * traj.controls.row(k).transpose();
  return acc;
}

double ScpObjective::value(const Trajectory& traj) const {
  return smooth_robustness(traj) - cfg_.alpha * lqr_cost(traj);
}

Eigen::VectorXd ScpObjective::gradient(const StepMatrix& u) const {
  const Trajectory traj = trajectory(u);
  const int n = sys_.n();
  Eigen::VectorXd gx = Eigen::VectorXd::Zero(num_steps_ * n);
  StepMatrix g;
  for (std::size_t i = 0; i < programs_.size(); ++i) {
    programs_[i].smooth_gradient(traj.trace.states, cfg_.K, g);
    gx += weights_[i] * flatten(g).tail(num_steps_ * n);
  }
  const Eigen::VectorXd uf = flatten(u);
  return cmap_.gamma.transpose() * gx - lqr_hessian_ * uf - lqr_linear_;
}

QuadraticModel ScpObjective::linearize(const StepMatrix& u_h) const {
  if (u_h.rows() != num_steps_ || u_h.cols() != sys_.m()) throw std::invalid_argument("linearize: control shape mismatch");
  const Trajectory traj = trajectory(u_h);
  QuadraticModel model;
  model.anchor = flatten(u_h);
  model.value = value(traj);
  model.gradient = gradient(u_h);
  model.hessian = -lqr_hessian_;

  if (cfg_.linearization == Linearization::GaussNewton) {
    const int n = sys_.n();
    std::vector<double> coefs;
    std::vector<Eigen::VectorXd> dirs;
    for (std::size_t i = 0; i < programs_.size(); ++i) {
      const double w = weights_[i];
      programs_[i].concave_curvature(traj.trace.states, cfg_.K, [&](double coef, const Eigen::VectorXd& v) {
        const double c = w * coef;
        if (!(c < 0.0)) return;
        coefs.push_back(c);
        dirs.push_back(cmap_.gamma.transpose() * v.tail(num_steps_ * n));
      });
    }
    if (!coefs.empty()) {
      Eigen::MatrixXd W(num_controls(), static_cast<Eigen::Index>(dirs.size()));
      for (std::size_t j = 0; j < dirs.size(); ++j) W.col(static_cast<Eigen::Index>(j)) = dirs[j] * std::sqrt(-coefs[j]);
      model.hessian.noalias() -= W * W.transpose();
    }
  }
  return model;
}

QuadraticModel linearize_objective(const ScpObjective& obj, const StepMatrix& u_h) { return obj.linearize(u_h); }

SubproblemResult solve_subproblem(const QuadraticModel& model, double radius, const ControlBox& bounds, int m,
                                  double tol_kkt) {
  if (!(radius > 0.0)) throw std::invalid_argument("trust radius must be positive");
  const Eigen::Index dim = model.anchor.size();
  BoxQp qp;
  qp.G = -model.hessian;
  qp.c = model.gradient;
  qp.lower = Eigen::VectorXd::Constant(dim, -radius);
  qp.upper = Eigen::VectorXd::Constant(dim, radius);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const Eigen::Index ch = i % m;
    if (bounds.lower) qp.lower[i] = std::max(qp.lower[i], (*bounds.lower)[ch] - model.anchor[i]);
    if (bounds.upper) qp.upper[i] = std::min(qp.upper[i], (*bounds.upper)[ch] - model.anchor[i]);
    if (qp.lower[i] > qp.upper[i]) {
      // Anchor farther than the radius outside the control box: step toward it.
      qp.lower[i] = qp.upper[i] = qp.upper[i] < -radius ? -radius : radius;
    }
  }
  const BoxQpResult res = solve_box_qp(qp, Eigen::VectorXd::Zero(dim), tol_kkt);
  SubproblemResult out;
  out.u = model.anchor + res.x;
  out.kkt_residual = res.kkt_residual;
  out.ok = res.converged;
  return out;
}

ScpResult scp_run(const LinearSystem& sys, const Eigen::VectorXd& x0, const std::vector<WeightedFormula>& objective,
                  const ScpConfig& cfg_in, const StepMatrix& u_init, const StopRule& stop,
                  const IterationObserver& observer) {
  ScpConfig cfg = cfg_in;
  cfg.resolve(sys.n(), sys.m());
  const int N = static_cast<int>(u_init.rows());
  if (N < 1 || u_init.cols() != sys.m()) throw std::invalid_argument("scp_run: u_init must be N_T x m with N_T >= 1");
  if (stop.robustness.empty()) throw std::invalid_argument("scp_run: stop rule needs a robustness term");

  const ScpObjective obj(sys, x0, N, objective, cfg);
  std::vector<RobustnessProgram> stop_programs;
  for (const auto& wf : stop.robustness) stop_programs.emplace_back(wf.formula, sys.dt, N, 0);
  for (const auto& f : stop.must_hold) RobustnessProgram(f, sys.dt, N, 0);  // horizon check only

  const ControlBox box{cfg.u_lower, cfg.u_upper};
  const int m = sys.m();

  ScpResult out;
  StepMatrix u = u_init;
  for (int k = 0; k < N; ++k) {
    if (box.lower) u.row(k) = u.row(k).cwiseMax(box.lower->transpose());
    if (box.upper) u.row(k) = u.row(k).cwiseMin(box.upper->transpose());
  }
  Trajectory traj = obj.trajectory(u);
  double rho_smooth = obj.smooth_robustness(traj);
  double J = rho_smooth - cfg.alpha * obj.lqr_cost(traj);
  double radius = cfg.r0;
  int pinned_rejections = 0;

  auto stop_value = [&](const Trajectory& t) {
    double acc = 0.0;
    for (std::size_t i = 0; i < stop_programs.size(); ++i) acc += stop.robustness[i].weight * stop_programs[i].exact(t.trace.states);
    return acc;
  };
  auto stop_holds = [&](const Trajectory& t, double rho) {
    if (!(rho > 0.0)) return false;
    for (const auto& f : stop.must_hold)
      if (!boolean_sat(f, t.trace)) return false;
    return true;
  };

  out.rho_exact = stop_value(traj);
  for (int h = 1; h <= cfg.max_iterations; ++h) {
    out.iterations = h;
    const double rho = out.rho_exact;
    out.rho_smooth_history.push_back(rho_smooth);
    out.rho_exact_history.push_back(rho);
    out.objective_history.push_back(J);
    out.radius_history.push_back(radius);
    if (observer) observer(h, traj);

    if (stop_holds(traj, rho)) {
      out.converged = true;
      out.status = ScpStatus::Converged;
      break;
    }
    if (h == cfg.max_iterations) break;

    const QuadraticModel model = obj.linearize(u);
    const SubproblemResult sub = solve_subproblem(model, radius, box, m, cfg.tol_kkt);
    if (!sub.ok) {
      out.status = ScpStatus::SubproblemFailed;
      out.message = "subproblem KKT residual " + std::to_string(sub.kkt_residual) + " above tolerance";
      break;
    }
    const double predicted = model(sub.u) - model.value;
    const StepMatrix u_new = unflatten(sub.u, m);
    const Trajectory traj_new = obj.trajectory(u_new);
    const double rho_smooth_new = obj.smooth_robustness(traj_new);
    const double J_new = rho_smooth_new - cfg.alpha * obj.lqr_cost(traj_new);
    const double actual = J_new - J;

    const bool informative = predicted > 1e-14 * (1.0 + std::abs(J));
    const double eta = informative ? actual / predicted : -1.0;
    if (eta < cfg.eta_accept) {
      radius = std::max(radius * cfg.shrink, cfg.r_min);
      pinned_rejections = radius == cfg.r_min ? pinned_rejections + 1 : 0;
      if (pinned_rejections >= cfg.stall_limit) {
        out.status = ScpStatus::Stalled;
        out.message = "trust radius pinned at r_min for " + std::to_string(pinned_rejections) + " rejected steps";
        break;
      }
      continue;
    }
    pinned_rejections = 0;
    ++out.accepted_steps;
    u = u_new;
    traj = traj_new;
    rho_smooth = rho_smooth_new;
    J = J_new;
    out.rho_exact = stop_value(traj);
    if (eta > cfg.eta_good) radius = std::min(radius * cfg.grow, cfg.r_max);
    spdlog::trace("scp pass {}: J={:.6g} rho={:.6g} eta={:.3g} r={:.3g}", h, J, out.rho_exact, eta, radius);
  }
  out.trajectory = std::move(traj);
  return out;
}

}  // namespace stlmtl
