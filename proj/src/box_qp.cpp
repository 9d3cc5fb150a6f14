#include "stlmtl/box_qp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace stlmtl {

namespace {

Eigen::VectorXd clamp(const Eigen::VectorXd& x, const BoxQp& qp) {
  return x.cwiseMax(qp.lower).cwiseMin(qp.upper);
}

double scale_of(const BoxQp& qp) { return 1.0 + (qp.c.size() ? qp.c.lpNorm<Eigen::Infinity>() : 0.0); }

}  // namespace

double kkt_residual(const BoxQp& qp, const Eigen::VectorXd& x) {
  const Eigen::VectorXd g = qp.G * x - qp.c;
  const Eigen::VectorXd step = x - clamp(x - g, qp);
  return (step.size() ? step.lpNorm<Eigen::Infinity>() : 0.0) / scale_of(qp);
}

namespace {

// Newton step restricted to the free coordinates, with a diagonal shift so a
// singular free block still yields a descent direction.
bool newton_on_face(const BoxQp& qp, const std::vector<Eigen::Index>& idx, const Eigen::VectorXd& g, double shift0,
                    Eigen::VectorXd& d) {
  const auto nf = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd Gff(nf, nf);
  Eigen::VectorXd gf(nf);
  for (Eigen::Index a = 0; a < nf; ++a) {
    gf[a] = g[idx[a]];
    for (Eigen::Index b = 0; b < nf; ++b) Gff(a, b) = qp.G(idx[a], idx[b]);
  }
  double shift = shift0;
  Eigen::LLT<Eigen::MatrixXd> llt;
  for (int attempt = 0; attempt < 10; ++attempt) {
    llt.compute(Gff + shift * Eigen::MatrixXd::Identity(nf, nf));
    if (llt.info() == Eigen::Success) break;
    shift *= 100.0;
  }
  if (llt.info() != Eigen::Success) return false;
  d = -llt.solve(gf);
  return d.allFinite();
}

}  // namespace

BoxQpResult solve_box_qp(const BoxQp& qp, const Eigen::VectorXd& start, double tol, int max_iterations) {
  const Eigen::Index n = qp.c.size();
  if (qp.G.rows() != n || qp.G.cols() != n || qp.lower.size() != n || qp.upper.size() != n || start.size() != n) {
    throw std::invalid_argument("solve_box_qp: dimension mismatch");
  }
  if ((qp.lower.array() > qp.upper.array()).any()) throw std::invalid_argument("solve_box_qp: empty box");

  BoxQpResult out;
  out.x = clamp(start, qp);
  if (n == 0) {
    out.converged = true;
    return out;
  }

  const double shift = 1e-13 * std::max(1.0, qp.G.diagonal().cwiseAbs().maxCoeff());
  const double width = (qp.upper - qp.lower).maxCoeff();
  std::vector<Eigen::Index> free_idx;
  free_idx.reserve(n);

  for (int it = 0; it < max_iterations; ++it) {
    out.iterations = it + 1;
    Eigen::VectorXd g = qp.G * out.x - qp.c;
    out.kkt_residual = (out.x - clamp(out.x - g, qp)).lpNorm<Eigen::Infinity>() / scale_of(qp);
    if (out.kkt_residual <= tol) {
      out.converged = true;
      return out;
    }

    // Projected gradient search from a Cauchy-like trial step.
    Eigen::VectorXd dir = -g;
    for (Eigen::Index i = 0; i < n; ++i) {
      if ((out.x[i] <= qp.lower[i] && dir[i] < 0.0) || (out.x[i] >= qp.upper[i] && dir[i] > 0.0)) dir[i] = 0.0;
    }
    const double gg = dir.squaredNorm();
    const double gGg = dir.dot(qp.G * dir);
    double s = gGg > 0.0 ? gg / gGg : 2.0 * width / std::max(dir.lpNorm<Eigen::Infinity>(), 1e-300);
    const double f0 = qp.objective(out.x);
    bool moved = false;
    for (int ls = 0; ls < 80; ++ls, s *= 0.5) {
      const Eigen::VectorXd trial = clamp(out.x - s * g, qp);
      const double decrease = g.dot(trial - out.x);
      if (!(decrease < 0.0)) continue;
      if (qp.objective(trial) <= f0 + 1e-4 * decrease) {
        out.x = trial;
        moved = true;
        break;
      }
    }
    if (!moved) break;

    // Newton iterations on the face of interior coordinates.
    for (Eigen::Index sub = 0; sub <= n; ++sub) {
      g = qp.G * out.x - qp.c;
      free_idx.clear();
      for (Eigen::Index i = 0; i < n; ++i) {
        if (out.x[i] > qp.lower[i] && out.x[i] < qp.upper[i]) free_idx.push_back(i);
      }
      if (free_idx.empty()) break;
      Eigen::VectorXd d;
      if (!newton_on_face(qp, free_idx, g, shift, d)) break;
      double gd = 0.0;
      for (std::size_t a = 0; a < free_idx.size(); ++a) gd += g[free_idx[a]] * d[static_cast<Eigen::Index>(a)];
      if (!(gd < 0.0)) break;

      double t = 1.0;
      Eigen::Index blocking = -1;
      for (std::size_t a = 0; a < free_idx.size(); ++a) {
        const Eigen::Index i = free_idx[a];
        const double di = d[static_cast<Eigen::Index>(a)];
        const double room = di > 0.0 ? (qp.upper[i] - out.x[i]) / di : di < 0.0 ? (qp.lower[i] - out.x[i]) / di : t;
        if (room < t) {
          t = room;
          blocking = static_cast<Eigen::Index>(a);
        }
      }
      for (std::size_t a = 0; a < free_idx.size(); ++a) out.x[free_idx[a]] += t * d[static_cast<Eigen::Index>(a)];
      out.x = clamp(out.x, qp);
      if (blocking >= 0) {
        const Eigen::Index i = free_idx[blocking];
        out.x[i] = d[blocking] > 0.0 ? qp.upper[i] : qp.lower[i];
        continue;
      }
      break;
    }
  }
  out.kkt_residual = kkt_residual(qp, out.x);
  out.converged = out.kkt_residual <= tol;
  return out;
}

}  // namespace stlmtl
