#include "mpcc/denseqp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

namespace mpcc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

Vec cholesky_solve(const Mat& M, const Vec& rhs) {
  const int n = static_cast<int>(M.rows());
  if (M.cols() != n || rhs.size() != n) {
    throw std::invalid_argument("cholesky_solve: dimension mismatch");
  }
  Mat L = Mat::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double d = M(j, j);
    for (int k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
    if (!(d > 0.0)) {
      throw NotPositiveDefiniteError(
          "matrix is not positive definite (pivot " + std::to_string(j) + ")",
          j);
    }
    L(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      double s = M(i, j);
      for (int k = 0; k < j; ++k) s -= L(i, k) * L(j, k);
      L(i, j) = s / L(j, j);
    }
  }
  Vec y(n);
  for (int i = 0; i < n; ++i) {
    double s = rhs[i];
    for (int k = 0; k < i; ++k) s -= L(i, k) * y[k];
    y[i] = s / L(i, i);
  }
  Vec x(n);
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= L(k, i) * x[k];
    x[i] = s / L(i, i);
  }
  return x;
}

Mat nearest_pd(const Mat& M, double floor) {
  if (M.rows() == 0) return M;
  Eigen::SelfAdjointEigenSolver<Mat> es(M, Eigen::EigenvaluesOnly);
  double sigma = std::max(0.0, floor - es.eigenvalues().minCoeff());
  if (sigma == 0.0) return M;
  return M + sigma * Mat::Identity(M.rows(), M.cols());
}

std::string to_string(QpStatus s) {
  switch (s) {
    case QpStatus::kOptimal:
      return "optimal";
    case QpStatus::kInfeasible:
      return "infeasible";
    case QpStatus::kUnbounded:
      return "unbounded";
    case QpStatus::kDegenerateCycle:
      return "degenerate-cycle";
  }
  return "unknown";
}

double qp_kkt_residual(const QpData& q, const Vec& x, const Vec& lambda,
                       const Vec& mu) {
  Vec stat = q.H * x + q.c;
  if (q.m_eq() > 0) stat += q.A_eq.transpose() * lambda;
  if (q.m_in() > 0) stat += q.A_in.transpose() * mu;
  double r = stat.lpNorm<Eigen::Infinity>();
  if (q.m_eq() > 0) {
    r = std::max(r, (q.A_eq * x + q.b_eq).lpNorm<Eigen::Infinity>());
  }
  if (q.m_in() > 0) {
    Vec s = q.A_in * x + q.b_in;
    for (int i = 0; i < q.m_in(); ++i) {
      r = std::max({r, std::max(0.0, s[i]), std::max(0.0, -mu[i]),
                    std::abs(mu[i] * s[i])});
    }
  }
  return r;
}

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// Working-set problem: min ½xᵀHx + cᵀx over the equalities plus the
// inequality rows listed in the working set W.
struct ActiveSetCore {
  const Mat& H;
  const Vec& c;
  const Mat& A_eq;
  const Vec& b_eq;
  const Mat& A_in;
  const Vec& b_in;

  int n() const { return static_cast<int>(c.size()); }
  int m_eq() const { return static_cast<int>(b_eq.size()); }
  int m_in() const { return static_cast<int>(b_in.size()); }

  Mat working_matrix(const std::vector<int>& W) const {
    Mat A(m_eq() + W.size(), n());
    if (m_eq() > 0) A.topRows(m_eq()) = A_eq;
    for (std::size_t k = 0; k < W.size(); ++k) {
      A.row(m_eq() + k) = A_in.row(W[k]);
    }
    return A;
  }

  Vec working_rhs(const std::vector<int>& W) const {
    Vec b(m_eq() + W.size());
    if (m_eq() > 0) b.head(m_eq()) = b_eq;
    for (std::size_t k = 0; k < W.size(); ++k) b[m_eq() + k] = b_in[W[k]];
    return b;
  }

  // Orthonormal basis of null(A).
  Mat null_space(const Mat& A) const {
    if (A.rows() == 0) return Mat::Identity(n(), n());
    Eigen::ColPivHouseholderQR<Mat> qr(A.transpose());
    qr.setThreshold(1e-12);
    int r = static_cast<int>(qr.rank());
    Mat Q = qr.householderQ();
    return Q.rightCols(n() - r);
  }

  bool independent(const Mat& A) const {
    if (A.rows() == 0) return true;
    if (A.rows() > n()) return false;
    Eigen::ColPivHouseholderQR<Mat> qr(A.transpose());
    qr.setThreshold(1e-12);
    return qr.rank() == A.rows();
  }

  // Multipliers y with Aᵀy = -(Hx + c), minimum norm.
  Vec multipliers(const Mat& A, const Vec& x) const {
    if (A.rows() == 0) return Vec();
    Vec g = H * x + c;
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(A.transpose());
    return cod.solve(-g);
  }

  enum class StepKind { kNewton, kRay, kFlat };

  struct Step {
    StepKind kind;
    Vec p;
  };

  // Step within null(A_W) from x. kNewton steps reach the subspace minimizer;
  // kRay marks a descent direction of nonpositive curvature.
  Step step(const Mat& Z, const Vec& x) const {
    if (Z.cols() == 0) return {StepKind::kFlat, Vec::Zero(n())};
    Vec g = H * x + c;
    Vec gz = Z.transpose() * g;
    Mat Hr = Z.transpose() * H * Z;
    Hr = 0.5 * (Hr + Hr.transpose());
    double scale = std::max(1.0, Hr.cwiseAbs().maxCoeff());
    Eigen::LLT<Mat> llt(Hr);
    if (llt.info() == Eigen::Success) {
      Eigen::SelfAdjointEigenSolver<Mat> es(Hr, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().minCoeff() > 1e-12 * scale) {
        Vec v = llt.solve(-gz);
        return {StepKind::kNewton, Z * v};
      }
    }
    Eigen::SelfAdjointEigenSolver<Mat> es(Hr);
    const Vec& lam = es.eigenvalues();
    const Mat& U = es.eigenvectors();
    double gscale = std::max(1.0, g.lpNorm<Eigen::Infinity>());
    // Negative curvature: follow it downhill.
    if (lam[0] < -1e-12 * scale) {
      Vec d = Z * U.col(0);
      if (g.dot(d) > 0.0) d = -d;
      return {StepKind::kRay, d};
    }
    // Zero curvature with a nonzero slope.
    Vec slope = Vec::Zero(Z.cols());
    for (int i = 0; i < lam.size(); ++i) {
      if (lam[i] <= 1e-12 * scale) slope += U.col(i) * U.col(i).dot(gz);
    }
    if (slope.lpNorm<Eigen::Infinity>() > 1e-13 * gscale) {
      return {StepKind::kRay, -(Z * slope)};
    }
    // Flat directions carry no slope: pseudo-inverse step on the rest.
    Vec v = Vec::Zero(Z.cols());
    for (int i = 0; i < lam.size(); ++i) {
      if (lam[i] > 1e-12 * scale) v -= U.col(i) * (U.col(i).dot(gz) / lam[i]);
    }
    Vec p = Z * v;
    return {p.lpNorm<Eigen::Infinity>() > 0 ? StepKind::kNewton
                                            : StepKind::kFlat,
            p};
  }

  struct Result {
    QpStatus status = QpStatus::kOptimal;
    Vec x;
    std::vector<int> W;
    Vec y;
    int iterations = 0;
    int changes = 0;
  };

  // `at_minimizer` marks x as the minimizer over the initial working set.
  Result run(Vec x, std::vector<int> W, int cap,
             bool at_minimizer = false) const {
    Result res;
    int degenerate_run = 0;
    bool bland = false;
    while (true) {
      if (res.iterations >= cap) {
        res.status = QpStatus::kDegenerateCycle;
        break;
      }
      ++res.iterations;
      std::sort(W.begin(), W.end());
      Mat A = working_matrix(W);
      double xscale = 1.0 + x.lpNorm<Eigen::Infinity>();
      Step s{StepKind::kFlat, Vec::Zero(n())};
      if (!at_minimizer) s = step(null_space(A), x);
      at_minimizer = false;
      bool stationary = s.kind != StepKind::kRay &&
                        s.p.lpNorm<Eigen::Infinity>() <= 1e-14 * xscale;

      if (stationary) {
        Vec y = multipliers(A, x);
        double yscale = std::max(1.0, y.size() ? y.lpNorm<Eigen::Infinity>()
                                               : 0.0);
        int leave = -1;
        double most_negative = -1e-12 * yscale;
        for (std::size_t k = 0; k < W.size(); ++k) {
          double mu = y[m_eq() + k];
          if (mu < most_negative) {
            leave = static_cast<int>(k);
            if (bland) break;  // lowest index with a negative multiplier
            most_negative = mu;
          }
        }
        if (leave < 0) {
          res.x = x;
          res.W = W;
          res.y = y;
          res.status = QpStatus::kOptimal;
          return res;
        }
        W.erase(W.begin() + leave);
        ++res.changes;
        continue;
      }

      // Ratio test; scanning in ascending order makes the lowest blocking
      // index win ties.
      double alpha = s.kind == StepKind::kRay
                         ? std::numeric_limits<double>::infinity()
                         : 1.0;
      int blocking = -1;
      double pnorm = s.p.norm();
      for (int i = 0; i < m_in(); ++i) {
        if (std::binary_search(W.begin(), W.end(), i)) continue;
        double ap = A_in.row(i).dot(s.p);
        if (ap <= 64 * kEps * A_in.row(i).norm() * pnorm) continue;
        double slack = -(A_in.row(i).dot(x) + b_in[i]);
        double ratio = std::max(0.0, slack) / ap;
        if (ratio < alpha) {
          alpha = ratio;
          blocking = i;
        }
      }
      if (blocking < 0 && s.kind == StepKind::kRay) {
        res.status = QpStatus::kUnbounded;
        res.x = x;
        res.W = W;
        return res;
      }
      if (blocking < 0) {
        x += s.p;
        at_minimizer = true;
        degenerate_run = 0;
        continue;
      }
      x += alpha * s.p;
      W.push_back(blocking);
      ++res.changes;
      if (alpha * pnorm <= 1e-14 * xscale) {
        if (++degenerate_run >= 10) bland = true;
      } else {
        degenerate_run = 0;
      }
    }
    res.x = x;
    res.W = W;
    return res;
  }
};

// Feasible point of q via an auxiliary problem in (x, t):
// min t s.t. A_eq x + b_eq = 0, A_in x + b_in <= t, t >= 0.
std::optional<Vec> phase_one(const QpData& q, int cap) {
  const int n = q.n();
  Vec x0 = Vec::Zero(n);
  if (q.m_eq() > 0) {
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(q.A_eq);
    x0 = cod.solve(-q.b_eq);
    double scale = std::max(1.0, q.b_eq.lpNorm<Eigen::Infinity>());
    if ((q.A_eq * x0 + q.b_eq).lpNorm<Eigen::Infinity>() > 1e-9 * scale) {
      return std::nullopt;
    }
  }
  if (q.m_in() == 0) return x0;
  double t0 = std::max(0.0, (q.A_in * x0 + q.b_in).maxCoeff());
  if (t0 == 0.0) return x0;

  Mat H = Mat::Zero(n + 1, n + 1);
  Vec c = Vec::Zero(n + 1);
  c[n] = 1.0;
  Mat A_eq = Mat::Zero(q.m_eq(), n + 1);
  if (q.m_eq() > 0) A_eq.leftCols(n) = q.A_eq;
  Mat A_in = Mat::Zero(q.m_in() + 1, n + 1);
  A_in.topLeftCorner(q.m_in(), n) = q.A_in;
  A_in.block(0, n, q.m_in(), 1).setConstant(-1.0);
  A_in(q.m_in(), n) = -1.0;
  Vec b_in = Vec::Zero(q.m_in() + 1);
  b_in.head(q.m_in()) = q.b_in;
  ActiveSetCore core{H, c, A_eq, q.b_eq, A_in, b_in};
  Vec start(n + 1);
  start << x0, t0;
  auto res = core.run(start, {}, cap);
  if (res.status != QpStatus::kOptimal && res.status != QpStatus::kUnbounded) {
    return std::nullopt;
  }
  double scale = std::max(1.0, q.b_in.lpNorm<Eigen::Infinity>());
  if (res.x[n] > 1e-9 * scale) return std::nullopt;
  return Vec(res.x.head(n));
}

}  // namespace

QpSolution solve_qp(const QpData& q,
                    const std::optional<std::vector<int>>& warm_active) {
  const int n = q.n();
  if (q.H.rows() != n || q.H.cols() != n || q.A_eq.rows() != q.m_eq() ||
      q.A_in.rows() != q.m_in() || (q.m_eq() > 0 && q.A_eq.cols() != n) ||
      (q.m_in() > 0 && q.A_in.cols() != n)) {
    throw std::invalid_argument("solve_qp: inconsistent dimensions");
  }
  const int cap = 50 * (n + q.m_in());
  ActiveSetCore core{q.H, q.c, q.A_eq, q.b_eq, q.A_in, q.b_in};
  QpSolution sol;

  std::optional<ActiveSetCore::Result> res;
  if (warm_active && !warm_active->empty()) {
    // Subspace minimizer of the seeded working set, used when feasible.
    std::vector<int> W;
    for (int i : *warm_active) {
      if (i < 0 || i >= q.m_in()) continue;
      std::vector<int> trial = W;
      trial.push_back(i);
      if (core.independent(core.working_matrix(trial))) W = trial;
    }
    std::sort(W.begin(), W.end());
    Mat A = core.working_matrix(W);
    Vec b = core.working_rhs(W);
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(A);
    Vec xp = A.rows() ? Vec(cod.solve(-b)) : Vec::Zero(n);
    double bscale = std::max(1.0, b.size() ? b.lpNorm<Eigen::Infinity>() : 0.0);
    if (A.rows() == 0 ||
        (A * xp + b).lpNorm<Eigen::Infinity>() <= 1e-10 * bscale) {
      auto s = core.step(core.null_space(A), xp);
      if (s.kind != ActiveSetCore::StepKind::kRay) {
        Vec x = xp + s.p;
        bool feasible = true;
        for (int i = 0; i < q.m_in() && feasible; ++i) {
          double v = q.A_in.row(i).dot(x) + q.b_in[i];
          feasible = v <= 1e-12 * std::max(1.0, std::abs(q.b_in[i]));
        }
        if (feasible) res = core.run(x, W, cap, true);
      }
    }
  }
  if (!res) {
    auto x0 = phase_one(q, cap);
    if (!x0) {
      sol.status = QpStatus::kInfeasible;
      sol.x = Vec::Zero(n);
      sol.eq_multipliers = Vec::Zero(q.m_eq());
      sol.in_multipliers = Vec::Zero(q.m_in());
      return sol;
    }
    res = core.run(*x0, {}, cap);
  }

  sol.status = res->status;
  sol.x = res->x;
  sol.iterations = res->iterations;
  sol.working_set_changes = res->changes;
  sol.eq_multipliers = Vec::Zero(q.m_eq());
  sol.in_multipliers = Vec::Zero(q.m_in());
  if (res->status == QpStatus::kOptimal) {
    sol.active = res->W;
    if (q.m_eq() > 0) sol.eq_multipliers = res->y.head(q.m_eq());
    for (std::size_t k = 0; k < res->W.size(); ++k) {
      // Negatives here are rounding-level by the optimality test.
      sol.in_multipliers[res->W[k]] = std::max(0.0, res->y[q.m_eq() + k]);
    }
  }
  sol.kkt_residual =
      qp_kkt_residual(q, sol.x, sol.eq_multipliers, sol.in_multipliers);
  return sol;
}

}  // namespace mpcc
