#include "mpcc/solver.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

namespace mpcc {

std::string to_string(HessianKind kind) {
  switch (kind) {
    case HessianKind::kExact:
      return "exact-raw";
    case HessianKind::kExactConvexified:
      return "exact";
    case HessianKind::kPerturbedIdentity:
      return "perturbed";
    case HessianKind::kConstant:
      return "const";
    case HessianKind::kBfgs:
      return "bfgs";
    case HessianKind::kGaussNewton:
      return "gn";
  }
  return "unknown";
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kMaxIterations:
      return "max-iterations";
    case SolveStatus::kSubproblemFailure:
      return "subproblem-failure";
  }
  return "unknown";
}

namespace {

Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

void bfgs_update(HessianStrategy& s, const MpccProblem& p,
                 const PrimalDualPoint& z_new, const PrimalDualPoint& z_old) {
  Vec step = z_new.w - z_old.w;
  // Both gradients use the new multipliers.
  PrimalDualPoint mixed = z_new;
  mixed.w = z_old.w;
  Vec y = mpcc_lagrangian_gradient(p, z_new) -
          mpcc_lagrangian_gradient(p, mixed);
  double sy = step.dot(y);
  if (step.norm() == 0.0 || sy <= 1e-12 * step.norm() * y.norm()) {
    ++s.bfgs_skips;
    return;
  }
  const Mat& B = s.current;
  Vec Bs = B * step;
  double sBs = step.dot(Bs);
  // Powell damping keeps the update positive definite.
  Vec r = y;
  if (sy < 0.2 * sBs) {
    double theta = 0.8 * sBs / (sBs - sy);
    r = theta * y + (1.0 - theta) * Bs;
  }
  s.current = symmetrize(B - Bs * Bs.transpose() / sBs +
                         r * r.transpose() / step.dot(r));
  ++s.bfgs_updates;
}

}  // namespace

Mat next_hessian(HessianStrategy& s, const MpccProblem& p,
                 const PrimalDualPoint& z_new, const PrimalDualPoint* z_old) {
  const int n = p.n();
  switch (s.kind) {
    case HessianKind::kExact:
      return mpcc_lagrangian_hessian(p, z_new);
    case HessianKind::kExactConvexified:
      return nearest_pd(mpcc_lagrangian_hessian(p, z_new), s.floor);
    case HessianKind::kPerturbedIdentity:
      return nearest_pd(
          mpcc_lagrangian_hessian(p, z_new) + Mat::Identity(n, n), s.floor);
    case HessianKind::kConstant:
      if (s.matrix.rows() != n || s.matrix.cols() != n) {
        throw std::invalid_argument("constant Hessian has the wrong size");
      }
      return s.matrix;
    case HessianKind::kBfgs:
      if (s.current.size() == 0) {
        if (s.matrix.size() != 0) {
          if (s.matrix.rows() != n || s.matrix.cols() != n) {
            throw std::invalid_argument("initial BFGS matrix has the wrong size");
          }
          s.current = s.matrix;
        } else {
          s.current = nearest_pd(mpcc_lagrangian_hessian(p, z_new), s.floor);
        }
      } else if (z_old != nullptr) {
        bfgs_update(s, p, z_new, *z_old);
      }
      return s.current;
    case HessianKind::kGaussNewton: {
      if (p.residuals.empty()) {
        throw std::invalid_argument(
            "Gauss-Newton Hessian needs a residual block");
      }
      Mat J = jacobian(p.residuals, z_new.w, n);
      return 2.0 * J.transpose() * J + s.floor * Mat::Identity(n, n);
    }
  }
  return Mat::Identity(n, n);
}

Vec perturbation_rk(const MpccProblem& p, const PrimalDualPoint& z_old,
                    const PrimalDualPoint& z_new, const Mat& used_hessian) {
  const int n = p.n();
  const Vec& w = z_old.w;
  Vec dw = z_new.w - z_old.w;
  Mat Jh = jacobian(p.h, w, n);
  Mat Jg = jacobian(p.g, w, n);
  Mat JG = jacobian(p.G, w, n);
  Mat JH = jacobian(p.H, w, n);

  Vec lin_grad = used_hessian * dw;
  if (p.m_h() > 0) lin_grad += Jh.transpose() * (z_new.lambda - z_old.lambda);
  if (p.m_g() > 0) lin_grad += Jg.transpose() * (z_new.mu - z_old.mu);
  if (p.m() > 0) {
    lin_grad -= JG.transpose() * (z_new.xi - z_old.xi);
    lin_grad -= JH.transpose() * (z_new.nu - z_old.nu);
  }

  Vec r(n + p.m_h() + p.m_g() + 2 * p.m());
  int at = 0;
  r.segment(at, n) = mpcc_lagrangian_gradient(p, z_new) -
                     mpcc_lagrangian_gradient(p, z_old) - lin_grad;
  at += n;
  auto block = [&](const std::vector<Function>& fs, const Mat& J,
                   double sign) {
    int k = static_cast<int>(fs.size());
    if (k == 0) return;
    r.segment(at, k) =
        sign * (values(fs, z_new.w) - values(fs, w) - J * dw);
    at += k;
  };
  block(p.h, Jh, 1.0);
  block(p.g, Jg, -1.0);
  block(p.G, JG, 1.0);
  block(p.H, JH, 1.0);
  return r;
}

Vec perturbation_rk(const NlpProblem& p, const PrimalDualPoint& z_old,
                    const PrimalDualPoint& z_new, const Mat& used_hessian) {
  PrimalDualPoint a = z_old;
  PrimalDualPoint b = z_new;
  a.xi = a.nu = b.xi = b.nu = Vec();
  return perturbation_rk(as_mpcc(p), a, b, used_hessian);
}

double kappa_estimate(const MpccProblem& p, const PrimalDualPoint& z,
                      const Mat& used_hessian) {
  Mat diff = symmetrize(mpcc_lagrangian_hessian(p, z) - used_hessian);
  if (diff.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Mat> es(diff, Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double kappa_estimate(const NlpProblem& p, const PrimalDualPoint& z,
                      const Mat& used_hessian) {
  PrimalDualPoint a = z;
  a.xi = a.nu = Vec();
  return kappa_estimate(as_mpcc(p), a, used_hessian);
}

namespace {

PrimalDualPoint fill_multipliers(const MpccProblem& p,
                                 const PrimalDualPoint& z0) {
  if (z0.w.size() != p.n()) {
    throw std::invalid_argument("initial point has the wrong dimension");
  }
  PrimalDualPoint z = z0;
  auto fill = [](Vec& v, int size, const char* name) {
    if (v.size() == 0) {
      v = Vec::Zero(size);
    } else if (v.size() != size) {
      throw std::invalid_argument(std::string("initial ") + name +
                                  " has the wrong dimension");
    }
  };
  fill(z.lambda, p.m_h(), "lambda");
  fill(z.mu, p.m_g(), "mu");
  fill(z.xi, p.m(), "xi");
  fill(z.nu, p.m(), "nu");
  return z;
}

std::optional<double> reference_error(const PrimalDualPoint& z,
                                      const std::optional<PrimalDualPoint>& ref) {
  if (!ref) return std::nullopt;
  if (ref->w.size() != z.w.size()) return std::nullopt;
  double e = (z.w - ref->w).lpNorm<Eigen::Infinity>();
  auto add = [&](const Vec& a, const Vec& b) {
    if (b.size() > 0 && a.size() == b.size()) {
      e = std::max(e, (a - b).lpNorm<Eigen::Infinity>());
    }
  };
  add(z.lambda, ref->lambda);
  add(z.mu, ref->mu);
  add(z.xi, ref->xi);
  add(z.nu, ref->nu);
  return e;
}

// Subproblem of the plain SQP method: the single QP of an MPCC without
// pairs, with QP failures reported by status.
QpccSolution classical_step(const QpccData& d, int k) {
  QpData q = branch_qp(d, {});
  QpSolution qs = solve_qp(q);
  if (qs.status != QpStatus::kOptimal) {
    throw SubproblemError("QP " + to_string(qs.status) + " at iteration " +
                          std::to_string(k));
  }
  QpccSolution s;
  s.step = qs.x;
  s.lambda = qs.eq_multipliers;
  s.mu = qs.in_multipliers;
  s.xi = Vec();
  s.nu = Vec();
  s.qp_active_set = qs.active;
  s.g_active = qs.active;
  s.objective = d.gradient.dot(s.step) + 0.5 * s.step.dot(d.hessian * s.step);
  s.s_stationary = true;
  return s;
}

SolveTrace run(const MpccProblem& p, const PrimalDualPoint& z0,
               const SolveOptions& opts, bool classical) {
  if (opts.tolerance <= 0.0 || opts.activity_tol <= 0.0 ||
      opts.max_iterations < 1) {
    throw std::invalid_argument("invalid solve options");
  }
  SolveTrace trace;
  HessianStrategy hs = opts.hessian;
  PrimalDualPoint z = fill_multipliers(p, z0);
  std::optional<PrimalDualPoint> prev;
  BranchAssignment prev_branch;

  for (int k = 0;; ++k) {
    TraceRecord rec;
    rec.k = k;
    rec.z = z;
    rec.kkt_residual = mpcc_kkt_residual(p, z, opts.activity_tol);
    rec.err_to_ref = reference_error(z, opts.reference);
    rec.active = active_sets(p, z.w, z.mu, opts.activity_tol);
    if (rec.kkt_residual <= opts.tolerance) {
      trace.status = SolveStatus::kConverged;
      trace.records.push_back(std::move(rec));
      break;
    }
    if (k >= opts.max_iterations) {
      trace.status = SolveStatus::kMaxIterations;
      trace.records.push_back(std::move(rec));
      break;
    }

    Mat Hk = next_hessian(hs, p, z, prev ? &*prev : nullptr);
    QpccData d = linearize(p, z, Hk);
    StepSelection sel;
    try {
      if (classical) {
        sel.solution = classical_step(d, k);
        rec.num_candidates = 1;
      } else {
        auto candidates = solve_qpcc_enumerate(d, opts.enumerate);
        rec.num_candidates = static_cast<int>(candidates.size());
        StepPolicy policy = opts.policy;
        if (policy.kind == StepPolicy::Kind::kWarmBranch) {
          // The configured branch seeds the first iteration.
          if (k > 0) policy.branch = prev_branch;
        }
        sel = select_step(candidates, policy);
      }
    } catch (const SubproblemError& e) {
      trace.status = SolveStatus::kSubproblemFailure;
      trace.message = e.what();
      trace.failed_iteration = k;
      rec.hessian = Hk;
      trace.records.push_back(std::move(rec));
      break;
    }

    const QpccSolution& s = sel.solution;
    PrimalDualPoint z_new;
    z_new.w = z.w + s.step;
    z_new.lambda = s.lambda;
    z_new.mu = s.mu;
    z_new.xi = s.xi;
    z_new.nu = s.nu;

    rec.has_step = true;
    rec.step = s.step;
    rec.step_norm = s.step.norm();
    rec.branch = s.branch;
    rec.qp_partition = s.partition;
    rec.qp_active = s.g_active;
    rec.step_s_stationary = s.s_stationary;
    rec.non_s_fallback = sel.non_s_fallback;
    rec.kappa = kappa_estimate(p, z, Hk);
    rec.r_norm = perturbation_rk(p, z, z_new, Hk).norm();
    rec.hessian = Hk;
    trace.records.push_back(std::move(rec));

    prev_branch = s.branch;
    prev = std::move(z);
    z = std::move(z_new);
  }
  return trace;
}

}  // namespace

SolveTrace sqpcc_solve(const MpccProblem& p, const PrimalDualPoint& z0,
                       const SolveOptions& opts) {
  return run(p, z0, opts, false);
}

SolveTrace sqp_solve(const NlpProblem& nlp, const PrimalDualPoint& z0,
                     const SolveOptions& opts) {
  PrimalDualPoint z = z0;
  z.xi = Vec();
  z.nu = Vec();
  SolveOptions o = opts;
  if (o.reference) {
    o.reference->xi = Vec();
    o.reference->nu = Vec();
  }
  return run(as_mpcc(nlp), z, o, true);
}

}  // namespace mpcc
