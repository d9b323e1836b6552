#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpcc/model.hpp"
#include "mpcc/qpcc.hpp"

namespace mpcc {

enum class HessianKind {
  /// ∇²𝓛 as is.
  kExact,
  /// ∇²𝓛 shifted so that λ_min >= floor.
  kExactConvexified,
  /// ∇²𝓛 + I.
  kPerturbedIdentity,
  /// A fixed matrix.
  kConstant,
  /// Damped BFGS.
  kBfgs,
  /// 2JᵀJ of the residual block plus floor·I.
  kGaussNewton,
};

/// Hessian approximation together with its internal state. Copy a fresh
/// strategy into each solve.
struct HessianStrategy {
  HessianKind kind = HessianKind::kExactConvexified;
  double floor = 1e-6;
  /// kConstant: the matrix. kBfgs: the initial matrix; when empty the
  /// convexified exact Hessian at the initial point is used.
  Mat matrix;

  /// Current BFGS approximation.
  Mat current;
  int bfgs_updates = 0;
  int bfgs_skips = 0;

  static HessianStrategy of(HessianKind kind, Mat m = {}, double floor = 1e-6) {
    HessianStrategy s;
    s.kind = kind;
    s.matrix = std::move(m);
    s.floor = floor;
    return s;
  }
  static HessianStrategy exact() { return of(HessianKind::kExact); }
  static HessianStrategy exact_convexified(double floor = 1e-6) {
    return of(HessianKind::kExactConvexified, {}, floor);
  }
  static HessianStrategy perturbed_identity() {
    return of(HessianKind::kPerturbedIdentity);
  }
  static HessianStrategy constant(Mat m) {
    return of(HessianKind::kConstant, std::move(m));
  }
  static HessianStrategy bfgs(Mat initial = {}) {
    return of(HessianKind::kBfgs, std::move(initial));
  }
  static HessianStrategy gauss_newton(double floor = 1e-6) {
    return of(HessianKind::kGaussNewton, {}, floor);
  }
};

std::string to_string(HessianKind kind);

/// Returns H^k for z_new and updates the strategy state. `z_old` is null at
/// the first iterate.
Mat next_hessian(HessianStrategy& s, const MpccProblem& p,
                 const PrimalDualPoint& z_new, const PrimalDualPoint* z_old);

struct SolveOptions {
  /// Stop when the KKT residual is at most this.
  double tolerance = 1e-10;
  int max_iterations = 50;
  /// Activity threshold for partitions and active sets.
  double activity_tol = 1e-8;
  HessianStrategy hessian;
  StepPolicy policy;
  /// Reference point for error logging. Multiplier blocks may be empty.
  std::optional<PrimalDualPoint> reference;
  EnumerateOptions enumerate;
};

enum class SolveStatus { kConverged, kMaxIterations, kSubproblemFailure };

std::string to_string(SolveStatus s);

/// One iterate. Fields under "step" describe the subproblem solved at z^k
/// and are unset on the last record.
struct TraceRecord {
  int k = 0;
  PrimalDualPoint z;
  double kkt_residual = 0.0;
  std::optional<double> err_to_ref;
  /// Inequality active sets at w^k with μ^k.
  ActiveSets active;

  bool has_step = false;
  Vec step;
  double step_norm = 0.0;
  int num_candidates = 0;
  BranchAssignment branch;
  /// Pair partition of the selected subproblem solution.
  ComplementarityPartition qp_partition;
  /// Rows of g active in the selected subproblem solution.
  std::vector<int> qp_active;
  bool step_s_stationary = true;
  bool non_s_fallback = false;
  /// ||r^k|| for the step z^k -> z^{k+1}.
  double r_norm = 0.0;
  /// ||∇²𝓛(z^k) − H^k||₂.
  double kappa = 0.0;
  Mat hessian;
};

struct SolveTrace {
  std::vector<TraceRecord> records;
  SolveStatus status = SolveStatus::kMaxIterations;
  std::string message;
  /// Iteration whose subproblem failed, or -1.
  int failed_iteration = -1;

  int iterations() const { return static_cast<int>(records.size()) - 1; }
  const PrimalDualPoint& final_point() const { return records.back().z; }
};

/// Full-step SQPCC.
SolveTrace sqpcc_solve(const MpccProblem& p, const PrimalDualPoint& z0,
                       const SolveOptions& opts = {});

/// Full-step SQP on an NLP. ξ and ν of z0 are ignored.
SolveTrace sqp_solve(const NlpProblem& nlp, const PrimalDualPoint& z0,
                     const SolveOptions& opts = {});

/// r^k = Ψ(z_new) − Ψ(z_old) − ∇Ψ̃(z_old)ᵀ(z_new − z_old), with
/// Ψ = (∇𝓛, h, −g, G, H) and the Hessian block of ∇Ψ̃ replaced by H^k.
Vec perturbation_rk(const MpccProblem& p, const PrimalDualPoint& z_old,
                    const PrimalDualPoint& z_new, const Mat& used_hessian);
Vec perturbation_rk(const NlpProblem& p, const PrimalDualPoint& z_old,
                    const PrimalDualPoint& z_new, const Mat& used_hessian);

/// ||∇²𝓛(z) − H||₂.
double kappa_estimate(const MpccProblem& p, const PrimalDualPoint& z,
                      const Mat& used_hessian);
double kappa_estimate(const NlpProblem& p, const PrimalDualPoint& z,
                      const Mat& used_hessian);

}  // namespace mpcc
