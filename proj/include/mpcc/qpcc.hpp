#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "mpcc/denseqp.hpp"
#include "mpcc/model.hpp"

namespace mpcc {

/// Linearized data of the SQPCC subproblem at an iterate:
///
///   min  ∇fᵀΔw + ½ΔwᵀHΔw
///   s.t. h + J_h Δw = 0
///        g + J_g Δw <= 0
///        0 <= G + J_G Δw ⟂ H + J_H Δw >= 0
struct QpccData {
  Mat hessian;
  Vec gradient;
  Mat J_h;
  Vec h;
  Mat J_g;
  Vec g;
  Mat J_G;
  Vec G;
  Mat J_H;
  Vec H;

  int n() const { return static_cast<int>(gradient.size()); }
  int m() const { return static_cast<int>(G.size()); }
};

/// Raised when no branch QP of a QPCC can be solved.
class SubproblemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when the pair count exceeds the enumeration cap.
class EnumerationCapError : public std::runtime_error {
 public:
  EnumerationCapError(int m, int cap)
      : std::runtime_error("QPCC has " + std::to_string(m) +
                           " complementarity pairs; enumeration cap is " +
                           std::to_string(cap)),
        m(m) {}
  int m;
};

struct QpccSolution {
  Vec step;
  Vec lambda;
  Vec mu;
  Vec xi;
  Vec nu;
  /// First branch (in enumeration order) that produced this step.
  BranchAssignment branch;
  /// Every branch whose QP produced this step.
  std::vector<BranchAssignment> branches;
  /// Working set of the branch QP, indexing the rows of its inequality
  /// block: the g rows first, then one row per pair.
  std::vector<int> qp_active_set;
  /// Inequality rows of g active in the branch QP.
  std::vector<int> g_active;
  /// Pair partition at the step, read off the branch QP's working set.
  ComplementarityPartition partition;
  double objective = 0.0;
  bool s_stationary = false;
  /// False when merged duplicates with equal active sets disagreed in their
  /// multipliers.
  bool multipliers_consistent = true;
};

struct EnumerateOptions {
  int cap = 16;
  /// Sign tolerance for ξ, ν on pairs where both linearized sides are zero
  /// (other row in the working set, or no slack).
  double sign_tol = 1e-8;
  /// Steps closer than this in the infinity norm are merged.
  double dedup_tol = 1e-9;
  /// Solve branch QPs with OpenMP.
  bool parallel = true;
};

/// Builds QPCC data at z with the given Hessian approximation.
QpccData linearize(const MpccProblem& p, const PrimalDualPoint& z,
                   const Mat& hessian);

/// Branch QP of `d` for assignment `a`.
QpData branch_qp(const QpccData& d, const BranchAssignment& a);

/// Solves all 2^m branch QPs and returns the distinct solutions sorted by
/// objective, then lexicographically by step. The parallel and serial
/// paths return identical lists.
std::vector<QpccSolution> solve_qpcc_enumerate(
    const QpccData& d, const EnumerateOptions& opts = {});

/// Always-serial reference path.
std::vector<QpccSolution> solve_qpcc_enumerate_serial(
    const QpccData& d, const EnumerateOptions& opts = {});

struct StepPolicy {
  enum class Kind { kMinObjective, kWarmBranch, kForcedBranch };
  Kind kind = Kind::kMinObjective;
  /// Previous branch for kWarmBranch, fixed branch for kForcedBranch.
  BranchAssignment branch;

  static StepPolicy min_objective() { return {}; }
  static StepPolicy warm(BranchAssignment previous) {
    return {Kind::kWarmBranch, std::move(previous)};
  }
  static StepPolicy forced(BranchAssignment a) {
    return {Kind::kForcedBranch, std::move(a)};
  }
};

struct StepSelection {
  QpccSolution solution;
  /// Set when min-objective had to fall back to a non-S candidate.
  bool non_s_fallback = false;
};

/// Picks one candidate. Throws std::invalid_argument on an empty list and
/// SubproblemError when a forced branch has no candidate.
StepSelection select_step(const std::vector<QpccSolution>& candidates,
                          const StepPolicy& policy);

}  // namespace mpcc
