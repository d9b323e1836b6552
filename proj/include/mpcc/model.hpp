#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mpcc/expr.hpp"

namespace mpcc {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A scalar function together with its symbolic first and second partial
/// derivatives, built once at construction.
class Function {
 public:
  Function() = default;
  Function(Expr e, int num_vars);

  const Expr& expr() const { return expr_; }
  int num_vars() const { return n_; }

  /// ∂f/∂w_i.
  const Expr& partial(int i) const { return grad_[i]; }
  /// ∂²f/∂w_i∂w_j, computed as ∂/∂w_j of ∂f/∂w_i.
  const Expr& second(int i, int j) const;

  double value(const Vec& w) const { return evaluate(expr_, w); }
  Vec gradient(const Vec& w) const;
  Mat hessian(const Vec& w) const;

 private:
  Expr expr_;
  int n_ = 0;
  std::vector<Expr> grad_;
  // Upper triangle, row-major, i <= j.
  std::vector<Expr> hess_;
};

/// Evaluates each function at w.
Vec values(const std::vector<Function>& fs, const Vec& w);
/// Jacobian with one row per function.
Mat jacobian(const std::vector<Function>& fs, const Vec& w, int n);

/// min f s.t. h = 0, g <= 0.
struct NlpProblem {
  std::vector<std::string> vars;
  Function f;
  std::vector<Function> h;
  std::vector<Function> g;

  int n() const { return static_cast<int>(vars.size()); }
};

/// min f s.t. h = 0, g <= 0, 0 <= G ⟂ H >= 0.
struct MpccProblem {
  std::vector<std::string> vars;
  Function f;
  std::vector<Function> h;
  std::vector<Function> g;
  std::vector<Function> G;
  std::vector<Function> H;
  /// Optional r with f = Σ r_i², used by the Gauss-Newton Hessian.
  std::vector<Function> residuals;

  int n() const { return static_cast<int>(vars.size()); }
  int m() const { return static_cast<int>(G.size()); }
  int m_h() const { return static_cast<int>(h.size()); }
  int m_g() const { return static_cast<int>(g.size()); }
};

/// Builds a problem from expressions and validates it. Throws
/// std::invalid_argument on dimension errors or a residual block that does
/// not reproduce the objective.
MpccProblem make_mpcc(std::vector<std::string> vars, const Expr& f,
                      const std::vector<Expr>& h, const std::vector<Expr>& g,
                      const std::vector<Expr>& G, const std::vector<Expr>& H,
                      const std::vector<Expr>& residuals = {});

NlpProblem make_nlp(std::vector<std::string> vars, const Expr& f,
                    const std::vector<Expr>& h, const std::vector<Expr>& g);

/// Views an NLP as an MPCC without complementarity pairs.
MpccProblem as_mpcc(const NlpProblem& nlp);

/// Parses the line-oriented model format. Errors carry line and column.
MpccProblem parse_model(std::string_view text);

/// z = (w, λ, μ, ξ, ν). For plain NLPs ξ and ν are empty.
struct PrimalDualPoint {
  Vec w;
  Vec lambda;
  Vec mu;
  Vec xi;
  Vec nu;

  /// w with all multipliers zero.
  static PrimalDualPoint primal(const MpccProblem& p, const Vec& w);
  static PrimalDualPoint primal(const NlpProblem& p, const Vec& w);

  /// Stacked (w, λ, μ, ξ, ν).
  Vec stacked() const;
};

/// Raised when a query needs a complementarity-feasible point.
class InfeasiblePointError : public std::runtime_error {
 public:
  InfeasiblePointError(const std::string& what, int pair)
      : std::runtime_error(what), pair(pair) {}
  int pair;
};

/// Index sets I0+, I+0, I00 (0-based pair indices).
struct ComplementarityPartition {
  std::vector<int> i_zero_plus;
  std::vector<int> i_plus_zero;
  std::vector<int> i_zero_zero;
  double tol = 1e-8;
};

enum class Side {
  /// G_i = 0, H_i >= 0.
  kG,
  /// H_i = 0, G_i >= 0.
  kH,
};

using BranchAssignment = std::vector<Side>;

/// "G"/"H" per pair.
std::string branch_signature(const BranchAssignment& a);
/// Inverse of branch_signature. Throws std::invalid_argument.
BranchAssignment parse_branch(std::string_view sig);

/// Inequality active sets. Indices are 0-based.
struct ActiveSets {
  std::vector<int> active;
  std::vector<int> strictly_active;
  std::vector<int> weakly_active;
  std::vector<int> inactive;
  double tol = 1e-8;
};

ComplementarityPartition complementarity_partition(const MpccProblem& p,
                                                   const Vec& w, double tol);

ActiveSets active_sets(const std::vector<Function>& g, const Vec& w,
                       const Vec& mu, double tol);
ActiveSets active_sets(const MpccProblem& p, const Vec& w, const Vec& mu,
                       double tol);

/// Inequalities [g; -G; -H; G_i·H_i].
NlpProblem nlp_reformulation(const MpccProblem& p);

/// Fixes each pair to one side of the complementarity set.
NlpProblem branch_nlp(const MpccProblem& p, const BranchAssignment& a);

/// Keeps both nonnegativity constraints on biactive pairs.
NlpProblem relaxed_nlp(const MpccProblem& p,
                       const ComplementarityPartition& part);

/// ∇f + ∇h·λ + ∇g·μ − ∇G·ξ − ∇H·ν.
Vec mpcc_lagrangian_gradient(const MpccProblem& p, const PrimalDualPoint& z);
Mat mpcc_lagrangian_hessian(const MpccProblem& p, const PrimalDualPoint& z);

/// Infinity norm of the S-stationarity residual. `tol` decides which pairs
/// count as strictly positive or biactive.
double mpcc_kkt_residual(const MpccProblem& p, const PrimalDualPoint& z,
                         double tol = 1e-8);

Vec nlp_lagrangian_gradient(const NlpProblem& p, const PrimalDualPoint& z);
Mat nlp_lagrangian_hessian(const NlpProblem& p, const PrimalDualPoint& z);
double nlp_kkt_residual(const NlpProblem& p, const PrimalDualPoint& z);

}  // namespace mpcc
