#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace mpcc {

/// Raised by cholesky_solve on a non-positive pivot.
class NotPositiveDefiniteError : public std::runtime_error {
 public:
  NotPositiveDefiniteError(const std::string& what, int pivot)
      : std::runtime_error(what), pivot(pivot) {}
  int pivot;
};

/// Solves M x = rhs for symmetric positive definite M.
Eigen::VectorXd cholesky_solve(const Eigen::MatrixXd& M,
                               const Eigen::VectorXd& rhs);

/// Returns M + σI with σ = max(0, floor − λ_min(M)).
Eigen::MatrixXd nearest_pd(const Eigen::MatrixXd& M, double floor);

/// min ½xᵀHx + cᵀx s.t. A_eq x + b_eq = 0, A_in x + b_in <= 0.
struct QpData {
  Eigen::MatrixXd H;
  Eigen::VectorXd c;
  Eigen::MatrixXd A_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd A_in;
  Eigen::VectorXd b_in;

  int n() const { return static_cast<int>(c.size()); }
  int m_eq() const { return static_cast<int>(b_eq.size()); }
  int m_in() const { return static_cast<int>(b_in.size()); }
};

enum class QpStatus {
  kOptimal,
  kInfeasible,
  kUnbounded,
  kDegenerateCycle,
};

std::string to_string(QpStatus s);

/// Multipliers satisfy Hx + c + A_eqᵀλ + A_inᵀμ = 0 with μ >= 0.
struct QpSolution {
  Eigen::VectorXd x;
  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd in_multipliers;
  /// Inequality working set at termination, ascending.
  std::vector<int> active;
  QpStatus status = QpStatus::kInfeasible;
  int iterations = 0;
  /// Number of working-set changes in the main phase.
  int working_set_changes = 0;
  /// Infinity norm of the KKT residual at x.
  double kkt_residual = 0.0;
};

/// KKT residual of (x, λ, μ) for q: stationarity, feasibility, sign of μ and
/// complementarity, in the infinity norm.
double qp_kkt_residual(const QpData& q, const Eigen::VectorXd& x,
                       const Eigen::VectorXd& lambda,
                       const Eigen::VectorXd& mu);

/// Primal active-set method. `warm_active` seeds the working set.
QpSolution solve_qp(const QpData& q,
                    const std::optional<std::vector<int>>& warm_active = {});

}  // namespace mpcc
