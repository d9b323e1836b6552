#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mpcc/model.hpp"
#include "mpcc/solver.hpp"

namespace mpcc {

enum class StationarityClass { kNotStationary, kW, kA, kC, kM, kS };

std::string to_string(StationarityClass c);

/// Sign tests on one biactive pair.
struct BiactiveDiagnostic {
  int pair = 0;
  double xi = 0.0;
  double nu = 0.0;
  bool s = false;
  bool m = false;
  bool c = false;
  bool a = false;
};

struct StationarityReport {
  StationarityClass cls = StationarityClass::kNotStationary;
  /// w together with the least-squares multipliers. Inactive components
  /// are zero.
  PrimalDualPoint z;
  ComplementarityPartition partition;
  /// Rows of g active at w.
  std::vector<int> g_active;
  std::vector<BiactiveDiagnostic> biactive;
  /// ||∇𝓛||∞ at the solved multipliers.
  double residual = 0.0;
  /// Active gradients were rank deficient; the multipliers are the
  /// minimum-norm solution.
  bool rank_deficient = false;
  bool mpcc_licq = false;
  /// Unset when |I00| exceeds the enumeration cap.
  std::optional<bool> b_stationary;
};

/// Solves the stationarity system over the constraints active at w and
/// classifies the point. Throws InfeasiblePointError when w is infeasible
/// by more than tol.
StationarityReport classify_stationarity(const MpccProblem& p, const Vec& w,
                                         double tol = 1e-8);

struct BranchCertificate {
  /// Pairs of I00 whose H_i is kept as an inequality (G_i = 0).
  std::vector<int> subset;
  bool certified = false;
  PrimalDualPoint z;
  double residual = 0.0;
};

struct BStationarityReport {
  bool b_stationary = false;
  std::vector<BranchCertificate> branches;
};

/// Sign-constrained stationarity of every branch NLP at w. Throws
/// EnumerationCapError when |I00| > cap.
BStationarityReport check_b_stationarity(const MpccProblem& p, const Vec& w,
                                         double tol = 1e-8, int cap = 16);

struct LicqReport {
  bool holds = false;
  int rank = 0;
  int columns = 0;
  std::vector<double> singular_values;
};

LicqReport check_mpcc_licq(const MpccProblem& p, const Vec& w,
                           double tol = 1e-8);

/// Positive definiteness of ∇²𝓛 on the strong critical cone of each
/// branch. `z` carries w and its multipliers.
bool check_mpcc_ssosc(const MpccProblem& p, const PrimalDualPoint& z,
                      double tol = 1e-8);

struct UlscReport {
  bool ulsc = true;
  bool pulsc = true;
  /// Biactive pairs with ξ_i > tol or ν_i > tol.
  std::vector<int> i00_plus;
  /// Biactive pairs with ξ_i and ν_i both zero to tol.
  std::vector<int> i00_zero;
};

UlscReport check_ulsc_pulsc(const StationarityReport& report,
                            const ComplementarityPartition& part,
                            double tol = 1e-8);

enum class OrderClass { kLinear, kSuperlinear, kQuadratic, kInconclusive };

std::string to_string(OrderClass c);

struct OrderRatio {
  int k = 0;
  double error = 0.0;
  /// e_{k+1}/e_k.
  double rho = 0.0;
  /// e_{k+1}/e_k².
  double q = 0.0;
};

struct OrderEstimate {
  OrderClass classification = OrderClass::kInconclusive;
  /// Linear rate; NaN unless linear.
  double alpha = 0.0;
  /// Largest tail q_k; NaN unless quadratic.
  double quadratic_constant = 0.0;
  /// First ratio index of the tail used for the decision.
  int tail_start = 0;
  std::vector<OrderRatio> ratios;
};

/// Classifies an error sequence.
///
/// The fast tail is the longest suffix of ratios with ρ_k < 0.1; it needs at
/// least two entries and strictly decreasing ρ_k. On it the sequence is
/// quadratic when no q_k exceeds 10 times the first tail q, and superlinear
/// otherwise. Failing that, the slow tail is the last half of the ratios
/// (at least three); the sequence is linear with rate α = geometric mean of
/// ρ_k when every tail ρ_k is within 20% of α and α lies in (0.01, 1).
/// Throws std::invalid_argument for fewer than four entries or a
/// non-positive entry.
OrderEstimate estimate_order(const std::vector<double>& errors);

struct ContractionFit {
  double alpha = 0.0;
  double beta = 0.0;
  int pairs = 0;
};

/// Least-squares fit of e_{k+1}/e_k = α + β·e_{k+1}²/e_k with α, β >= 0
/// over the last half of the pairs with e_k > 0.
ContractionFit fit_contraction(const std::vector<double>& errors);

/// Reference-error sequence of a trace. Stops at the first zero error, which
/// is kept.
std::vector<double> error_sequence(const SolveTrace& trace);

/// Containments at one iterate k >= 1, using the active sets of the
/// subproblem that produced w^k.
struct StabilizationRow {
  int k = 0;
  std::vector<int> g_active;
  ComplementarityPartition qp_partition;
  /// A+(z̄) = A+(w^k,μ^k) and A+(z̄) ⊆ A(w^k) ⊆ A+(z̄) ∪ A0(z̄).
  bool active_chain = false;
  bool i0p_chain = false;
  bool ip0_chain = false;
  bool i00_chain = false;
};

/// Identification of one constraint or pair that is active at the reference.
struct IndexIdentification {
  /// "g" or "pair".
  std::string kind;
  int index = 0;
  /// First iterate from which the index stays identified; -1 when it is
  /// not identified at the last iterate.
  int first_permanent = -1;
  /// Never identified at any iterate of the trace.
  bool asymptotic_only = false;
};

struct StabilizationReport {
  std::vector<int> ref_active;
  std::vector<int> ref_strict;
  std::vector<int> ref_weak;
  ComplementarityPartition ref_partition;
  std::vector<int> ref_i00_plus;
  std::vector<int> ref_i00_zero;
  std::vector<StabilizationRow> rows;
  /// First iterate from which each chain holds to the end of the trace, or
  /// -1.
  int active_chain_from = -1;
  int i0p_chain_from = -1;
  int ip0_chain_from = -1;
  int i00_chain_from = -1;
  std::vector<IndexIdentification> indices;
};

/// Throws std::invalid_argument when the reference is not S-stationary.
StabilizationReport stabilization_report(const SolveTrace& trace,
                                         const MpccProblem& p,
                                         const PrimalDualPoint& reference,
                                         double tol = 1e-8);

}  // namespace mpcc
