#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mpcc/analysis.hpp"
#include "mpcc/registry.hpp"
#include "mpcc/solver.hpp"

namespace mpcc {

/// "1,2.5,-3" -> vector. Throws std::invalid_argument.
Vec parse_vector(std::string_view text);

/// exact | exact-raw | perturbed | bfgs | gn | const:v1,v2,...
/// (const takes the diagonal). Throws std::invalid_argument.
HessianStrategy parse_hessian(std::string_view text, int n);

/// min-obj | warm | force:<G/H string>. Throws std::invalid_argument.
StepPolicy parse_policy(std::string_view text);

/// One solver run of the example suite.
struct SuiteRun {
  std::string id;
  std::string problem;
  /// "sqpcc" or "sqp" (SQP on the NLP reformulation).
  std::string method = "sqpcc";
  std::string hessian = "exact";
  std::string policy = "min-obj";
  Vec x0;
  int max_iterations = 50;
};

struct SuiteResult {
  SuiteRun run;
  SolveTrace trace;
  double seconds = 0.0;
  std::vector<double> errors;
  /// Set when the error sequence is long enough.
  std::optional<OrderEstimate> order;
  ContractionFit contraction;
  std::optional<StabilizationReport> stabilization;
  /// Class of the final iterate in the original MPCC, or the error text.
  std::string limit_class;
};

std::vector<SuiteRun> paper_suite();

/// Runs one entry. Solver failures are recorded in the trace status.
SuiteResult execute(const SuiteRun& run);

struct CriterionResult {
  int id = 0;
  std::string title;
  bool pass = false;
  std::string detail;
};

/// Example-level acceptance checks over suite results. Criteria whose runs
/// are missing from `results` are omitted.
std::vector<CriterionResult> evaluate_criteria(
    const std::vector<SuiteResult>& results);

/// Report line on the example51 origin multipliers.
std::string example51_discrepancy_note();

}  // namespace mpcc
