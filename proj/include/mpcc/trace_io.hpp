#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpcc/analysis.hpp"
#include "mpcc/solver.hpp"

namespace mpcc {

/// One CSV row of a trace. Step columns are zero or empty on the last row.
struct TraceRow {
  int k = 0;
  Vec w;
  Vec lambda;
  Vec mu;
  Vec xi;
  Vec nu;
  double kkt_residual = 0.0;
  double step_norm = 0.0;
  std::optional<double> err_to_ref;
  std::string branch;
  int num_candidates = 0;
  double r_norm = 0.0;
  double kappa = 0.0;
};

/// Header: k, w0.., lambda0.., mu0.., xi0.., nu0.., kkt_residual,
/// step_norm, err_to_ref, branch_signature, num_candidates, r_norm, kappa.
/// Reals are printed with 17 significant digits.
void write_trace_csv(std::ostream& os, const SolveTrace& trace);

/// Throws std::runtime_error on a malformed file.
std::vector<TraceRow> read_trace_csv(std::istream& is);

TraceRow to_row(const TraceRecord& rec);

nlohmann::json to_json(const OrderEstimate& e);
nlohmann::json to_json(const StabilizationReport& r);
nlohmann::json to_json(const StationarityReport& r);
nlohmann::json to_json(const PrimalDualPoint& z);
nlohmann::json to_json(const ComplementarityPartition& p);

/// Status, final point and per-iteration scalars of a trace.
nlohmann::json trace_summary(const SolveTrace& trace);

}  // namespace mpcc
