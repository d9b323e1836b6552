#include "mpcc/trace_io.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace mpcc {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, int line) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("trace line " + std::to_string(line) +
                             ": bad number '" + s + "'");
  }
}

const char* kBlocks[] = {"w", "lambda", "mu", "xi", "nu"};

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

TraceRow to_row(const TraceRecord& rec) {
  TraceRow r;
  r.k = rec.k;
  r.w = rec.z.w;
  r.lambda = rec.z.lambda;
  r.mu = rec.z.mu;
  r.xi = rec.z.xi;
  r.nu = rec.z.nu;
  r.kkt_residual = rec.kkt_residual;
  r.step_norm = rec.step_norm;
  r.err_to_ref = rec.err_to_ref;
  r.branch = rec.has_step ? branch_signature(rec.branch) : "";
  r.num_candidates = rec.num_candidates;
  r.r_norm = rec.r_norm;
  r.kappa = rec.kappa;
  return r;
}

void write_trace_csv(std::ostream& os, const SolveTrace& trace) {
  if (trace.records.empty()) return;
  const PrimalDualPoint& z0 = trace.records.front().z;
  const Vec* blocks0[] = {&z0.w, &z0.lambda, &z0.mu, &z0.xi, &z0.nu};
  os << "k";
  for (int b = 0; b < 5; ++b) {
    for (int i = 0; i < blocks0[b]->size(); ++i) os << ',' << kBlocks[b] << i;
  }
  os << ",kkt_residual,step_norm,err_to_ref,branch_signature,num_candidates,"
        "r_norm,kappa\n";
  for (const auto& rec : trace.records) {
    TraceRow r = to_row(rec);
    os << r.k;
    for (const Vec* v : {&r.w, &r.lambda, &r.mu, &r.xi, &r.nu}) {
      for (int i = 0; i < v->size(); ++i) os << ',' << fmt((*v)[i]);
    }
    os << ',' << fmt(r.kkt_residual) << ',' << fmt(r.step_norm) << ','
       << (r.err_to_ref ? fmt(*r.err_to_ref) : "") << ',' << r.branch << ','
       << r.num_candidates << ',' << fmt(r.r_norm) << ',' << fmt(r.kappa)
       << '\n';
  }
}

std::vector<TraceRow> read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty trace file");
  std::vector<std::string> header = split(line);
  int counts[5] = {0, 0, 0, 0, 0};
  size_t col = 1;
  if (header.empty() || header[0] != "k") {
    throw std::runtime_error("trace header must start with 'k'");
  }
  for (int b = 0; b < 5; ++b) {
    std::string prefix = kBlocks[b];
    while (col < header.size() &&
           header[col] == prefix + std::to_string(counts[b])) {
      ++counts[b];
      ++col;
    }
  }
  const char* tail[] = {"kkt_residual", "step_norm",      "err_to_ref",
                        "branch_signature", "num_candidates", "r_norm",
                        "kappa"};
  if (header.size() != col + 7) {
    throw std::runtime_error("trace header has unexpected columns");
  }
  for (int t = 0; t < 7; ++t) {
    if (header[col + t] != tail[t]) {
      throw std::runtime_error("trace header: expected '" +
                               std::string(tail[t]) + "'");
    }
  }

  std::vector<TraceRow> rows;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells = split(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("trace line " + std::to_string(lineno) +
                               ": expected " + std::to_string(header.size()) +
                               " cells");
    }
    TraceRow r;
    r.k = static_cast<int>(parse_double(cells[0], lineno));
    size_t c = 1;
    Vec* blocks[] = {&r.w, &r.lambda, &r.mu, &r.xi, &r.nu};
    for (int b = 0; b < 5; ++b) {
      blocks[b]->resize(counts[b]);
      for (int i = 0; i < counts[b]; ++i) {
        (*blocks[b])[i] = parse_double(cells[c++], lineno);
      }
    }
    r.kkt_residual = parse_double(cells[c++], lineno);
    r.step_norm = parse_double(cells[c++], lineno);
    if (!cells[c].empty()) r.err_to_ref = parse_double(cells[c], lineno);
    ++c;
    r.branch = cells[c++];
    r.num_candidates = static_cast<int>(parse_double(cells[c++], lineno));
    r.r_norm = parse_double(cells[c++], lineno);
    r.kappa = parse_double(cells[c++], lineno);
    rows.push_back(std::move(r));
  }
  return rows;
}

nlohmann::json to_json(const PrimalDualPoint& z) {
  return {{"w", vec_json(z.w)},   {"lambda", vec_json(z.lambda)},
          {"mu", vec_json(z.mu)}, {"xi", vec_json(z.xi)},
          {"nu", vec_json(z.nu)}};
}

nlohmann::json to_json(const ComplementarityPartition& p) {
  return {{"I0+", p.i_zero_plus}, {"I+0", p.i_plus_zero}, {"I00", p.i_zero_zero}};
}

nlohmann::json to_json(const OrderEstimate& e) {
  nlohmann::json ratios = nlohmann::json::array();
  for (const auto& r : e.ratios) {
    ratios.push_back(
        {{"k", r.k}, {"error", r.error}, {"rho", r.rho}, {"q", r.q}});
  }
  return {{"classification", to_string(e.classification)},
          {"alpha", finite_or_null(e.alpha)},
          {"quadratic_constant", finite_or_null(e.quadratic_constant)},
          {"tail_start", e.tail_start},
          {"ratios", ratios}};
}

nlohmann::json to_json(const StabilizationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"k", row.k},
                    {"g_active", row.g_active},
                    {"qp_partition", to_json(row.qp_partition)},
                    {"active_chain", row.active_chain},
                    {"i0p_chain", row.i0p_chain},
                    {"ip0_chain", row.ip0_chain},
                    {"i00_chain", row.i00_chain}});
  }
  nlohmann::json ids = nlohmann::json::array();
  for (const auto& id : r.indices) {
    ids.push_back({{"kind", id.kind},
                   {"index", id.index},
                   {"first_permanent", id.first_permanent},
                   {"asymptotic_only", id.asymptotic_only}});
  }
  return {{"reference",
           {{"active", r.ref_active},
            {"strictly_active", r.ref_strict},
            {"weakly_active", r.ref_weak},
            {"partition", to_json(r.ref_partition)},
            {"I00+", r.ref_i00_plus},
            {"I00^0", r.ref_i00_zero}}},
          {"active_chain_from", r.active_chain_from},
          {"i0p_chain_from", r.i0p_chain_from},
          {"ip0_chain_from", r.ip0_chain_from},
          {"i00_chain_from", r.i00_chain_from},
          {"indices", ids},
          {"rows", rows}};
}

nlohmann::json to_json(const StationarityReport& r) {
  nlohmann::json bi = nlohmann::json::array();
  for (const auto& d : r.biactive) {
    bi.push_back({{"pair", d.pair}, {"xi", d.xi}, {"nu", d.nu},
                  {"S", d.s}, {"M", d.m}, {"C", d.c}, {"A", d.a}});
  }
  nlohmann::json j = {{"class", to_string(r.cls)},
                      {"multipliers", to_json(r.z)},
                      {"partition", to_json(r.partition)},
                      {"g_active", r.g_active},
                      {"biactive", bi},
                      {"residual", r.residual},
                      {"rank_deficient", r.rank_deficient},
                      {"licq", r.mpcc_licq}};
  j["b_stationary"] =
      r.b_stationary ? nlohmann::json(*r.b_stationary) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json trace_summary(const SolveTrace& trace) {
  nlohmann::json iters = nlohmann::json::array();
  for (const auto& rec : trace.records) {
    nlohmann::json it = {{"k", rec.k},
                         {"w", vec_json(rec.z.w)},
                         {"kkt_residual", rec.kkt_residual}};
    if (rec.err_to_ref) it["err_to_ref"] = *rec.err_to_ref;
    if (rec.has_step) {
      it["branch"] = branch_signature(rec.branch);
      it["num_candidates"] = rec.num_candidates;
      it["step_norm"] = rec.step_norm;
      it["r_norm"] = rec.r_norm;
      it["kappa"] = rec.kappa;
    }
    iters.push_back(std::move(it));
  }
  nlohmann::json j = {{"status", to_string(trace.status)},
                      {"iterations", trace.iterations()},
                      {"final", to_json(trace.final_point())},
                      {"records", iters}};
  if (!trace.message.empty()) j["message"] = trace.message;
  if (trace.failed_iteration >= 0) j["failed_iteration"] = trace.failed_iteration;
  return j;
}

}  // namespace mpcc
