#include "mpcc/analysis.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Dense>

#include "mpcc/denseqp.hpp"
#include "mpcc/qpcc.hpp"

namespace mpcc {

std::string to_string(StationarityClass c) {
  switch (c) {
    case StationarityClass::kNotStationary: return "not-stationary";
    case StationarityClass::kW: return "W";
    case StationarityClass::kA: return "A";
    case StationarityClass::kC: return "C";
    case StationarityClass::kM: return "M";
    case StationarityClass::kS: return "S";
  }
  return "?";
}

std::string to_string(OrderClass c) {
  switch (c) {
    case OrderClass::kLinear: return "linear";
    case OrderClass::kSuperlinear: return "superlinear";
    case OrderClass::kQuadratic: return "quadratic";
    case OrderClass::kInconclusive: return "inconclusive";
  }
  return "?";
}

namespace {

bool contains(const std::vector<int>& v, int i) {
  return std::find(v.begin(), v.end(), i) != v.end();
}

bool subset_of(const std::vector<int>& a, const std::vector<int>& b) {
  return std::all_of(a.begin(), a.end(), [&](int i) { return contains(b, i); });
}

std::vector<int> set_union(std::vector<int> a, const std::vector<int>& b) {
  for (int i : b) {
    if (!contains(a, i)) a.push_back(i);
  }
  std::sort(a.begin(), a.end());
  return a;
}

void check_feasible(const MpccProblem& p, const Vec& w, double tol) {
  if (w.size() != p.n()) {
    throw std::invalid_argument("point has " + std::to_string(w.size()) +
                                " entries, expected " + std::to_string(p.n()));
  }
  for (int i = 0; i < p.m_h(); ++i) {
    double v = p.h[i].value(w);
    if (std::abs(v) > tol) {
      throw InfeasiblePointError(
          "equality " + std::to_string(i) + " is violated (h=" +
              std::to_string(v) + ")",
          -1);
    }
  }
  for (int i = 0; i < p.m_g(); ++i) {
    double v = p.g[i].value(w);
    if (v > tol) {
      throw InfeasiblePointError(
          "inequality " + std::to_string(i) + " is violated (g=" +
              std::to_string(v) + ")",
          -1);
    }
  }
}

// Columns of the stationarity system ∇f + J y = 0, one per multiplier.
struct ActiveSystem {
  Mat J;
  Vec grad_f;
  // Block and index per column: 0 λ, 1 μ, 2 ξ, 3 ν.
  std::vector<std::pair<int, int>> cols;

  void add(int block, int index, const Vec& column) {
    cols.emplace_back(block, index);
    J.conservativeResize(grad_f.size(), J.cols() + 1);
    J.col(J.cols() - 1) = column;
  }

  PrimalDualPoint unpack(const MpccProblem& p, const Vec& w,
                         const Vec& y) const {
    PrimalDualPoint z = PrimalDualPoint::primal(p, w);
    for (size_t c = 0; c < cols.size(); ++c) {
      auto [block, i] = cols[c];
      switch (block) {
        case 0: z.lambda[i] = y[c]; break;
        case 1: z.mu[i] = y[c]; break;
        case 2: z.xi[i] = y[c]; break;
        default: z.nu[i] = y[c]; break;
      }
    }
    return z;
  }
};

ActiveSystem base_system(const MpccProblem& p, const Vec& w,
                         const std::vector<int>& g_active) {
  ActiveSystem s;
  s.grad_f = p.f.gradient(w);
  s.J.resize(p.n(), 0);
  for (int i = 0; i < p.m_h(); ++i) s.add(0, i, p.h[i].gradient(w));
  for (int i : g_active) s.add(1, i, p.g[i].gradient(w));
  return s;
}

std::vector<int> active_g(const MpccProblem& p, const Vec& w, double tol) {
  std::vector<int> out;
  for (int i = 0; i < p.m_g(); ++i) {
    if (p.g[i].value(w) >= -tol) out.push_back(i);
  }
  return out;
}

double residual_of(const ActiveSystem& s, const Vec& y) {
  Vec r = s.grad_f;
  if (s.J.cols() > 0) r += s.J * y;
  return r.size() > 0 ? r.lpNorm<Eigen::Infinity>() : 0.0;
}

double grad_scale(const ActiveSystem& s) {
  double g = s.grad_f.size() > 0 ? s.grad_f.lpNorm<Eigen::Infinity>() : 0.0;
  return std::max(1.0, g);
}

// Subsets of I00 as bit masks; bit j refers to part.i_zero_zero[j].
std::vector<int> subset_from_mask(const std::vector<int>& i00,
                                  unsigned long mask) {
  std::vector<int> out;
  for (size_t j = 0; j < i00.size(); ++j) {
    if (mask & (1ul << j)) out.push_back(i00[j]);
  }
  return out;
}

}  // namespace

LicqReport check_mpcc_licq(const MpccProblem& p, const Vec& w, double tol) {
  check_feasible(p, w, tol);
  ComplementarityPartition part = complementarity_partition(p, w, tol);
  ActiveSystem s = base_system(p, w, active_g(p, w, tol));
  for (int i : set_union(part.i_zero_plus, part.i_zero_zero)) {
    s.add(2, i, p.G[i].gradient(w));
  }
  for (int i : set_union(part.i_plus_zero, part.i_zero_zero)) {
    s.add(3, i, p.H[i].gradient(w));
  }
  LicqReport r;
  r.columns = static_cast<int>(s.J.cols());
  if (r.columns == 0) {
    r.holds = true;
    return r;
  }
  Eigen::JacobiSVD<Mat> svd(s.J);
  Vec sv = svd.singularValues();
  double largest = sv.size() > 0 ? sv[0] : 0.0;
  for (int i = 0; i < sv.size(); ++i) {
    r.singular_values.push_back(sv[i]);
    if (sv[i] > tol * largest) ++r.rank;
  }
  r.holds = r.rank == r.columns;
  return r;
}

StationarityReport classify_stationarity(const MpccProblem& p, const Vec& w,
                                         double tol) {
  check_feasible(p, w, tol);
  StationarityReport rep;
  rep.partition = complementarity_partition(p, w, tol);
  rep.g_active = active_g(p, w, tol);
  const auto& part = rep.partition;

  ActiveSystem s = base_system(p, w, rep.g_active);
  for (int i : set_union(part.i_zero_plus, part.i_zero_zero)) {
    s.add(2, i, -p.G[i].gradient(w));
  }
  for (int i : set_union(part.i_plus_zero, part.i_zero_zero)) {
    s.add(3, i, -p.H[i].gradient(w));
  }

  Vec y = Vec::Zero(s.J.cols());
  if (s.J.cols() > 0) {
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(s.J);
    cod.setThreshold(tol);
    y = cod.solve(-s.grad_f);
    rep.rank_deficient = cod.rank() < s.J.cols();
  }
  rep.z = s.unpack(p, w, y);
  rep.residual = residual_of(s, y);
  rep.mpcc_licq = check_mpcc_licq(p, w, tol).holds;

  bool solvable = rep.residual <= tol * grad_scale(s);
  for (int i : rep.g_active) {
    if (rep.z.mu[i] < -tol) solvable = false;
  }

  bool all_s = true, all_m = true, all_c = true, all_a = true;
  for (int i : part.i_zero_zero) {
    BiactiveDiagnostic d;
    d.pair = i;
    d.xi = rep.z.xi[i];
    d.nu = rep.z.nu[i];
    double scale = std::max({1.0, std::abs(d.xi), std::abs(d.nu)});
    d.s = d.xi >= -tol && d.nu >= -tol;
    d.m = (d.xi > tol && d.nu > tol) || std::abs(d.xi * d.nu) <= tol * scale;
    d.c = d.xi * d.nu >= -tol * scale;
    d.a = d.xi >= -tol || d.nu >= -tol;
    all_s = all_s && d.s;
    all_m = all_m && d.m;
    all_c = all_c && d.c;
    all_a = all_a && d.a;
    rep.biactive.push_back(d);
  }
  // S-test passing implies the weaker tests pass.
  assert(!all_s || (all_m && all_c && all_a));

  if (!solvable) {
    rep.cls = StationarityClass::kNotStationary;
  } else if (!all_a) {
    rep.cls = StationarityClass::kW;
  } else if (!all_c) {
    rep.cls = StationarityClass::kA;
  } else if (!all_m) {
    rep.cls = StationarityClass::kC;
  } else if (!all_s) {
    rep.cls = StationarityClass::kM;
  } else {
    rep.cls = StationarityClass::kS;
  }

  if (static_cast<int>(part.i_zero_zero.size()) <= 16) {
    rep.b_stationary = check_b_stationarity(p, w, tol).b_stationary;
  }
  return rep;
}

BStationarityReport check_b_stationarity(const MpccProblem& p, const Vec& w,
                                         double tol, int cap) {
  check_feasible(p, w, tol);
  ComplementarityPartition part = complementarity_partition(p, w, tol);
  const int d = static_cast<int>(part.i_zero_zero.size());
  if (d > cap) throw EnumerationCapError(d, cap);
  std::vector<int> g_act = active_g(p, w, tol);

  BStationarityReport out;
  out.b_stationary = true;
  for (unsigned long mask = 0; mask < (1ul << d); ++mask) {
    BranchCertificate cert;
    cert.subset = subset_from_mask(part.i_zero_zero, mask);
    ActiveSystem s = base_system(p, w, g_act);
    std::vector<int> sign_cols;
    for (size_t c = 0; c < s.cols.size(); ++c) {
      if (s.cols[c].first == 1) sign_cols.push_back(static_cast<int>(c));
    }
    for (int i : part.i_zero_plus) s.add(2, i, -p.G[i].gradient(w));
    for (int i : part.i_plus_zero) s.add(3, i, -p.H[i].gradient(w));
    for (int i : part.i_zero_zero) {
      bool in_subset = contains(cert.subset, i);
      // i in the subset: G_i = 0 with ξ free, H_i >= 0 with ν >= 0.
      s.add(2, i, -p.G[i].gradient(w));
      if (!in_subset) sign_cols.push_back(static_cast<int>(s.cols.size()) - 1);
      s.add(3, i, -p.H[i].gradient(w));
      if (in_subset) sign_cols.push_back(static_cast<int>(s.cols.size()) - 1);
    }

    const int nc = static_cast<int>(s.J.cols());
    Vec y = Vec::Zero(nc);
    if (nc > 0) {
      // min ½||J y + ∇f||² s.t. y_j >= 0 on the sign-constrained columns.
      QpData q;
      q.H = s.J.transpose() * s.J + 1e-12 * Mat::Identity(nc, nc);
      q.c = s.J.transpose() * s.grad_f;
      q.A_eq.resize(0, nc);
      q.b_eq.resize(0);
      q.A_in = Mat::Zero(static_cast<int>(sign_cols.size()), nc);
      q.b_in = Vec::Zero(static_cast<int>(sign_cols.size()));
      for (size_t r = 0; r < sign_cols.size(); ++r) {
        q.A_in(static_cast<int>(r), sign_cols[r]) = -1.0;
      }
      QpSolution qs = solve_qp(q);
      if (qs.status == QpStatus::kOptimal) y = qs.x;
    }
    cert.residual = residual_of(s, y);
    cert.z = s.unpack(p, w, y);
    bool signs_ok = std::all_of(sign_cols.begin(), sign_cols.end(),
                                [&](int c) { return y[c] >= -tol; });
    cert.certified = signs_ok && cert.residual <= tol * grad_scale(s);
    out.b_stationary = out.b_stationary && cert.certified;
    out.branches.push_back(std::move(cert));
  }
  return out;
}

bool check_mpcc_ssosc(const MpccProblem& p, const PrimalDualPoint& z,
                      double tol) {
  const Vec& w = z.w;
  check_feasible(p, w, tol);
  ComplementarityPartition part = complementarity_partition(p, w, tol);
  const int d = static_cast<int>(part.i_zero_zero.size());
  if (d > 16) throw EnumerationCapError(d, 16);
  Mat hess = mpcc_lagrangian_hessian(p, z);
  double hnorm = hess.size() > 0
                     ? Eigen::JacobiSVD<Mat>(hess).singularValues()[0]
                     : 0.0;

  for (unsigned long mask = 0; mask < (1ul << d); ++mask) {
    std::vector<int> subset = subset_from_mask(part.i_zero_zero, mask);
    std::vector<Vec> rows;
    for (int i = 0; i < p.m_h(); ++i) rows.push_back(p.h[i].gradient(w));
    for (int i = 0; i < p.m_g(); ++i) {
      if (p.g[i].value(w) >= -tol && z.mu[i] > tol) {
        rows.push_back(p.g[i].gradient(w));
      }
    }
    for (int i : part.i_zero_plus) rows.push_back(p.G[i].gradient(w));
    for (int i : part.i_plus_zero) rows.push_back(p.H[i].gradient(w));
    for (int i : part.i_zero_zero) {
      bool in_subset = contains(subset, i);
      if (in_subset || z.xi[i] > tol) rows.push_back(p.G[i].gradient(w));
      if (!in_subset || z.nu[i] > tol) rows.push_back(p.H[i].gradient(w));
    }

    Mat Z;
    if (rows.empty()) {
      Z = Mat::Identity(p.n(), p.n());
    } else {
      Mat A(static_cast<int>(rows.size()), p.n());
      for (size_t r = 0; r < rows.size(); ++r) {
        A.row(static_cast<int>(r)) = rows[r].transpose();
      }
      Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
      Vec sv = svd.singularValues();
      int rank = 0;
      for (int i = 0; i < sv.size(); ++i) {
        if (sv[i] > tol * std::max(1.0, sv[0])) ++rank;
      }
      Z = svd.matrixV().rightCols(p.n() - rank);
    }
    if (Z.cols() == 0) continue;
    Mat reduced = Z.transpose() * hess * Z;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (reduced + reduced.transpose()));
    if (!(es.eigenvalues().minCoeff() > tol * hnorm)) return false;
  }
  return true;
}

UlscReport check_ulsc_pulsc(const StationarityReport& report,
                            const ComplementarityPartition& part,
                            double tol) {
  UlscReport r;
  for (int i : part.i_zero_zero) {
    double xi = report.z.xi[i];
    double nu = report.z.nu[i];
    bool xp = xi > tol, np = nu > tol;
    r.ulsc = r.ulsc && xp && np;
    r.pulsc = r.pulsc && (xp || np);
    if (xp || np) {
      r.i00_plus.push_back(i);
    } else if (std::abs(xi) <= tol && std::abs(nu) <= tol) {
      r.i00_zero.push_back(i);
    }
  }
  return r;
}

OrderEstimate estimate_order(const std::vector<double>& errors) {
  if (errors.size() < 4) {
    throw std::invalid_argument("estimate_order needs at least 4 errors");
  }
  for (double e : errors) {
    if (!(e > 0.0) || !std::isfinite(e)) {
      throw std::invalid_argument("estimate_order needs positive errors");
    }
  }
  OrderEstimate est;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  est.alpha = nan;
  est.quadratic_constant = nan;
  const int nr = static_cast<int>(errors.size()) - 1;
  for (int k = 0; k < nr; ++k) {
    double e = errors[k], e1 = errors[k + 1];
    est.ratios.push_back({k, e, e1 / e, e1 / (e * e)});
  }
  const auto& r = est.ratios;

  int fast = nr;
  while (fast > 0 && r[fast - 1].rho < 0.1) --fast;
  bool decreasing = true;
  for (int k = fast + 1; k < nr; ++k) {
    if (!(r[k].rho < r[k - 1].rho)) decreasing = false;
  }
  if (nr - fast >= 2 && decreasing) {
    est.tail_start = fast;
    double q0 = r[fast].q;
    double qmax = 0.0;
    for (int k = fast; k < nr; ++k) qmax = std::max(qmax, r[k].q);
    if (qmax <= 10.0 * q0) {
      est.classification = OrderClass::kQuadratic;
      est.quadratic_constant = qmax;
    } else {
      est.classification = OrderClass::kSuperlinear;
    }
    return est;
  }

  int slow = nr - std::max(3, (nr + 1) / 2);
  if (slow >= 0) {
    double log_sum = 0.0;
    for (int k = slow; k < nr; ++k) log_sum += std::log(r[k].rho);
    double alpha = std::exp(log_sum / (nr - slow));
    bool banded = alpha > 0.01 && alpha < 1.0;
    for (int k = slow; k < nr; ++k) {
      if (std::abs(r[k].rho - alpha) > 0.2 * alpha) banded = false;
    }
    if (banded) {
      est.tail_start = slow;
      est.classification = OrderClass::kLinear;
      est.alpha = alpha;
      return est;
    }
  }
  est.tail_start = std::max(0, slow);
  return est;
}

ContractionFit fit_contraction(const std::vector<double>& errors) {
  std::vector<std::pair<double, double>> pts;  // (x, ρ) with x = e_{k+1}²/e_k
  for (size_t k = 0; k + 1 < errors.size(); ++k) {
    if (errors[k] <= 0.0) break;
    pts.emplace_back(errors[k + 1] * errors[k + 1] / errors[k],
                     errors[k + 1] / errors[k]);
  }
  ContractionFit fit;
  if (pts.empty()) return fit;
  size_t half = std::max<size_t>(1, (pts.size() + 1) / 2);
  pts.erase(pts.begin(), pts.end() - static_cast<long>(half));
  fit.pairs = static_cast<int>(pts.size());

  auto mean_rho = [&]() {
    double s = 0.0;
    for (auto& pt : pts) s += pt.second;
    return s / pts.size();
  };
  if (pts.size() == 1) {
    fit.alpha = pts[0].second;
    return fit;
  }
  Mat A(pts.size(), 2);
  Vec b(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    A(i, 0) = 1.0;
    A(i, 1) = pts[i].first;
    b[i] = pts[i].second;
  }
  Vec x = A.completeOrthogonalDecomposition().solve(b);
  if (x[1] < 0.0) {
    fit.alpha = mean_rho();
    fit.beta = 0.0;
  } else if (x[0] < 0.0) {
    double xx = A.col(1).squaredNorm();
    fit.alpha = 0.0;
    fit.beta = xx > 0.0 ? A.col(1).dot(b) / xx : 0.0;
  } else {
    fit.alpha = x[0];
    fit.beta = x[1];
  }
  return fit;
}

std::vector<double> error_sequence(const SolveTrace& trace) {
  std::vector<double> out;
  for (const auto& rec : trace.records) {
    if (!rec.err_to_ref) break;
    out.push_back(*rec.err_to_ref);
    if (*rec.err_to_ref == 0.0) break;
  }
  return out;
}

StabilizationReport stabilization_report(const SolveTrace& trace,
                                         const MpccProblem& p,
                                         const PrimalDualPoint& reference,
                                         double tol) {
  StationarityReport cls = classify_stationarity(p, reference.w, tol);
  if (cls.cls != StationarityClass::kS) {
    throw std::invalid_argument("reference point is " + to_string(cls.cls) +
                                "-stationary, not S-stationary");
  }
  PrimalDualPoint ref = cls.z;
  if (reference.mu.size() == p.m_g()) ref.mu = reference.mu;
  if (reference.xi.size() == p.m()) ref.xi = reference.xi;
  if (reference.nu.size() == p.m()) ref.nu = reference.nu;

  StabilizationReport rep;
  rep.ref_partition = cls.partition;
  ActiveSets ref_sets = active_sets(p, ref.w, ref.mu, tol);
  rep.ref_active = ref_sets.active;
  rep.ref_strict = ref_sets.strictly_active;
  rep.ref_weak = ref_sets.weakly_active;
  // I00 split on the reference multipliers.
  StationarityReport with_ref = cls;
  with_ref.z = ref;
  UlscReport split = check_ulsc_pulsc(with_ref, cls.partition, tol);
  rep.ref_i00_plus = split.i00_plus;
  rep.ref_i00_zero = split.i00_zero;
  const auto& rp = rep.ref_partition;

  for (size_t k = 1; k < trace.records.size(); ++k) {
    const TraceRecord& prev = trace.records[k - 1];
    const TraceRecord& cur = trace.records[k];
    if (!prev.has_step) break;
    StabilizationRow row;
    row.k = static_cast<int>(k);
    row.g_active = prev.qp_active;
    row.qp_partition = prev.qp_partition;

    std::vector<int> strict_k;
    for (int i : row.g_active) {
      if (cur.z.mu[i] > tol) strict_k.push_back(i);
    }
    std::sort(strict_k.begin(), strict_k.end());
    row.active_chain = strict_k == rep.ref_strict &&
                       subset_of(rep.ref_strict, row.g_active) &&
                       subset_of(row.g_active,
                                 set_union(rep.ref_strict, rep.ref_weak));
    const auto& qp = row.qp_partition;
    row.i0p_chain =
        subset_of(rp.i_zero_plus, qp.i_zero_plus) &&
        subset_of(qp.i_zero_plus, set_union(rp.i_zero_plus, rep.ref_i00_zero));
    row.ip0_chain =
        subset_of(rp.i_plus_zero, qp.i_plus_zero) &&
        subset_of(qp.i_plus_zero, set_union(rp.i_plus_zero, rep.ref_i00_zero));
    row.i00_chain = subset_of(rep.ref_i00_plus, qp.i_zero_zero) &&
                    subset_of(qp.i_zero_zero,
                              set_union(rep.ref_i00_plus, rep.ref_i00_zero));
    rep.rows.push_back(std::move(row));
  }

  auto first_from = [&](auto holds) {
    int from = -1;
    for (auto it = rep.rows.rbegin(); it != rep.rows.rend(); ++it) {
      if (!holds(*it)) break;
      from = it->k;
    }
    return from;
  };
  rep.active_chain_from =
      first_from([](const StabilizationRow& r) { return r.active_chain; });
  rep.i0p_chain_from =
      first_from([](const StabilizationRow& r) { return r.i0p_chain; });
  rep.ip0_chain_from =
      first_from([](const StabilizationRow& r) { return r.ip0_chain; });
  rep.i00_chain_from =
      first_from([](const StabilizationRow& r) { return r.i00_chain; });

  auto identify = [&](std::string kind, int index, auto in_row) {
    IndexIdentification id;
    id.kind = std::move(kind);
    id.index = index;
    id.asymptotic_only = std::none_of(rep.rows.begin(), rep.rows.end(), in_row);
    id.first_permanent = first_from(in_row);
    rep.indices.push_back(std::move(id));
  };
  for (int i : rep.ref_active) {
    identify("g", i, [i](const StabilizationRow& r) {
      return contains(r.g_active, i);
    });
  }
  for (int i : rp.i_zero_plus) {
    identify("pair", i, [i](const StabilizationRow& r) {
      return contains(r.qp_partition.i_zero_plus, i);
    });
  }
  for (int i : rp.i_plus_zero) {
    identify("pair", i, [i](const StabilizationRow& r) {
      return contains(r.qp_partition.i_plus_zero, i);
    });
  }
  for (int i : rp.i_zero_zero) {
    identify("pair", i, [i](const StabilizationRow& r) {
      return contains(r.qp_partition.i_zero_zero, i);
    });
  }
  return rep;
}

}  // namespace mpcc
