#include "mpcc/qpcc.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mpcc {

QpccData linearize(const MpccProblem& p, const PrimalDualPoint& z,
                   const Mat& hessian) {
  const int n = p.n();
  if (z.w.size() != n) throw std::invalid_argument("linearize: bad point");
  if (hessian.rows() != n || hessian.cols() != n) {
    throw std::invalid_argument("linearize: Hessian has the wrong size");
  }
  QpccData d;
  d.hessian = hessian;
  d.gradient = p.f.gradient(z.w);
  d.J_h = jacobian(p.h, z.w, n);
  d.h = values(p.h, z.w);
  d.J_g = jacobian(p.g, z.w, n);
  d.g = values(p.g, z.w);
  d.J_G = jacobian(p.G, z.w, n);
  d.G = values(p.G, z.w);
  d.J_H = jacobian(p.H, z.w, n);
  d.H = values(p.H, z.w);
  return d;
}

QpData branch_qp(const QpccData& d, const BranchAssignment& a) {
  const int n = d.n();
  const int m = d.m();
  const int mh = static_cast<int>(d.h.size());
  const int mg = static_cast<int>(d.g.size());
  if (static_cast<int>(a.size()) != m) {
    throw std::invalid_argument("branch assignment length mismatch");
  }
  QpData q;
  q.H = d.hessian;
  q.c = d.gradient;
  q.A_eq.resize(mh + m, n);
  q.b_eq.resize(mh + m);
  q.A_in.resize(mg + m, n);
  q.b_in.resize(mg + m);
  if (mh > 0) {
    q.A_eq.topRows(mh) = d.J_h;
    q.b_eq.head(mh) = d.h;
  }
  if (mg > 0) {
    q.A_in.topRows(mg) = d.J_g;
    q.b_in.head(mg) = d.g;
  }
  for (int i = 0; i < m; ++i) {
    if (a[i] == Side::kG) {
      q.A_eq.row(mh + i) = d.J_G.row(i);
      q.b_eq[mh + i] = d.G[i];
      q.A_in.row(mg + i) = -d.J_H.row(i);
      q.b_in[mg + i] = -d.H[i];
    } else {
      q.A_eq.row(mh + i) = d.J_H.row(i);
      q.b_eq[mh + i] = d.H[i];
      q.A_in.row(mg + i) = -d.J_G.row(i);
      q.b_in[mg + i] = -d.G[i];
    }
  }
  return q;
}

namespace {

BranchAssignment assignment(unsigned long bits, int m) {
  BranchAssignment a(m, Side::kG);
  for (int i = 0; i < m; ++i) {
    if (bits & (1ul << i)) a[i] = Side::kH;
  }
  return a;
}

std::optional<QpccSolution> solve_branch(const QpccData& d,
                                         const BranchAssignment& a,
                                         const EnumerateOptions& opts) {
  const int m = d.m();
  const int mh = static_cast<int>(d.h.size());
  const int mg = static_cast<int>(d.g.size());
  QpData q = branch_qp(d, a);
  QpSolution qs = solve_qp(q);
  if (qs.status != QpStatus::kOptimal) return std::nullopt;

  QpccSolution s;
  s.step = qs.x;
  s.lambda = qs.eq_multipliers.head(mh);
  s.mu = qs.in_multipliers.head(mg);
  s.xi.resize(m);
  s.nu.resize(m);
  s.branch = a;
  s.branches = {a};
  s.qp_active_set = qs.active;
  s.partition.tol = 0.0;
  for (int idx : qs.active) {
    if (idx < mg) s.g_active.push_back(idx);
  }
  auto in_working_set = [&](int row) {
    return std::binary_search(qs.active.begin(), qs.active.end(), row);
  };
  s.s_stationary = true;
  for (int i = 0; i < m; ++i) {
    double eq = qs.eq_multipliers[mh + i];
    double in = qs.in_multipliers[mg + i];
    // The partition follows the working set. The sign test also covers a
    // weakly active other side (no slack, row outside the working set).
    double other = a[i] == Side::kG ? d.H[i] + d.J_H.row(i).dot(qs.x)
                                    : d.G[i] + d.J_G.row(i).dot(qs.x);
    bool in_ws = in_working_set(mg + i);
    // QP stationarity ∇f + HΔw + ... + a_eq·eq − a_other·in = 0 against
    // ∇f + HΔw − ξ∇G − ν∇H = 0.
    if (a[i] == Side::kG) {
      s.xi[i] = -eq;
      s.nu[i] = in;
      (in_ws ? s.partition.i_zero_zero : s.partition.i_zero_plus).push_back(i);
    } else {
      s.nu[i] = -eq;
      s.xi[i] = in;
      (in_ws ? s.partition.i_zero_zero : s.partition.i_plus_zero).push_back(i);
    }
    if ((in_ws || other <= 0.0) &&
        (s.xi[i] < -opts.sign_tol || s.nu[i] < -opts.sign_tol)) {
      s.s_stationary = false;
    }
  }
  s.objective = d.gradient.dot(s.step) + 0.5 * s.step.dot(d.hessian * s.step);
  return s;
}

bool same_active_sets(const QpccSolution& a, const QpccSolution& b) {
  return a.g_active == b.g_active &&
         a.partition.i_zero_plus == b.partition.i_zero_plus &&
         a.partition.i_plus_zero == b.partition.i_plus_zero &&
         a.partition.i_zero_zero == b.partition.i_zero_zero;
}

double multiplier_gap(const QpccSolution& a, const QpccSolution& b) {
  double gap = 0.0;
  auto upd = [&](const Vec& x, const Vec& y) {
    if (x.size() > 0) {
      gap = std::max(gap, (x - y).lpNorm<Eigen::Infinity>() /
                              std::max({1.0, x.lpNorm<Eigen::Infinity>(),
                                        y.lpNorm<Eigen::Infinity>()}));
    }
  };
  upd(a.lambda, b.lambda);
  upd(a.mu, b.mu);
  upd(a.xi, b.xi);
  upd(a.nu, b.nu);
  return gap;
}

std::vector<QpccSolution> merge(
    std::vector<std::optional<QpccSolution>>& results, const EnumerateOptions& opts) {
  std::vector<QpccSolution> out;
  bool any = false;
  for (auto& r : results) {
    if (!r) continue;
    any = true;
    auto dup = std::find_if(out.begin(), out.end(), [&](const QpccSolution& s) {
      return (s.step - r->step).lpNorm<Eigen::Infinity>() <= opts.dedup_tol;
    });
    if (dup == out.end()) {
      out.push_back(std::move(*r));
      continue;
    }
    if (same_active_sets(*dup, *r) && multiplier_gap(*dup, *r) > 1e-8) {
      dup->multipliers_consistent = false;
    }
    dup->branches.push_back(r->branch);
    if (!dup->s_stationary && r->s_stationary) {
      // Keep the S-stationary multipliers for this step.
      auto branches = std::move(dup->branches);
      bool consistent = dup->multipliers_consistent;
      BranchAssignment first = dup->branch;
      *dup = std::move(*r);
      dup->branch = first;
      dup->branches = std::move(branches);
      dup->multipliers_consistent = consistent;
    }
  }
  if (!any) throw SubproblemError("every branch QP of the QPCC failed");
  std::stable_sort(out.begin(), out.end(),
                   [](const QpccSolution& a, const QpccSolution& b) {
                     if (a.objective != b.objective) {
                       return a.objective < b.objective;
                     }
                     return std::lexicographical_compare(
                         a.step.data(), a.step.data() + a.step.size(),
                         b.step.data(), b.step.data() + b.step.size());
                   });
  return out;
}

std::vector<QpccSolution> enumerate(const QpccData& d,
                                    const EnumerateOptions& opts,
                                    bool parallel) {
  const int m = d.m();
  if (m > opts.cap) throw EnumerationCapError(m, opts.cap);
  const long count = 1l << m;
  std::vector<std::optional<QpccSolution>> results(count);
  if (parallel) {
#pragma omp parallel for schedule(dynamic) if (count >= 4)
    for (long b = 0; b < count; ++b) {
      results[b] = solve_branch(d, assignment(b, m), opts);
    }
  } else {
    for (long b = 0; b < count; ++b) {
      results[b] = solve_branch(d, assignment(b, m), opts);
    }
  }
  return merge(results, opts);
}

}  // namespace

std::vector<QpccSolution> solve_qpcc_enumerate(const QpccData& d,
                                               const EnumerateOptions& opts) {
  return enumerate(d, opts, opts.parallel);
}

std::vector<QpccSolution> solve_qpcc_enumerate_serial(
    const QpccData& d, const EnumerateOptions& opts) {
  return enumerate(d, opts, false);
}

StepSelection select_step(const std::vector<QpccSolution>& candidates,
                          const StepPolicy& policy) {
  if (candidates.empty()) {
    throw std::invalid_argument("select_step: no candidates");
  }
  auto has_branch = [](const QpccSolution& s, const BranchAssignment& a) {
    return std::find(s.branches.begin(), s.branches.end(), a) !=
           s.branches.end();
  };
  auto min_objective = [&]() -> StepSelection {
    // Candidates are sorted by objective.
    for (const auto& s : candidates) {
      if (s.s_stationary) return {s, false};
    }
    return {candidates.front(), true};
  };
  switch (policy.kind) {
    case StepPolicy::Kind::kMinObjective:
      return min_objective();
    case StepPolicy::Kind::kWarmBranch:
      for (const auto& s : candidates) {
        if (s.s_stationary && has_branch(s, policy.branch)) return {s, false};
      }
      return min_objective();
    case StepPolicy::Kind::kForcedBranch:
      for (const auto& s : candidates) {
        if (has_branch(s, policy.branch)) return {s, false};
      }
      throw SubproblemError("forced branch " +
                            branch_signature(policy.branch) +
                            " has no QP solution");
  }
  return min_objective();
}

}  // namespace mpcc
