#include "mpcc/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace mpcc {

Vec parse_vector(std::string_view text) {
  std::vector<double> v;
  std::string s(text);
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(cell, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != cell.size()) {
      throw std::invalid_argument("bad number '" + cell + "' in '" + s + "'");
    }
    v.push_back(x);
  }
  if (v.empty() || (!s.empty() && s.back() == ',')) {
    throw std::invalid_argument("bad vector '" + s + "'");
  }
  return Eigen::Map<Vec>(v.data(), static_cast<long>(v.size()));
}

HessianStrategy parse_hessian(std::string_view text, int n) {
  if (text == "exact") return HessianStrategy::exact_convexified();
  if (text == "exact-raw") return HessianStrategy::exact();
  if (text == "perturbed") return HessianStrategy::perturbed_identity();
  if (text == "bfgs") return HessianStrategy::bfgs();
  if (text == "gn") return HessianStrategy::gauss_newton();
  if (text.substr(0, 6) == "const:") {
    Vec d = parse_vector(text.substr(6));
    if (d.size() != n) {
      throw std::invalid_argument("const Hessian needs " + std::to_string(n) +
                                  " diagonal entries");
    }
    return HessianStrategy::constant(d.asDiagonal());
  }
  throw std::invalid_argument("unknown Hessian '" + std::string(text) + "'");
}

StepPolicy parse_policy(std::string_view text) {
  if (text == "min-obj") return StepPolicy::min_objective();
  if (text == "warm") return StepPolicy::warm({});
  if (text.substr(0, 6) == "force:") {
    return StepPolicy::forced(parse_branch(text.substr(6)));
  }
  throw std::invalid_argument("unknown policy '" + std::string(text) + "'");
}

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Vec v1(double a) { return Vec::Constant(1, a); }

const SuiteResult* find(const std::vector<SuiteResult>& rs,
                        const std::string& id) {
  for (const auto& r : rs) {
    if (r.run.id == id) return &r;
  }
  return nullptr;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double dist(const Vec& a, const Vec& b) {
  return (a - b).lpNorm<Eigen::Infinity>();
}

std::string order_name(const SuiteResult& r) {
  return r.order ? to_string(r.order->classification) : "n/a";
}

}  // namespace

std::vector<SuiteRun> paper_suite() {
  std::vector<SuiteRun> runs = {
      {"ex51-exact", "example51", "sqpcc", "exact", "min-obj", v2(2, 0)},
      {"ex51-exact-warm", "example51", "sqpcc", "exact", "warm", v2(2, 0)},
      {"ex51-bfgs", "example51", "sqpcc", "bfgs", "min-obj", v2(2, 0)},
      {"ex51-perturbed", "example51", "sqpcc", "perturbed", "min-obj", v2(2, 0)},
      {"ex51-const", "example51", "sqpcc", "const:5,10", "min-obj", v2(2, 0)},
      {"leyffer-sqp", "leyffer", "sqp", "exact-raw", "min-obj", v2(0, 2)},
      {"leyffer-sqpcc", "leyffer", "sqpcc", "exact", "min-obj", v2(0, 2)},
      {"leyffer-spurious", "leyffer", "sqpcc", "exact", "force:G", v2(0, 0.5)},
      {"ex54-a", "example54", "sqpcc", "exact", "warm", v2(0.3, 0)},
      {"ex54-b", "example54", "sqpcc", "exact", "warm", v2(0, 0.3)},
      {"ex54-gn", "example54", "sqpcc", "gn", "min-obj", v2(0.3, 0)},
      {"sqp-weak", "sqp-weak", "sqp", "exact-raw", "min-obj", v1(0.4)},
      {"sqp-strict", "sqp-strict", "sqp", "exact-raw", "min-obj", v1(0.4)},
  };
  return runs;
}

SuiteResult execute(const SuiteRun& run) {
  SuiteResult res;
  res.run = run;
  RegistryEntry e = registry_entry(run.problem);
  const MpccProblem& p = e.problem;
  SolveOptions opts;
  opts.hessian = parse_hessian(run.hessian, p.n());
  opts.policy = parse_policy(run.policy);
  opts.max_iterations = run.max_iterations;
  bool with_reference = run.method == "sqpcc" || e.nlp;
  if (with_reference) opts.reference = e.reference;

  auto start = std::chrono::steady_clock::now();
  if (run.method == "sqp") {
    NlpProblem nlp = nlp_reformulation(p);
    res.trace = sqp_solve(nlp, PrimalDualPoint::primal(nlp, run.x0), opts);
  } else {
    res.trace = sqpcc_solve(p, PrimalDualPoint::primal(p, run.x0), opts);
  }
  res.seconds = std::chrono::duration<double>(
                    std::chrono::steady_clock::now() - start)
                    .count();

  res.errors = error_sequence(res.trace);
  std::vector<double> positive;
  for (double x : res.errors) {
    if (x > 0.0) positive.push_back(x);
  }
  if (positive.size() >= 4) res.order = estimate_order(positive);
  res.contraction = fit_contraction(res.errors);

  const Vec& w = res.trace.final_point().w;
  try {
    res.limit_class = to_string(classify_stationarity(p, w, 1e-8).cls);
  } catch (const std::exception& ex) {
    res.limit_class = std::string("unclassified: ") + ex.what();
  }
  if (with_reference && res.trace.status == SolveStatus::kConverged &&
      dist(w, e.reference.w) <= 1e-8) {
    res.stabilization = stabilization_report(res.trace, p, e.reference);
  }
  return res;
}

std::string example51_discrepancy_note() {
  RegistryEntry e = registry_entry("example51");
  StationarityReport r = classify_stationarity(e.problem, Vec::Zero(2), 1e-8);
  return "example51 at (0,0): solved multipliers xi=" + num(r.z.xi[0]) +
         ", nu=" + num(r.z.nu[0]) + " (class " + to_string(r.cls) +
         "). The value xi=-1 with class C sometimes quoted for this point "
         "contradicts df/dw1(0,0)=1 under the sign convention "
         "L = f - xi*G - nu*H.";
}

std::vector<CriterionResult> evaluate_criteria(
    const std::vector<SuiteResult>& rs) {
  std::vector<CriterionResult> out;

  if (const SuiteResult* r = find(rs, "ex51-exact")) {
    CriterionResult c{1, "example51 exact Hessian from (2,0)", true, ""};
    const auto& recs = r->trace.records;
    double err = dist(r->trace.final_point().w, v2(0, 1));
    int turn = 0;
    while (turn < static_cast<int>(recs.size()) &&
           std::abs(recs[turn].z.w[1]) <= 1e-12) {
      ++turn;
    }
    bool later_on_axis = true;
    for (size_t k = turn; k < recs.size(); ++k) {
      later_on_axis = later_on_axis && std::abs(recs[k].z.w[0]) <= 1e-12;
    }
    c.pass = r->trace.status == SolveStatus::kConverged && err <= 1e-10 &&
             r->trace.iterations() <= 15 && order_name(*r) == "quadratic" &&
             turn >= 2 && later_on_axis && r->seconds < 1.0;
    c.detail = "iterations " + std::to_string(r->trace.iterations()) +
               ", error " + num(err) + ", order " + order_name(*r) + ", " +
               std::to_string(turn) + " iterates on w2=0, " +
               num(r->seconds) + " s";
    out.push_back(c);
  }

  const SuiteResult* bfgs = find(rs, "ex51-bfgs");
  const SuiteResult* pert = find(rs, "ex51-perturbed");
  const SuiteResult* cnst = find(rs, "ex51-const");
  if (bfgs && pert && cnst) {
    CriterionResult c{2, "example51 Hessian variants", true, ""};
    bool lin_p = order_name(*pert) == "linear";
    bool lin_c = order_name(*cnst) == "linear";
    c.pass = order_name(*bfgs) == "superlinear" && lin_p && lin_c &&
             cnst->order->alpha > pert->order->alpha;
    c.detail = "bfgs " + order_name(*bfgs) + ", perturbed " +
               order_name(*pert) +
               (lin_p ? " alpha " + num(pert->order->alpha) : "") +
               ", const " + order_name(*cnst) +
               (lin_c ? " alpha " + num(cnst->order->alpha) : "");
    out.push_back(c);
  }

  const SuiteResult* lsqp = find(rs, "leyffer-sqp");
  const SuiteResult* lcc = find(rs, "leyffer-sqpcc");
  if (lsqp && lcc) {
    CriterionResult c{3, "leyffer SQP baseline vs SQPCC", true, ""};
    double e_sqp = dist(lsqp->trace.final_point().w, v2(0, 0));
    double e_cc = dist(lcc->trace.final_point().w, v2(1, 0));
    int first_h = -1;
    for (const auto& rec : lcc->trace.records) {
      if (rec.has_step && rec.branch[0] == Side::kH) {
        first_h = rec.k;
        break;
      }
    }
    int after = first_h < 0 ? -1 : lcc->trace.iterations() - (first_h + 1);
    c.pass = e_sqp <= 1e-8 && lsqp->limit_class == "M" &&
             lcc->trace.status == SolveStatus::kConverged && e_cc <= 1e-10 &&
             after == 1;
    c.detail = "sqp limit error " + num(e_sqp) + " class " +
               lsqp->limit_class + "; sqpcc error " + num(e_cc) +
               ", first H step at k=" + std::to_string(first_h) + ", " +
               std::to_string(after) + " further iteration(s)";
    out.push_back(c);
  }

  if (const SuiteResult* r = find(rs, "leyffer-spurious")) {
    CriterionResult c{4, "leyffer forced G-side map", true, ""};
    const auto& recs = r->trace.records;
    int good = 0;
    for (size_t k = 0; k + 1 < recs.size(); ++k) {
      double w2 = recs[k].z.w[1];
      double want = 3 * w2 * w2 / (6 * w2 + 2);
      bool ok = recs[k].has_step && recs[k].step_s_stationary &&
                std::abs(recs[k + 1].z.w[1] - want) <= 1e-12 &&
                std::abs(recs[k + 1].z.w[0]) <= 1e-12;
      if (!ok) break;
      ++good;
    }
    c.pass = good >= 6;
    c.detail = std::to_string(good) + " consecutive matching S-flagged steps";
    out.push_back(c);
  }

  const SuiteResult* weak = find(rs, "sqp-weak");
  const SuiteResult* strict = find(rs, "sqp-strict");
  if (weak && strict) {
    CriterionResult c{5, "SQP iterate map and identification", true, ""};
    const auto& recs = weak->trace.records;
    bool map_ok = weak->trace.status == SolveStatus::kConverged;
    bool empty = true;
    for (size_t k = 0; k + 1 < recs.size(); ++k) {
      double w = recs[k].z.w[0];
      double want = 4 * w * w * w / (6 * w * w + 1);
      map_ok = map_ok && std::abs(recs[k + 1].z.w[0] - want) <= 1e-12;
      empty = empty && recs[k].qp_active.empty();
    }
    int ident = -1;
    if (strict->stabilization) {
      for (const auto& id : strict->stabilization->indices) {
        if (id.kind == "g" && id.index == 0 && !id.asymptotic_only) {
          ident = id.first_permanent;
        }
      }
    }
    c.pass = map_ok && empty && ident >= 1;
    c.detail = std::string("map ") + (map_ok ? "matches" : "fails") +
               ", active sets " + (empty ? "empty" : "nonempty") +
               "; strict variant identifies {0} at k=" +
               std::to_string(ident);
    out.push_back(c);
  }

  {
    CriterionResult c{6, "classifier table", true, ""};
    RegistryEntry ley = registry_entry("leyffer");
    RegistryEntry e54 = registry_entry("example54");
    RegistryEntry e51 = registry_entry("example51");
    auto a = classify_stationarity(ley.problem, v2(1, 0), 1e-8);
    auto b = classify_stationarity(ley.problem, v2(0, 0), 1e-8);
    auto d = classify_stationarity(e54.problem, v2(0, 0), 1e-8);
    auto e = classify_stationarity(e51.problem, v2(0, 0), 1e-8);
    Vec g = e51.problem.f.gradient(v2(0, 0));
    bool pa = a.cls == StationarityClass::kS && std::abs(a.z.nu[0]) <= 1e-10;
    bool pb = b.cls == StationarityClass::kM &&
              std::abs(b.z.xi[0] + 2) <= 1e-10 && std::abs(b.z.nu[0]) <= 1e-10;
    bool pd = d.cls == StationarityClass::kS && std::abs(d.z.xi[0]) <= 1e-10 &&
              std::abs(d.z.nu[0]) <= 1e-10 &&
              !check_ulsc_pulsc(d, d.partition).pulsc;
    bool pe = std::abs(e.z.xi[0] - g[0]) <= 1e-10 &&
              std::abs(e.z.nu[0] - g[1]) <= 1e-10;
    c.pass = pa && pb && pd && pe;
    c.detail = "leyffer(1,0) " + to_string(a.cls) + ", leyffer(0,0) " +
               to_string(b.cls) + " xi=" + num(b.z.xi[0]) + ", example54 " +
               to_string(d.cls) + ", example51(0,0) " + to_string(e.cls) +
               " xi=" + num(e.z.xi[0]) + " nu=" + num(e.z.nu[0]) +
               " (xi=-1 and class C would contradict df/dw1=1)";
    out.push_back(c);
  }

  const SuiteResult* ea = find(rs, "ex54-a");
  const SuiteResult* eb = find(rs, "ex54-b");
  if (ea && eb) {
    CriterionResult c{9, "example54 branch maps and stabilization", true, ""};
    auto check = [](const SuiteResult& r, int moving) {
      const auto& recs = r.trace.records;
      bool ok = r.trace.status == SolveStatus::kConverged &&
                r.trace.final_point().w.lpNorm<Eigen::Infinity>() <= 1e-10;
      for (size_t k = 0; k + 1 < recs.size(); ++k) {
        double t = recs[k].z.w[moving];
        double want = 4 * t * t * t / (6 * t * t + 1);
        ok = ok && std::abs(recs[k + 1].z.w[moving] - want) <= 1e-12 &&
             std::abs(recs[k + 1].z.w[1 - moving]) <= 1e-12;
      }
      bool asym = false;
      if (r.stabilization) {
        for (const auto& row : r.stabilization->rows) {
          ok = ok && row.qp_partition.i_zero_zero.empty();
        }
        for (const auto& id : r.stabilization->indices) {
          if (id.kind == "pair" && id.index == 0) asym = id.asymptotic_only;
        }
        ok = ok && r.stabilization->ref_partition.i_zero_zero ==
                       std::vector<int>{0};
      }
      return ok && asym;
    };
    bool pa = check(*ea, 0), pb = check(*eb, 1);
    c.pass = pa && pb;
    c.detail = std::string("from (0.3,0) ") + (pa ? "ok" : "fails") +
               ", from (0,0.3) " + (pb ? "ok" : "fails") +
               "; biactive pair identified only in the limit";
    out.push_back(c);
  }

  {
    CriterionResult c{10, "contraction alpha on exact-Hessian runs", true, ""};
    int counted = 0;
    double worst = 0.0;
    for (const auto& r : rs) {
      if (r.run.hessian != "exact" && r.run.hessian != "exact-raw") continue;
      if (r.trace.status != SolveStatus::kConverged) continue;
      if (r.errors.empty() || r.errors.back() > 1e-8) continue;
      ++counted;
      worst = std::max(worst, r.contraction.alpha);
      if (r.contraction.alpha > 0.1) {
        c.pass = false;
        c.detail += r.run.id + " alpha " + num(r.contraction.alpha) + "; ";
      }
    }
    if (counted > 0) {
      c.detail += std::to_string(counted) + " runs, largest alpha " + num(worst);
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace mpcc
