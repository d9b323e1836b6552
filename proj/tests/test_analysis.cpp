#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mpcc/analysis.hpp"
#include "mpcc/registry.hpp"
#include "mpcc/solver.hpp"
#include "oracles.hpp"

using namespace mpcc;

namespace {

std::vector<double> positive(const std::vector<double>& e) {
  std::vector<double> out;
  for (double x : e) {
    if (x > 0.0) out.push_back(x);
  }
  return out;
}

Vec v1(double a) { return (Vec(1) << a).finished(); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

MpccProblem reg(const char* name) { return registry_entry(name).problem; }

NlpProblem nlp_of(const RegistryEntry& e) {
  std::vector<Expr> g;
  for (const auto& f : e.problem.g) g.push_back(f.expr());
  return make_nlp(e.problem.vars, e.problem.f.expr(), {}, g);
}

SolveTrace run(const RegistryEntry& e, const Vec& x0, HessianStrategy h,
               StepPolicy pol = StepPolicy::min_objective()) {
  SolveOptions o;
  o.hessian = std::move(h);
  o.policy = std::move(pol);
  o.reference = e.reference;
  if (e.nlp) return sqp_solve(nlp_of(e), PrimalDualPoint::primal(e.problem, x0), o);
  return sqpcc_solve(e.problem, PrimalDualPoint::primal(e.problem, x0), o);
}

std::vector<double> geometric(double c, double a, int n) {
  std::vector<double> e;
  for (int k = 0; k < n; ++k) e.push_back(c * std::pow(a, k));
  return e;
}

int rank(StationarityClass c) { return static_cast<int>(c); }

}  // namespace

TEST_CASE("classify_stationarity: examples") {
  StationarityReport a = classify_stationarity(reg("leyffer"), v2(0, 0));
  CHECK(a.cls == StationarityClass::kM);
  CHECK(std::abs(a.z.xi[0] + 2) <= 1e-10);
  CHECK(std::abs(a.z.nu[0]) <= 1e-10);
  REQUIRE(a.biactive.size() == 1);
  CHECK_FALSE(a.biactive[0].s);
  CHECK(a.biactive[0].m);
  CHECK(a.mpcc_licq);
  REQUIRE(a.b_stationary.has_value());
  CHECK_FALSE(*a.b_stationary);

  StationarityReport b = classify_stationarity(reg("leyffer"), v2(1, 0));
  CHECK(b.cls == StationarityClass::kS);
  CHECK(std::abs(b.z.nu[0]) <= 1e-10);
  CHECK(b.z.xi[0] == 0.0);
  CHECK(b.residual <= 1e-12);

  StationarityReport c = classify_stationarity(reg("example51"), v2(0, 0));
  CHECK(std::abs(c.z.xi[0] - 1) <= 1e-10);
  CHECK(std::abs(c.z.nu[0] + 6) <= 1e-10);
  CHECK(c.cls == StationarityClass::kA);

  StationarityReport d = classify_stationarity(reg("example54"), v2(0, 0));
  CHECK(d.cls == StationarityClass::kS);
  CHECK(std::abs(d.z.xi[0]) <= 1e-12);
  CHECK(std::abs(d.z.nu[0]) <= 1e-12);
  CHECK(to_string(StationarityClass::kNotStationary) == "not-stationary");
}

TEST_CASE("classify_stationarity: sign classes on synthetic biactive pairs") {
  // f = a*w1 + b*w2 with comp w1, w2 at the origin gives ξ = a, ν = b.
  struct Case {
    double a, b;
    StationarityClass want;
  };
  for (const Case& c : {Case{1, 2, StationarityClass::kS},
                        Case{0, -3, StationarityClass::kM},
                        Case{-2, 0, StationarityClass::kM},
                        // C test passes, A test fails: the chain stops at W.
                        Case{-1, -1, StationarityClass::kW},
                        Case{2, -1, StationarityClass::kA}}) {
    MpccProblem p = make_mpcc({"w1", "w2"},
                              Expr::constant(c.a) * Expr::variable(0) +
                                  Expr::constant(c.b) * Expr::variable(1),
                              {}, {}, {Expr::variable(0)}, {Expr::variable(1)});
    StationarityReport r = classify_stationarity(p, v2(0, 0));
    INFO(c.a, " ", c.b);
    CHECK(r.cls == c.want);
  }
  // Not W-stationary: an inactive pair leaves ∇f unexplained.
  MpccProblem p = parse_model("var a, b; minimize a + b; subject to: comp a, b - 1;");
  CHECK(classify_stationarity(p, v2(0, 2)).cls == StationarityClass::kNotStationary);
  MpccProblem q = parse_model(
      "var a, b; minimize a + b; subject to: comp a, b;");
  CHECK(classify_stationarity(q, v2(0, 0)).cls == StationarityClass::kS);
  // W but not A: ξ and ν both negative.
  MpccProblem n = parse_model(
      "var a, b; minimize -a - b; subject to: comp a, b;");
  StationarityReport rn = classify_stationarity(n, v2(0, 0));
  CHECK(rn.cls == StationarityClass::kW);
  REQUIRE(rn.biactive.size() == 1);
  CHECK(rn.biactive[0].c);
  CHECK_FALSE(rn.biactive[0].a);
  CHECK_THROWS_AS(classify_stationarity(q, v2(1, 1)), InfeasiblePointError);
}

TEST_CASE("property: classifier hierarchy is monotone") {
  oracle::Rng rng(13);
  for (int t = 0; t < 500; ++t) {
    double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
    if (t % 5 == 0) a = 0;
    if (t % 7 == 0) b = 0;
    MpccProblem p = make_mpcc({"w1", "w2"},
                              Expr::constant(a) * Expr::variable(0) +
                                  Expr::constant(b) * Expr::variable(1),
                              {}, {}, {Expr::variable(0)}, {Expr::variable(1)});
    StationarityReport r = classify_stationarity(p, v2(0, 0));
    REQUIRE(r.biactive.size() == 1);
    const auto& d = r.biactive[0];
    if (d.s) CHECK(d.m);
    if (d.m) CHECK(d.c);
    if (d.m) CHECK(d.a);
    // The class is the strongest level whose test and every weaker test pass.
    int want = !d.a   ? rank(StationarityClass::kW)
               : !d.c ? rank(StationarityClass::kA)
               : !d.m ? rank(StationarityClass::kC)
               : !d.s ? rank(StationarityClass::kM)
                      : rank(StationarityClass::kS);
    CHECK(rank(r.cls) == want);
  }
}

TEST_CASE("check_b_stationarity: examples") {
  BStationarityReport a = check_b_stationarity(reg("leyffer"), v2(1, 0));
  CHECK(a.b_stationary);
  CHECK(a.branches.size() == 1);
  BStationarityReport b = check_b_stationarity(reg("leyffer"), v2(0, 0));
  CHECK_FALSE(b.b_stationary);
  CHECK(b.branches.size() == 2);
  BStationarityReport c = check_b_stationarity(reg("example54"), v2(0, 0));
  CHECK(c.b_stationary);
  for (const auto& br : c.branches) {
    CHECK(br.certified);
    CHECK(std::abs(br.z.xi[0]) <= 1e-10);
    CHECK(std::abs(br.z.nu[0]) <= 1e-10);
  }
  CHECK_THROWS_AS(check_b_stationarity(reg("leyffer"), v2(0, 0), 1e-8, 0),
                  EnumerationCapError);
}

TEST_CASE("check_mpcc_licq: examples") {
  oracle::Rng rng(2);
  MpccProblem ley = reg("leyffer");
  for (int t = 0; t < 50; ++t) {
    Vec w = t % 3 == 0 ? v2(0, 0) : t % 3 == 1 ? v2(0, rng.uniform(0, 3))
                                               : v2(rng.uniform(0, 3), 0);
    CHECK(check_mpcc_licq(ley, w).holds);
  }
  LicqReport e = check_mpcc_licq(reg("example51"), v2(0, 0));
  CHECK(e.holds);
  CHECK(e.rank == 2);
  CHECK(e.columns == 2);
  MpccProblem dup = parse_model(
      "var a, b; minimize a^2 + b^2; subject to: a - 1 <= 0; 1 - a <= 0;");
  LicqReport d = check_mpcc_licq(dup, v2(1, 0));
  CHECK_FALSE(d.holds);
  CHECK(d.rank == 1);
  CHECK(d.columns == 2);
}

TEST_CASE("check_mpcc_ssosc: examples") {
  StationarityReport a = classify_stationarity(reg("leyffer"), v2(1, 0));
  CHECK(check_mpcc_ssosc(reg("leyffer"), a.z));
  StationarityReport b = classify_stationarity(reg("example54"), v2(0, 0));
  CHECK(check_mpcc_ssosc(reg("example54"), b.z));
  MpccProblem bad = parse_model(
      "var w1, w2; minimize -w1^2 - w2^2; subject to: comp w1, w2;");
  StationarityReport c = classify_stationarity(bad, v2(0, 0));
  REQUIRE(c.cls == StationarityClass::kS);
  CHECK_FALSE(check_mpcc_ssosc(bad, c.z));
  // Positive ξ puts G into the cone's equality set on every branch.
  MpccProblem curved = parse_model(
      "var w1, w2; minimize w1 - w2^2; subject to: comp w1, w2;");
  StationarityReport d = classify_stationarity(curved, v2(0, 0));
  REQUIRE(d.cls == StationarityClass::kS);
  CHECK_FALSE(check_mpcc_ssosc(curved, d.z));
}

TEST_CASE("check_ulsc_pulsc: examples") {
  StationarityReport a = classify_stationarity(reg("example54"), v2(0, 0));
  UlscReport u = check_ulsc_pulsc(a, a.partition);
  CHECK_FALSE(u.ulsc);
  CHECK_FALSE(u.pulsc);
  CHECK(u.i00_zero == std::vector<int>{0});
  CHECK(u.i00_plus.empty());

  StationarityReport b = classify_stationarity(reg("leyffer"), v2(1, 0));
  UlscReport v = check_ulsc_pulsc(b, b.partition);
  CHECK(v.ulsc);
  CHECK(v.pulsc);

  MpccProblem syn = parse_model("var w1, w2; minimize w1; subject to: comp w1, w2;");
  StationarityReport c = classify_stationarity(syn, v2(0, 0));
  REQUIRE(c.cls == StationarityClass::kS);
  CHECK(std::abs(c.z.xi[0] - 1) <= 1e-12);
  UlscReport w = check_ulsc_pulsc(c, c.partition);
  CHECK_FALSE(w.ulsc);
  CHECK(w.pulsc);
  CHECK(w.i00_plus == std::vector<int>{0});
}

TEST_CASE("property: B-stationarity equals S under MPCC-LICQ") {
  oracle::Rng rng(21);
  int checked = 0, s_count = 0;
  for (const auto& name : registry_names()) {
    RegistryEntry e = registry_entry(name);
    if (e.nlp) continue;
    std::vector<Vec> pts = {e.reference.w, v2(0, 0)};
    for (int t = 0; t < 60; ++t) {
      pts.push_back(rng.integer(0, 1) ? v2(0, rng.uniform(0, 2))
                                      : v2(rng.uniform(0, 2), 0));
    }
    for (const Vec& w : pts) {
      if (!check_mpcc_licq(e.problem, w).holds) continue;
      StationarityReport r = classify_stationarity(e.problem, w);
      bool b = check_b_stationarity(e.problem, w).b_stationary;
      CHECK(b == (r.cls == StationarityClass::kS));
      REQUIRE(r.b_stationary.has_value());
      CHECK(*r.b_stationary == b);
      ++checked;
      s_count += b;
    }
  }
  CHECK(checked > 100);
  CHECK(s_count >= 3);
}

TEST_CASE("property: multipliers do not depend on constraint ordering") {
  const char* forward =
      "var a, b, c, d;\n"
      "minimize (a-1)^2 + (b+2)^2 + (c-0.5)^2 + a*b + d^2;\n"
      "subject to:\n"
      "  a + b + c - d == 0;\n"
      "  a - c - 3 <= 0;\n"
      "  comp a, b + 1;\n"
      "  comp c, a + b;\n";
  const char* reversed =
      "var d, c, a, b;\n"
      "minimize (a-1)^2 + (b+2)^2 + (c-0.5)^2 + a*b + d^2;\n"
      "subject to:\n"
      "  a - c - 3 <= 0;\n"
      "  c + b + a - d == 0;\n"
      "  comp c, a + b;\n"
      "  comp a, b + 1;\n";
  MpccProblem p = parse_model(forward), q = parse_model(reversed);
  oracle::Rng rng(77);
  int compared = 0, biactive = 0;
  for (int t = 0; t < 300; ++t) {
    // A feasible point on a random branch of each pair.
    bool g_side = rng.integer(0, 1), on_sum = rng.integer(0, 1);
    double a, b, c;
    if (on_sum) {
      a = g_side ? 0.0 : 1.0;
      b = -a;
      c = rng.integer(0, 2) == 0 ? 0.0 : rng.uniform(0, 2);
    } else {
      c = 0.0;
      a = g_side ? 0.0 : rng.uniform(1, 3);
      b = g_side ? rng.uniform(0, 2) : -1.0;
    }
    if (a - c - 3 > 0) continue;
    double d = a + b + c;
    Vec w = (Vec(4) << a, b, c, d).finished();
    if (!check_mpcc_licq(p, w).holds) continue;
    StationarityReport r = classify_stationarity(p, w);
    StationarityReport s =
        classify_stationarity(q, (Vec(4) << d, c, a, b).finished());
    CHECK(std::abs(r.z.lambda[0] - s.z.lambda[0]) <= 1e-8);
    CHECK(std::abs(r.z.mu[0] - s.z.mu[0]) <= 1e-8);
    CHECK(std::abs(r.z.xi[0] - s.z.xi[1]) <= 1e-8);
    CHECK(std::abs(r.z.nu[0] - s.z.nu[1]) <= 1e-8);
    CHECK(std::abs(r.z.xi[1] - s.z.xi[0]) <= 1e-8);
    CHECK(std::abs(r.z.nu[1] - s.z.nu[0]) <= 1e-8);
    CHECK(r.cls == s.cls);
    ++compared;
    biactive += !r.partition.i_zero_zero.empty();
  }
  CHECK(compared >= 100);
  CHECK(biactive >= 10);
}

TEST_CASE("estimate_order: examples") {
  OrderEstimate q = estimate_order({1e-1, 1e-2, 1e-4, 1e-8, 1e-16});
  CHECK(q.classification == OrderClass::kQuadratic);
  CHECK(q.quadratic_constant == doctest::Approx(1.0));
  OrderEstimate l = estimate_order(geometric(1, 0.5, 11));
  CHECK(l.classification == OrderClass::kLinear);
  CHECK(l.alpha == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(std::isnan(q.alpha));
  CHECK(l.ratios.size() == 10);

  // e_{k+1} = e_k^1.5: ρ falls below 0.1 but q grows.
  std::vector<double> s = {1e-1};
  for (int k = 0; k < 5; ++k) s.push_back(std::pow(s.back(), 1.5));
  CHECK(estimate_order(s).classification == OrderClass::kSuperlinear);

  CHECK(estimate_order({1, 0.9, 0.2, 0.7, 0.1, 0.6}).classification ==
        OrderClass::kInconclusive);
  CHECK_THROWS_AS(estimate_order({1, 0.5, 0.25}), std::invalid_argument);
  CHECK_THROWS_AS(estimate_order({1, 0.5, 0.0, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(estimate_order({1, -0.5, 0.25, 0.1}), std::invalid_argument);
}

TEST_CASE("property: estimate_order recovers geometric rates") {
  oracle::Rng rng(4);
  for (double a : {0.2, 0.5, 0.9}) {
    for (int t = 0; t < 20; ++t) {
      double c = rng.uniform(0.1, 10);
      int n = rng.integer(8, 30);
      OrderEstimate e = estimate_order(geometric(c, a, n));
      REQUIRE(e.classification == OrderClass::kLinear);
      CHECK(std::abs(e.alpha - a) <= 0.05 * a);
    }
    // Mild noise within the band.
    std::vector<double> noisy = geometric(1, a, 20);
    for (size_t k = 1; k < noisy.size(); ++k) noisy[k] *= 1 + rng.uniform(-0.02, 0.02);
    OrderEstimate e = estimate_order(noisy);
    REQUIRE(e.classification == OrderClass::kLinear);
    CHECK(std::abs(e.alpha - a) <= 0.05 * a);
  }
}

TEST_CASE("fit_contraction") {
  ContractionFit l = fit_contraction(geometric(1, 0.5, 12));
  CHECK(l.alpha == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(l.beta <= 1e-8);
  std::vector<double> q = {1e-1, 1e-2, 1e-4, 1e-8, 1e-16};
  ContractionFit f = fit_contraction(q);
  CHECK(f.alpha <= 1e-6);
  CHECK(f.beta > 0.0);
}

TEST_CASE("stabilization_report: SQP examples") {
  RegistryEntry weak = registry_entry("sqp-weak");
  SolveTrace tw = run(weak, weak.starts[0], HessianStrategy::exact());
  StabilizationReport rw = stabilization_report(tw, weak.problem, weak.reference);
  CHECK(rw.ref_active == std::vector<int>{0});
  CHECK(rw.ref_weak == std::vector<int>{0});
  REQUIRE(rw.indices.size() == 1);
  CHECK(rw.indices[0].kind == "g");
  CHECK(rw.indices[0].asymptotic_only);
  for (const auto& row : rw.rows) CHECK(row.g_active.empty());

  RegistryEntry strict = registry_entry("sqp-strict");
  SolveTrace ts = run(strict, strict.starts[0], HessianStrategy::exact());
  StabilizationReport rs = stabilization_report(ts, strict.problem, strict.reference);
  CHECK(rs.ref_strict == std::vector<int>{0});
  REQUIRE(rs.indices.size() == 1);
  CHECK_FALSE(rs.indices[0].asymptotic_only);
  CHECK(rs.indices[0].first_permanent == 1);
  CHECK(rs.active_chain_from == 1);
  for (const auto& row : rs.rows) {
    CHECK(row.k >= 1);
    CHECK(row.k <= ts.iterations());
  }
}

TEST_CASE("stabilization_report: SQPCC examples") {
  RegistryEntry ley = registry_entry("leyffer");
  SolveTrace t = run(ley, ley.starts[0], HessianStrategy::exact_convexified());
  StabilizationReport r = stabilization_report(t, ley.problem, ley.reference);
  CHECK(r.ref_partition.i_plus_zero == std::vector<int>{0});
  int first_h = -1;
  for (const auto& rec : t.records) {
    if (rec.has_step && rec.branch == BranchAssignment{Side::kH}) {
      first_h = rec.k;
      break;
    }
  }
  REQUIRE(first_h >= 0);
  // Row k holds the partition of the subproblem that produced w^k.
  for (const auto& row : r.rows) {
    if (row.k >= first_h + 1) {
      CHECK(row.qp_partition.i_plus_zero == std::vector<int>{0});
    }
  }
  CHECK(r.ip0_chain_from == first_h + 1);

  RegistryEntry e54 = registry_entry("example54");
  for (const Vec& x0 : e54.starts) {
    SolveTrace u = run(e54, x0, HessianStrategy::exact_convexified(), StepPolicy::warm({}));
    REQUIRE(u.status == SolveStatus::kConverged);
    StabilizationReport s = stabilization_report(u, e54.problem, e54.reference);
    CHECK(s.ref_partition.i_zero_zero == std::vector<int>{0});
    CHECK(s.ref_i00_zero == std::vector<int>{0});
    for (const auto& row : s.rows) CHECK(row.qp_partition.i_zero_zero.empty());
    auto it = std::find_if(s.indices.begin(), s.indices.end(),
                           [](const IndexIdentification& id) { return id.kind == "pair"; });
    REQUIRE(it != s.indices.end());
    CHECK(it->asymptotic_only);
  }

  CHECK_THROWS_AS(stabilization_report(t, ley.problem,
                                       PrimalDualPoint::primal(ley.problem, v2(0, 0))),
                  std::invalid_argument);
}

TEST_CASE("registry references are stationary") {
  for (const auto& name : registry_names()) {
    RegistryEntry e = registry_entry(name);
    INFO(name);
    if (e.nlp) {
      CHECK(nlp_kkt_residual(nlp_of(e), e.reference) <= 1e-12);
    } else {
      CHECK(classify_stationarity(e.problem, e.reference.w).cls ==
            StationarityClass::kS);
      CHECK(mpcc_kkt_residual(e.problem, e.reference) <= 1e-12);
    }
  }
  CHECK_THROWS_AS(registry_entry("nope"), std::invalid_argument);
  CHECK_FALSE(registry_has("nope"));
}

TEST_CASE("spurious-sequence exclusion on example51") {
  RegistryEntry e = registry_entry("example51");
  std::vector<Vec> starts = {v2(2, 0), v2(0.5, 0), v2(0, 0.5), v2(0, 3), v2(0, 0)};
  for (const Vec& x0 : starts) {
    for (const auto& pol : {StepPolicy::min_objective(), StepPolicy::warm({}),
                            StepPolicy::warm({Side::kG}), StepPolicy::warm({Side::kH})}) {
      SolveTrace t = run(e, x0, HessianStrategy::exact_convexified(), pol);
      INFO("start (", x0[0], ",", x0[1], ")");
      REQUIRE(t.status == SolveStatus::kConverged);
      CHECK((t.final_point().w - v2(0, 1)).lpNorm<Eigen::Infinity>() <= 1e-10);
    }
  }
}

TEST_CASE("error_sequence stops at the first zero") {
  RegistryEntry e = registry_entry("example51");
  SolveTrace t = run(e, e.starts[0], HessianStrategy::exact_convexified());
  std::vector<double> errs = error_sequence(t);
  REQUIRE(errs.size() >= 4);
  for (std::size_t k = 0; k + 1 < errs.size(); ++k) CHECK(errs[k] > 0.0);
  CHECK(estimate_order(positive(errs)).classification == OrderClass::kQuadratic);
  SolveTrace u = t;
  for (auto& r : u.records) r.err_to_ref.reset();
  CHECK(error_sequence(u).empty());
}

TEST_CASE("example51 Hessian variants") {
  RegistryEntry e = registry_entry("example51");
  Mat c = Mat::Zero(2, 2);
  c(0, 0) = 5;
  c(1, 1) = 10;
  OrderEstimate pert = estimate_order(positive(error_sequence(
      run(e, e.starts[0], HessianStrategy::perturbed_identity()))));
  OrderEstimate cons = estimate_order(positive(error_sequence(
      run(e, e.starts[0], HessianStrategy::constant(c)))));
  CHECK(pert.classification == OrderClass::kLinear);
  CHECK(cons.classification == OrderClass::kLinear);
  CHECK(cons.alpha > pert.alpha);
  OrderEstimate bfgs = estimate_order(positive(error_sequence(
      run(e, e.starts[0], HessianStrategy::bfgs()))));
  // Faster than linear; the exact class is reported by the acceptance run.
  CHECK((bfgs.classification == OrderClass::kSuperlinear ||
         bfgs.classification == OrderClass::kQuadratic));
}
