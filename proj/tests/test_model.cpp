#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "mpcc/analysis.hpp"
#include "mpcc/model.hpp"
#include "mpcc/registry.hpp"
#include "oracles.hpp"

using namespace mpcc;

namespace {

const char* kLeyffer =
    "var w1, w2;\n"
    "minimize (w1-1)^2 + w2^2 + w2^3;\n"
    "subject to:\n"
    "  comp w1 , w2;\n";

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v1(double a) { return (Vec(1) << a).finished(); }

PrimalDualPoint point(const MpccProblem& p, Vec w, double xi, double nu) {
  PrimalDualPoint z = PrimalDualPoint::primal(p, w);
  z.xi = v1(xi);
  z.nu = v1(nu);
  return z;
}

// Same function on a grid of random points.
bool same_function(const Function& a, const Expr& b, int n, oracle::Rng& rng) {
  for (int t = 0; t < 20; ++t) {
    Vec w = rng.vec(n, -2, 2);
    if (std::abs(a.value(w) - evaluate(b, w)) > 1e-12) return false;
  }
  return true;
}

bool same_list(const std::vector<Function>& fs, const std::vector<Expr>& es,
               int n) {
  oracle::Rng rng(3);
  if (fs.size() != es.size()) return false;
  for (size_t i = 0; i < fs.size(); ++i) {
    if (!same_function(fs[i], es[i], n, rng)) return false;
  }
  return true;
}

bool nlp_feasible(const NlpProblem& q, const Vec& w, double tol) {
  for (const auto& h : q.h) {
    if (std::abs(h.value(w)) > tol) return false;
  }
  for (const auto& g : q.g) {
    if (g.value(w) > tol) return false;
  }
  return true;
}

bool mpcc_feasible(const MpccProblem& p, const Vec& w, double tol) {
  for (const auto& h : p.h) {
    if (std::abs(h.value(w)) > tol) return false;
  }
  for (const auto& g : p.g) {
    if (g.value(w) > tol) return false;
  }
  for (int i = 0; i < p.m(); ++i) {
    double a = p.G[i].value(w), b = p.H[i].value(w);
    if (a < -tol || b < -tol || std::min(a, b) > tol) return false;
  }
  return true;
}

// A point on the complementarity set of w1 ⟂ w2, with exact zeros.
Vec random_feasible(oracle::Rng& rng) {
  switch (rng.integer(0, 2)) {
    case 0: return v2(0, rng.uniform(0, 2));
    case 1: return v2(rng.uniform(0, 2), 0);
    default: return v2(0, 0);
  }
}

const Expr w1 = Expr::variable(0);
const Expr w2 = Expr::variable(1);

}  // namespace

TEST_CASE("parse_model: Leyffer") {
  MpccProblem p = parse_model(kLeyffer);
  CHECK(p.n() == 2);
  CHECK(p.m() == 1);
  CHECK(p.m_h() == 0);
  CHECK(p.m_g() == 0);
  CHECK(p.vars == std::vector<std::string>{"w1", "w2"});
  CHECK(p.f.value(v2(1, 0)) == 0.0);
  CHECK(p.G[0].value(v2(3, 4)) == 3.0);
  CHECK(p.H[0].value(v2(3, 4)) == 4.0);
}

TEST_CASE("parse_model: unconstrained and example54") {
  MpccProblem u = parse_model("var x; minimize x^2;");
  CHECK(u.n() == 1);
  CHECK(u.m() == 0);

  MpccProblem e = registry_entry("example54").problem;
  CHECK(e.n() == 2);
  CHECK(e.m() == 1);
  CHECK(e.residuals.size() == 4);
}

TEST_CASE("parse_model: constraint forms and comments") {
  MpccProblem p = parse_model(
      "# a comment line\n"
      "var a, b;   # trailing\n"
      "minimize a*b;\n"
      "subject to:\n"
      "  a + b == 1;\n"
      "  a <= 3;\n"
      "  b >= 0.5;\n"
      "  comp a - 1 , (b + 2);\n");
  REQUIRE(p.m_h() == 1);
  REQUIRE(p.m_g() == 2);
  REQUIRE(p.m() == 1);
  Vec w = v2(0.25, 2.0);
  CHECK(p.h[0].value(w) == doctest::Approx(1.25));
  CHECK(p.g[0].value(w) == doctest::Approx(-2.75));
  // >= is negated into the <= 0 convention.
  CHECK(p.g[1].value(w) == doctest::Approx(-1.5));
  CHECK(p.G[0].value(w) == doctest::Approx(-0.75));
  CHECK(p.H[0].value(w) == doctest::Approx(4.0));
}

TEST_CASE("parse_model: errors carry line and column") {
  try {
    parse_model("var w1, w2;\nminimize w1 + w3;\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
    CHECK(e.column == 15);
  }
  try {
    parse_model("var w1, w1;\nminimize w1;\n");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line == 1);
    CHECK(e.column == 9);
    CHECK(std::string(e.what()).find("duplicate") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_model("var x;\nminimize ;\n"), ParseError);
  CHECK_THROWS_AS(parse_model("var x;\n"), ParseError);
  CHECK_THROWS_AS(parse_model("var x;\nminimize x\n"), ParseError);
  CHECK_THROWS_AS(parse_model("var x;\nminimize x;\nsubject to:\n x;\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_model("var x;\nminimize x;\nsubject to:\n comp x;\n"),
                  ParseError);
  try {
    parse_model("var x;\nminimize x^2;\nresiduals x; x;\n");
    FAIL("residuals that do not sum to f must be rejected");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("make_mpcc validates the residual block") {
  Expr f = parse_expr("w1^4 + w1^2", {"w1"});
  CHECK_NOTHROW(make_mpcc({"w1"}, f, {}, {}, {}, {},
                          {pow(Expr::variable(0), 2), Expr::variable(0)}));
  CHECK_THROWS_AS(make_mpcc({"w1"}, f, {}, {}, {}, {}, {Expr::variable(0)}),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_mpcc({}, Expr::constant(0), {}, {}, {}, {}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      make_mpcc({"w1"}, f, {}, {}, {Expr::variable(0)}, {}),
      std::invalid_argument);
  CHECK_THROWS_AS(make_mpcc({"w1"}, Expr::variable(3), {}, {}, {}, {}),
                  std::invalid_argument);
}

TEST_CASE("complementarity_partition: examples") {
  MpccProblem p = parse_model(kLeyffer);
  auto a = complementarity_partition(p, v2(1, 0), 1e-8);
  CHECK(a.i_plus_zero == std::vector<int>{0});
  CHECK(a.i_zero_plus.empty());
  CHECK(a.i_zero_zero.empty());

  auto b = complementarity_partition(p, v2(0, 0), 1e-8);
  CHECK(b.i_zero_zero == std::vector<int>{0});

  auto c = complementarity_partition(p, v2(1e-12, 1), 1e-8);
  CHECK(c.i_zero_plus == std::vector<int>{0});
  CHECK(c.tol == 1e-8);

  CHECK_THROWS_AS(complementarity_partition(p, v2(1, 1), 1e-8),
                  InfeasiblePointError);
  CHECK_THROWS_AS(complementarity_partition(p, v2(-1e-3, 1), 1e-8),
                  InfeasiblePointError);
}

TEST_CASE("property: partition is disjoint and exhaustive") {
  oracle::Rng rng(17);
  for (const auto& name : registry_names()) {
    RegistryEntry e = registry_entry(name);
    if (e.nlp) continue;
    for (int t = 0; t < 300; ++t) {
      Vec w = random_feasible(rng);
      // Round-off inside the tolerance.
      w += rng.vec(2, -1e-10, 1e-10).cwiseMax(-w);
      auto part = complementarity_partition(e.problem, w, 1e-8);
      std::vector<int> all;
      for (const auto* s : {&part.i_zero_plus, &part.i_plus_zero,
                            &part.i_zero_zero}) {
        all.insert(all.end(), s->begin(), s->end());
      }
      std::sort(all.begin(), all.end());
      CHECK(std::adjacent_find(all.begin(), all.end()) == all.end());
      CHECK(static_cast<int>(all.size()) == e.problem.m());
    }
  }
}

TEST_CASE("active_sets: examples") {
  NlpProblem q = make_nlp({"w"}, parse_expr("w^2", {"w"}), {},
                          {-Expr::variable(0)});
  MpccProblem p = as_mpcc(q);
  ActiveSets a = active_sets(p, v1(0), v1(6), 1e-8);
  CHECK(a.active == std::vector<int>{0});
  CHECK(a.strictly_active == std::vector<int>{0});
  CHECK(a.weakly_active.empty());

  ActiveSets b = active_sets(p, v1(0), v1(0), 1e-8);
  CHECK(b.active == std::vector<int>{0});
  CHECK(b.weakly_active == std::vector<int>{0});
  CHECK(b.strictly_active.empty());

  ActiveSets c = active_sets(p, v1(1), v1(0), 1e-8);
  CHECK(c.active.empty());
  CHECK(c.inactive == std::vector<int>{0});
}

TEST_CASE("nlp_reformulation") {
  std::vector<Expr> want = {-w1, -w2, w1 * w2};
  for (const char* name : {"leyffer", "example51"}) {
    MpccProblem p = registry_entry(name).problem;
    NlpProblem q = nlp_reformulation(p);
    CHECK(q.h.empty());
    CHECK(same_list(q.g, want, 2));
    oracle::Rng rng(1);
    CHECK(same_function(q.f, p.f.expr(), 2, rng));
  }
  MpccProblem u = parse_model("var x; minimize x^2; subject to: x >= 1;");
  NlpProblem qu = nlp_reformulation(u);
  CHECK(qu.g.size() == 1);
  CHECK(same_list(qu.g, {Expr::constant(1) - Expr::variable(0)}, 1));
}

TEST_CASE("branch_nlp and relaxed_nlp: examples") {
  MpccProblem p = parse_model(kLeyffer);
  NlpProblem gs = branch_nlp(p, {Side::kG});
  CHECK(same_list(gs.h, {w1}, 2));
  CHECK(same_list(gs.g, {-w2}, 2));
  NlpProblem hs = branch_nlp(p, {Side::kH});
  CHECK(same_list(hs.h, {w2}, 2));
  CHECK(same_list(hs.g, {-w1}, 2));

  NlpProblem r0 = relaxed_nlp(p, complementarity_partition(p, v2(0, 0), 1e-8));
  CHECK(r0.h.empty());
  CHECK(same_list(r0.g, {-w1, -w2}, 2));
  NlpProblem r1 = relaxed_nlp(p, complementarity_partition(p, v2(1, 0), 1e-8));
  CHECK(same_list(r1.h, {w2}, 2));
  CHECK(same_list(r1.g, {-w1}, 2));
  // No biactive pair: the RNLP is the unique branch NLP.
  NlpProblem r2 = relaxed_nlp(p, complementarity_partition(p, v2(0, 3), 1e-8));
  CHECK(same_list(r2.h, {w1}, 2));
  CHECK(same_list(r2.g, {-w2}, 2));

  MpccProblem u = parse_model("var x; minimize x^2;");
  CHECK(branch_nlp(u, {}).g.empty());
  CHECK_THROWS_AS(branch_nlp(p, {}), std::invalid_argument);
  CHECK(branch_signature({Side::kG, Side::kH}) == "GH");
  CHECK(parse_branch("HG") == BranchAssignment{Side::kH, Side::kG});
  CHECK_THROWS_AS(parse_branch("GX"), std::invalid_argument);
}

TEST_CASE("property: branch and relaxed feasibility by sampling") {
  MpccProblem p = parse_model(kLeyffer);
  NlpProblem gs = branch_nlp(p, {Side::kG});
  NlpProblem hs = branch_nlp(p, {Side::kH});
  oracle::Rng rng(23);
  int branch_points = 0;
  for (int t = 0; t < 2000; ++t) {
    // Half the samples on the axes so branch-feasible points occur.
    Vec w = rng.vec(2, -1, 2);
    if (t % 2 == 0) w[rng.integer(0, 1)] = 0.0;
    bool in_g = nlp_feasible(gs, w, 0), in_h = nlp_feasible(hs, w, 0);
    bool in_m = mpcc_feasible(p, w, 0);
    if (in_g || in_h) {
      ++branch_points;
      CHECK(in_m);
    }
    if (in_m) {
      CHECK((in_g || in_h));
      NlpProblem r = relaxed_nlp(p, complementarity_partition(p, w, 1e-8));
      CHECK(nlp_feasible(r, w, 0));
      // The RNLP at (0,0) contains every MPCC-feasible point.
      CHECK(nlp_feasible(relaxed_nlp(p, complementarity_partition(
                                                p, v2(0, 0), 1e-8)),
                         w, 0));
    }
  }
  CHECK(branch_points > 500);
}

TEST_CASE("mpcc_lagrangian_gradient and hessian: examples") {
  MpccProblem ex = registry_entry("example51").problem;
  MpccProblem ley = parse_model(kLeyffer);
  CHECK(mpcc_lagrangian_gradient(ex, point(ex, v2(0, 0), 1, -6)).norm() == 0.0);
  CHECK(mpcc_lagrangian_gradient(ley, point(ley, v2(0, 0), -2, 0)).norm() ==
        0.0);
  Vec w = v2(0.3, -0.7);
  CHECK(mpcc_lagrangian_gradient(ley, PrimalDualPoint::primal(ley, w)) ==
        ley.f.gradient(w));

  for (double t : {0.0, 0.5, 2.0}) {
    Mat H = mpcc_lagrangian_hessian(ley, PrimalDualPoint::primal(ley, v2(0, t)));
    Mat want = Mat::Zero(2, 2);
    want(0, 0) = 2;
    want(1, 1) = 2 + 6 * t;
    CHECK((H - want).norm() <= 1e-14);
  }
  Mat He = mpcc_lagrangian_hessian(ex, PrimalDualPoint::primal(ex, v2(0, 1)));
  CHECK((He - 2 * Mat::Identity(2, 2)).norm() <= 1e-14);

  MpccProblem lin = parse_model(
      "var a, b; minimize 3*a - b; subject to: a + b <= 1; comp a, 2*b;");
  PrimalDualPoint z = PrimalDualPoint::primal(lin, v2(0.2, 0.4));
  z.mu = v1(1.5);
  z.xi = v1(-0.5);
  z.nu = v1(2);
  CHECK(mpcc_lagrangian_hessian(lin, z).norm() == 0.0);
}

TEST_CASE("property: Lagrangian Hessian matches finite differences") {
  MpccProblem p = parse_model(
      "var a, b, c;\n"
      "minimize a^4 + a*b*c + exp(c) - b^3;\n"
      "subject to:\n"
      "  a^2 + b*c == 1;\n"
      "  sin(a) + b^2 <= 2;\n"
      "  comp a*b + c , c^2 - a;\n");
  oracle::Rng rng(31);
  for (int t = 0; t < 100; ++t) {
    PrimalDualPoint z = PrimalDualPoint::primal(p, rng.vec(3));
    z.lambda = rng.vec(1, -2, 2);
    z.mu = rng.vec(1, 0, 2);
    z.xi = rng.vec(1, -2, 2);
    z.nu = rng.vec(1, -2, 2);
    Mat fd = oracle::fd_jacobian(
        [&](const Vec& w) {
          PrimalDualPoint y = z;
          y.w = w;
          return mpcc_lagrangian_gradient(p, y);
        },
        z.w);
    CHECK(oracle::rel_err(mpcc_lagrangian_hessian(p, z), fd) <= 1e-6);
  }
}

TEST_CASE("mpcc_kkt_residual: examples") {
  MpccProblem p = parse_model(kLeyffer);
  CHECK(mpcc_kkt_residual(p, point(p, v2(1, 0), 0, 0)) <= 1e-14);
  CHECK(mpcc_kkt_residual(p, point(p, v2(0, 0), -2, 0)) ==
        doctest::Approx(2.0));
  CHECK(mpcc_kkt_residual(p, point(p, v2(1, 0), 50, -30)) > 1.0);
  CHECK(mpcc_kkt_residual(p, point(p, v2(1, 1), 0, 0)) >= 1.0);
}

TEST_CASE("property: KKT residual agrees with the classifier on the registry") {
  oracle::Rng rng(41);
  int s_points = 0, non_s = 0;
  for (const auto& name : registry_names()) {
    RegistryEntry e = registry_entry(name);
    if (e.nlp) continue;
    for (int t = 0; t < 60; ++t) {
      Vec w = t == 0 ? e.reference.w : random_feasible(rng);
      StationarityReport r = classify_stationarity(e.problem, w);
      double res = mpcc_kkt_residual(e.problem, r.z);
      if (r.cls == StationarityClass::kS) {
        ++s_points;
        CHECK(res <= 1e-8);
      } else {
        ++non_s;
        CHECK(res > 1e-8);
      }
    }
  }
  CHECK(s_points >= 3);
  CHECK(non_s > 0);
}

TEST_CASE("dimension checks") {
  MpccProblem p = parse_model(kLeyffer);
  CHECK_THROWS_AS(PrimalDualPoint::primal(p, v1(0)), std::invalid_argument);
  PrimalDualPoint z = PrimalDualPoint::primal(p, v2(0, 0));
  CHECK(z.xi.size() == 1);
  CHECK(z.stacked().size() == 4);
  z.xi = Vec();
  CHECK_THROWS_AS(mpcc_lagrangian_gradient(p, z), std::invalid_argument);
}
