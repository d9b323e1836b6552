#include "mpcc/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>

namespace mpcc {

Function::Function(Expr e, int num_vars) : expr_(std::move(e)), n_(num_vars) {
  if (expr_.max_variable() >= n_) {
    throw std::invalid_argument("expression references an undeclared variable");
  }
  grad_.reserve(n_);
  for (int i = 0; i < n_; ++i) grad_.push_back(differentiate(expr_, i));
  hess_.reserve(n_ * (n_ + 1) / 2);
  for (int i = 0; i < n_; ++i) {
    for (int j = i; j < n_; ++j) hess_.push_back(differentiate(grad_[i], j));
  }
}

const Expr& Function::second(int i, int j) const {
  if (i > j) std::swap(i, j);
  // Offset of row i in the packed upper triangle.
  int row = i * n_ - i * (i - 1) / 2;
  return hess_[row + (j - i)];
}

Vec Function::gradient(const Vec& w) const {
  Vec out(n_);
  for (int i = 0; i < n_; ++i) out[i] = evaluate(grad_[i], w);
  return out;
}

Mat Function::hessian(const Vec& w) const {
  Mat out(n_, n_);
  for (int i = 0; i < n_; ++i) {
    for (int j = i; j < n_; ++j) {
      double v = evaluate(second(i, j), w);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

Vec values(const std::vector<Function>& fs, const Vec& w) {
  Vec out(fs.size());
  for (std::size_t i = 0; i < fs.size(); ++i) out[i] = fs[i].value(w);
  return out;
}

Mat jacobian(const std::vector<Function>& fs, const Vec& w, int n) {
  Mat out(fs.size(), n);
  for (std::size_t i = 0; i < fs.size(); ++i) {
    out.row(i) = fs[i].gradient(w).transpose();
  }
  return out;
}

namespace {

std::vector<Function> compile(const std::vector<Expr>& es, int n) {
  std::vector<Function> out;
  out.reserve(es.size());
  for (const auto& e : es) out.emplace_back(e, n);
  return out;
}

void check_residuals(const MpccProblem& p) {
  if (p.residuals.empty()) return;
  std::mt19937_64 rng(0x5eed);
  std::uniform_real_distribution<double> dist(-2.0, 2.0);
  Vec w(p.n());
  int checked = 0;
  for (int trial = 0; trial < 1000 && checked < 100; ++trial) {
    for (int i = 0; i < p.n(); ++i) w[i] = dist(rng);
    double f = 0.0;
    double sum = 0.0;
    try {
      f = p.f.value(w);
      for (const auto& r : p.residuals) {
        double v = r.value(w);
        sum += v * v;
      }
    } catch (const DomainError&) {
      continue;
    }
    ++checked;
    if (std::abs(f - sum) > 1e-10 * std::max(1.0, std::abs(f))) {
      throw std::invalid_argument(
          "residual block does not reproduce the objective");
    }
  }
}

}  // namespace

MpccProblem make_mpcc(std::vector<std::string> vars, const Expr& f,
                      const std::vector<Expr>& h, const std::vector<Expr>& g,
                      const std::vector<Expr>& G, const std::vector<Expr>& H,
                      const std::vector<Expr>& residuals) {
  if (vars.empty()) throw std::invalid_argument("problem has no variables");
  if (G.size() != H.size()) {
    throw std::invalid_argument("G and H must have the same length");
  }
  MpccProblem p;
  int n = static_cast<int>(vars.size());
  p.vars = std::move(vars);
  p.f = Function(f, n);
  p.h = compile(h, n);
  p.g = compile(g, n);
  p.G = compile(G, n);
  p.H = compile(H, n);
  p.residuals = compile(residuals, n);
  check_residuals(p);
  return p;
}

NlpProblem make_nlp(std::vector<std::string> vars, const Expr& f,
                    const std::vector<Expr>& h, const std::vector<Expr>& g) {
  if (vars.empty()) throw std::invalid_argument("problem has no variables");
  NlpProblem p;
  int n = static_cast<int>(vars.size());
  p.vars = std::move(vars);
  p.f = Function(f, n);
  p.h = compile(h, n);
  p.g = compile(g, n);
  return p;
}

MpccProblem as_mpcc(const NlpProblem& nlp) {
  MpccProblem p;
  p.vars = nlp.vars;
  p.f = nlp.f;
  p.h = nlp.h;
  p.g = nlp.g;
  return p;
}

// ---------------------------------------------------------------------------
// Model file parsing

namespace {

struct Statement {
  std::string text;
  std::size_t offset;  // into the comment-stripped source
};

class ModelParser {
 public:
  explicit ModelParser(std::string_view src) : src_(src) {
    // Blank out comments, keeping offsets aligned with the source.
    clean_.assign(src.begin(), src.end());
    bool in_comment = false;
    for (char& c : clean_) {
      if (c == '\n') {
        in_comment = false;
      } else if (c == '#') {
        in_comment = true;
      }
      if (in_comment) c = ' ';
    }
  }

  MpccProblem parse() {
    enum class Section { kHeader, kResiduals, kConstraints } section =
        Section::kHeader;
    std::size_t pos = 0;
    bool have_vars = false;
    bool have_objective = false;
    Expr objective;
    std::size_t objective_at = 0;
    std::vector<Expr> h, g, G, H, residuals;

    while (true) {
      pos = skip_space(pos);
      if (pos >= clean_.size()) break;

      if (starts_word(pos, "subject")) {
        std::size_t p2 = skip_space(pos + 7);
        if (!starts_word(p2, "to")) fail(p2, "expected 'to' after 'subject'");
        p2 = skip_space(p2 + 2);
        if (p2 >= clean_.size() || clean_[p2] != ':') {
          fail(p2, "expected ':' after 'subject to'");
        }
        if (!have_objective) fail(pos, "constraints before the objective");
        section = Section::kConstraints;
        pos = p2 + 1;
        continue;
      }

      std::size_t end = clean_.find(';', pos);
      if (end == std::string::npos) fail(pos, "missing ';'");
      Statement st{clean_.substr(pos, end - pos), pos};
      std::size_t next = end + 1;

      if (starts_word(pos, "var")) {
        if (have_vars) fail(pos, "variables declared twice");
        parse_vars(st);
        have_vars = true;
      } else if (starts_word(pos, "minimize")) {
        if (!have_vars) fail(pos, "objective before 'var'");
        if (have_objective) fail(pos, "objective declared twice");
        std::size_t body = pos + 8;
        if (trim(clean_.substr(body, end - body)).empty()) {
          fail(body, "empty objective");
        }
        objective = expr_at(body, end);
        objective_at = pos;
        have_objective = true;
        section = Section::kHeader;
      } else if (starts_word(pos, "residuals")) {
        if (!have_objective) fail(pos, "residuals before the objective");
        section = Section::kResiduals;
        std::size_t body = pos + 9;
        if (!trim(clean_.substr(body, end - body)).empty()) {
          residuals.push_back(expr_at(body, end));
        }
      } else if (section == Section::kResiduals) {
        residuals.push_back(expr_at(pos, end));
      } else if (section == Section::kConstraints) {
        parse_constraint(pos, end, h, g, G, H);
      } else {
        fail(pos, "unexpected statement");
      }
      pos = next;
    }

    if (!have_vars) fail(0, "missing 'var' declaration");
    if (!have_objective) fail(clean_.size(), "empty objective");
    try {
      return make_mpcc(vars_, objective, h, g, G, H, residuals);
    } catch (const std::invalid_argument& e) {
      fail(objective_at, e.what());
    }
  }

 private:
  [[noreturn]] void fail(std::size_t offset, const std::string& msg) const {
    offset = std::min(offset, src_.size());
    int line = 1;
    int col = 1;
    for (std::size_t i = 0; i < offset; ++i) {
      if (src_[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ParseError("line " + std::to_string(line) + ", column " +
                         std::to_string(col) + ": " + msg,
                     offset, line, col);
  }

  static std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  std::size_t skip_space(std::size_t pos) const {
    while (pos < clean_.size() &&
           std::isspace(static_cast<unsigned char>(clean_[pos]))) {
      ++pos;
    }
    return pos;
  }

  bool starts_word(std::size_t pos, std::string_view word) const {
    if (clean_.compare(pos, word.size(), word) != 0) return false;
    std::size_t after = pos + word.size();
    return after >= clean_.size() ||
           !(std::isalnum(static_cast<unsigned char>(clean_[after])) ||
             clean_[after] == '_');
  }

  Expr expr_at(std::size_t begin, std::size_t end) const {
    std::string_view text(clean_.data() + begin, end - begin);
    try {
      return parse_expr(text, vars_);
    } catch (const ParseError& e) {
      std::string msg = e.what();
      // Drop the expression-relative offset; line and column replace it.
      if (auto at = msg.find(" at offset"); at != std::string::npos) {
        auto colon = msg.find(':', at);
        msg = msg.substr(0, at) +
              (colon == std::string::npos ? "" : msg.substr(colon));
      }
      fail(begin + e.offset, msg);
    }
  }

  void parse_vars(const Statement& st) {
    std::size_t pos = st.offset + 3;
    std::size_t end = st.offset + st.text.size();
    std::set<std::string> seen;
    while (true) {
      pos = skip_space(pos);
      std::size_t start = pos;
      if (pos >= end || !(std::isalpha(static_cast<unsigned char>(clean_[pos])) ||
                          clean_[pos] == '_')) {
        fail(pos, "expected a variable name");
      }
      while (pos < end && (std::isalnum(static_cast<unsigned char>(clean_[pos])) ||
                           clean_[pos] == '_')) {
        ++pos;
      }
      std::string name = clean_.substr(start, pos - start);
      static const char* reserved[] = {"sin", "cos", "exp", "log", "sqrt"};
      for (const char* r : reserved) {
        if (name == r) fail(start, "reserved name '" + name + "'");
      }
      if (!seen.insert(name).second) {
        fail(start, "duplicate variable '" + name + "'");
      }
      vars_.push_back(name);
      pos = skip_space(pos);
      if (pos >= end) break;
      if (clean_[pos] != ',') fail(pos, "expected ',' between variables");
      ++pos;
    }
  }

  // Finds `token` outside parentheses in [begin, end).
  std::size_t find_top_level(std::size_t begin, std::size_t end,
                             std::string_view token) const {
    int depth = 0;
    for (std::size_t i = begin; i < end; ++i) {
      char c = clean_[i];
      if (c == '(') ++depth;
      if (c == ')') --depth;
      if (depth == 0 && clean_.compare(i, token.size(), token) == 0 &&
          i + token.size() <= end) {
        return i;
      }
    }
    return std::string::npos;
  }

  void parse_constraint(std::size_t begin, std::size_t end,
                        std::vector<Expr>& h, std::vector<Expr>& g,
                        std::vector<Expr>& G, std::vector<Expr>& H) const {
    if (starts_word(begin, "comp")) {
      std::size_t body = begin + 4;
      std::size_t comma = find_top_level(body, end, ",");
      if (comma == std::string::npos) fail(body, "expected ',' in comp");
      G.push_back(expr_at(body, comma));
      H.push_back(expr_at(comma + 1, end));
      return;
    }
    for (std::string_view rel : {"==", "<=", ">="}) {
      std::size_t at = find_top_level(begin, end, rel);
      if (at == std::string::npos) continue;
      Expr lhs = expr_at(begin, at);
      Expr rhs = expr_at(at + 2, end);
      Expr diff = lhs - rhs;
      if (rel == "==") {
        h.push_back(diff);
      } else if (rel == "<=") {
        g.push_back(diff);
      } else {
        g.push_back(rhs - lhs);
      }
      return;
    }
    fail(begin, "expected '==', '<=', '>=' or 'comp'");
  }

  std::string_view src_;
  std::string clean_;
  std::vector<std::string> vars_;
};

}  // namespace

MpccProblem parse_model(std::string_view text) {
  return ModelParser(text).parse();
}

// ---------------------------------------------------------------------------
// Points, partitions, derived problems

PrimalDualPoint PrimalDualPoint::primal(const MpccProblem& p, const Vec& w) {
  if (w.size() != p.n()) throw std::invalid_argument("dimension mismatch");
  return {w, Vec::Zero(p.m_h()), Vec::Zero(p.m_g()), Vec::Zero(p.m()),
          Vec::Zero(p.m())};
}

PrimalDualPoint PrimalDualPoint::primal(const NlpProblem& p, const Vec& w) {
  if (w.size() != p.n()) throw std::invalid_argument("dimension mismatch");
  return {w, Vec::Zero(p.h.size()), Vec::Zero(p.g.size()), Vec(), Vec()};
}

Vec PrimalDualPoint::stacked() const {
  Vec out(w.size() + lambda.size() + mu.size() + xi.size() + nu.size());
  out << w, lambda, mu, xi, nu;
  return out;
}

std::string branch_signature(const BranchAssignment& a) {
  std::string s;
  for (Side side : a) s.push_back(side == Side::kG ? 'G' : 'H');
  return s;
}

BranchAssignment parse_branch(std::string_view sig) {
  BranchAssignment a;
  for (char c : sig) {
    if (c == 'G' || c == 'g') {
      a.push_back(Side::kG);
    } else if (c == 'H' || c == 'h') {
      a.push_back(Side::kH);
    } else {
      throw std::invalid_argument("branch signature must use G and H");
    }
  }
  return a;
}

ComplementarityPartition complementarity_partition(const MpccProblem& p,
                                                   const Vec& w, double tol) {
  ComplementarityPartition part;
  part.tol = tol;
  for (int i = 0; i < p.m(); ++i) {
    double gi = p.G[i].value(w);
    double hi = p.H[i].value(w);
    if (gi < -tol || hi < -tol || (gi > tol && hi > tol)) {
      throw InfeasiblePointError(
          "complementarity pair " + std::to_string(i) +
              " is violated (G=" + std::to_string(gi) +
              ", H=" + std::to_string(hi) + ")",
          i);
    }
    if (gi <= tol && hi <= tol) {
      part.i_zero_zero.push_back(i);
    } else if (gi <= tol) {
      part.i_zero_plus.push_back(i);
    } else {
      part.i_plus_zero.push_back(i);
    }
  }
  return part;
}

ActiveSets active_sets(const std::vector<Function>& g, const Vec& w,
                       const Vec& mu, double tol) {
  ActiveSets s;
  s.tol = tol;
  for (int i = 0; i < static_cast<int>(g.size()); ++i) {
    if (std::abs(g[i].value(w)) <= tol) {
      s.active.push_back(i);
      if (i < mu.size() && mu[i] > tol) {
        s.strictly_active.push_back(i);
      } else {
        s.weakly_active.push_back(i);
      }
    } else {
      s.inactive.push_back(i);
    }
  }
  return s;
}

ActiveSets active_sets(const MpccProblem& p, const Vec& w, const Vec& mu,
                       double tol) {
  return active_sets(p.g, w, mu, tol);
}

namespace {

std::vector<Expr> exprs(const std::vector<Function>& fs) {
  std::vector<Expr> out;
  for (const auto& f : fs) out.push_back(f.expr());
  return out;
}

NlpProblem assemble(const MpccProblem& p, std::vector<Expr> h,
                    std::vector<Expr> g) {
  std::vector<Expr> hh = exprs(p.h);
  hh.insert(hh.end(), h.begin(), h.end());
  std::vector<Expr> gg = exprs(p.g);
  gg.insert(gg.end(), g.begin(), g.end());
  return make_nlp(p.vars, p.f.expr(), hh, gg);
}

}  // namespace

NlpProblem nlp_reformulation(const MpccProblem& p) {
  std::vector<Expr> g;
  for (const auto& G : p.G) g.push_back(-G.expr());
  for (const auto& H : p.H) g.push_back(-H.expr());
  for (int i = 0; i < p.m(); ++i) g.push_back(p.G[i].expr() * p.H[i].expr());
  return assemble(p, {}, g);
}

NlpProblem branch_nlp(const MpccProblem& p, const BranchAssignment& a) {
  if (static_cast<int>(a.size()) != p.m()) {
    throw std::invalid_argument("branch assignment length mismatch");
  }
  std::vector<Expr> h;
  std::vector<Expr> g;
  for (int i = 0; i < p.m(); ++i) {
    if (a[i] == Side::kG) {
      h.push_back(p.G[i].expr());
      g.push_back(-p.H[i].expr());
    } else {
      h.push_back(p.H[i].expr());
      g.push_back(-p.G[i].expr());
    }
  }
  return assemble(p, h, g);
}

NlpProblem relaxed_nlp(const MpccProblem& p,
                       const ComplementarityPartition& part) {
  std::vector<Expr> h;
  std::vector<Expr> g;
  for (int i = 0; i < p.m(); ++i) {
    auto in = [i](const std::vector<int>& s) {
      return std::find(s.begin(), s.end(), i) != s.end();
    };
    if (in(part.i_zero_plus)) {
      h.push_back(p.G[i].expr());
      g.push_back(-p.H[i].expr());
    } else if (in(part.i_plus_zero)) {
      h.push_back(p.H[i].expr());
      g.push_back(-p.G[i].expr());
    } else {
      g.push_back(-p.G[i].expr());
      g.push_back(-p.H[i].expr());
    }
  }
  return assemble(p, h, g);
}

// ---------------------------------------------------------------------------
// Lagrangians and residuals

namespace {

void check_dims(const MpccProblem& p, const PrimalDualPoint& z) {
  if (z.w.size() != p.n() || z.lambda.size() != p.m_h() ||
      z.mu.size() != p.m_g() || z.xi.size() != p.m() ||
      z.nu.size() != p.m()) {
    throw std::invalid_argument("primal-dual point does not match problem");
  }
}

}  // namespace

Vec mpcc_lagrangian_gradient(const MpccProblem& p, const PrimalDualPoint& z) {
  check_dims(p, z);
  Vec grad = p.f.gradient(z.w);
  for (int i = 0; i < p.m_h(); ++i) grad += z.lambda[i] * p.h[i].gradient(z.w);
  for (int i = 0; i < p.m_g(); ++i) grad += z.mu[i] * p.g[i].gradient(z.w);
  for (int i = 0; i < p.m(); ++i) {
    grad -= z.xi[i] * p.G[i].gradient(z.w);
    grad -= z.nu[i] * p.H[i].gradient(z.w);
  }
  return grad;
}

Mat mpcc_lagrangian_hessian(const MpccProblem& p, const PrimalDualPoint& z) {
  check_dims(p, z);
  Mat hess = p.f.hessian(z.w);
  for (int i = 0; i < p.m_h(); ++i) hess += z.lambda[i] * p.h[i].hessian(z.w);
  for (int i = 0; i < p.m_g(); ++i) hess += z.mu[i] * p.g[i].hessian(z.w);
  for (int i = 0; i < p.m(); ++i) {
    hess -= z.xi[i] * p.G[i].hessian(z.w);
    hess -= z.nu[i] * p.H[i].hessian(z.w);
  }
  return hess;
}

double mpcc_kkt_residual(const MpccProblem& p, const PrimalDualPoint& z,
                         double tol) {
  double r = mpcc_lagrangian_gradient(p, z).lpNorm<Eigen::Infinity>();
  for (int i = 0; i < p.m_h(); ++i) r = std::max(r, std::abs(p.h[i].value(z.w)));
  for (int i = 0; i < p.m_g(); ++i) {
    double gi = p.g[i].value(z.w);
    r = std::max(r, std::max(0.0, gi));
    r = std::max(r, std::abs(std::min(z.mu[i], -gi)));
  }
  for (int i = 0; i < p.m(); ++i) {
    double Gi = p.G[i].value(z.w);
    double Hi = p.H[i].value(z.w);
    r = std::max({r, std::max(0.0, -Gi), std::max(0.0, -Hi),
                  std::abs(std::min(Gi, Hi))});
    if (Gi > tol) r = std::max(r, std::abs(z.xi[i]));
    if (Hi > tol) r = std::max(r, std::abs(z.nu[i]));
    if (Gi <= tol && Hi <= tol) {
      r = std::max({r, std::max(0.0, -z.xi[i]), std::max(0.0, -z.nu[i])});
    }
  }
  return r;
}

Vec nlp_lagrangian_gradient(const NlpProblem& p, const PrimalDualPoint& z) {
  Vec grad = p.f.gradient(z.w);
  for (std::size_t i = 0; i < p.h.size(); ++i) {
    grad += z.lambda[i] * p.h[i].gradient(z.w);
  }
  for (std::size_t i = 0; i < p.g.size(); ++i) {
    grad += z.mu[i] * p.g[i].gradient(z.w);
  }
  return grad;
}

Mat nlp_lagrangian_hessian(const NlpProblem& p, const PrimalDualPoint& z) {
  Mat hess = p.f.hessian(z.w);
  for (std::size_t i = 0; i < p.h.size(); ++i) {
    hess += z.lambda[i] * p.h[i].hessian(z.w);
  }
  for (std::size_t i = 0; i < p.g.size(); ++i) {
    hess += z.mu[i] * p.g[i].hessian(z.w);
  }
  return hess;
}

double nlp_kkt_residual(const NlpProblem& p, const PrimalDualPoint& z) {
  double r = nlp_lagrangian_gradient(p, z).lpNorm<Eigen::Infinity>();
  for (const auto& h : p.h) r = std::max(r, std::abs(h.value(z.w)));
  for (std::size_t i = 0; i < p.g.size(); ++i) {
    double gi = p.g[i].value(z.w);
    r = std::max({r, std::max(0.0, gi), std::abs(std::min(z.mu[i], -gi))});
  }
  return r;
}

}  // namespace mpcc
