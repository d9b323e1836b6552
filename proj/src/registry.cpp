#include "mpcc/registry.hpp"

#include <algorithm>
#include <stdexcept>

namespace mpcc {

namespace {

struct Spec {
  const char* name;
  const char* model;
  bool nlp;
  std::vector<double> w;
  std::vector<double> mu;
  std::vector<double> xi;
  std::vector<double> nu;
  std::vector<std::vector<double>> starts;
};

Vec vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<long>(v.size()));
}

const std::vector<Spec>& specs() {
  static const std::vector<Spec> all = {
      {"example51",
       "var w1, w2;\n"
       "minimize w1 + w1^2 + w1^3 + (w2-1)^4 + (w2-1)^2;\n"
       "subject to:\n"
       "  comp w1 , w2;\n",
       false, {0, 1}, {}, {1}, {0}, {{2, 0}}},
      {"leyffer",
       "var w1, w2;\n"
       "minimize (w1-1)^2 + w2^2 + w2^3;\n"
       "subject to:\n"
       "  comp w1 , w2;\n",
       false, {1, 0}, {}, {0}, {0}, {{0, 2}, {0, 0.5}}},
      {"example54",
       "var w1, w2;\n"
       "minimize w1^4 + w1^2 + w2^4 + w2^2;\n"
       "residuals w1^2; w1; w2^2; w2;\n"
       "subject to:\n"
       "  comp w1 , w2;\n",
       false, {0, 0}, {}, {0}, {0}, {{0.3, 0}, {0, 0.3}}},
      {"sqp-weak",
       "var w;\n"
       "minimize w^2 + w^4;\n"
       "subject to:\n"
       "  w >= 0;\n",
       true, {0}, {0}, {}, {}, {{0.4}}},
      {"sqp-strict",
       "var w;\n"
       "minimize (w+1)^2 + (w+1)^4;\n"
       "subject to:\n"
       "  w >= 0;\n",
       true, {0}, {6}, {}, {}, {{0.4}}},
  };
  return all;
}

}  // namespace

std::vector<std::string> registry_names() {
  std::vector<std::string> out;
  for (const auto& s : specs()) out.emplace_back(s.name);
  return out;
}

bool registry_has(std::string_view name) {
  const auto& all = specs();
  return std::any_of(all.begin(), all.end(),
                     [&](const Spec& s) { return name == s.name; });
}

RegistryEntry registry_entry(std::string_view name) {
  for (const auto& s : specs()) {
    if (name != s.name) continue;
    RegistryEntry e;
    e.name = s.name;
    e.model = s.model;
    e.problem = parse_model(e.model);
    e.nlp = s.nlp;
    e.reference = PrimalDualPoint::primal(e.problem, vec(s.w));
    if (!s.mu.empty()) e.reference.mu = vec(s.mu);
    if (!s.xi.empty()) e.reference.xi = vec(s.xi);
    if (!s.nu.empty()) e.reference.nu = vec(s.nu);
    for (const auto& x : s.starts) e.starts.push_back(vec(x));
    return e;
  }
  throw std::invalid_argument("unknown problem '" + std::string(name) + "'");
}

}  // namespace mpcc
