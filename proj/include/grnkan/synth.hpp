#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "grnkan/common.hpp"
#include "grnkan/metrics.hpp"
#include "grnkan/pipeline.hpp"

namespace grnkan {

// Saturating Hill response x^n / (k^n + x^n), numerically stable for steep
// coefficients.
inline double hill_activation(double x, double k, double n) {
  if (!(x >= 0.0)) throw std::domain_error("hill_activation needs nonnegative concentration");
  if (!(k > 0.0) || !(n > 0.0)) throw config_error("hill threshold and coefficient must be positive");
  if (x == 0.0) return 0.0;
  if (x > k) {
    double inv = std::pow(k / x, n);
    return 1.0 / (1.0 + inv);
  }
  double r = std::pow(x / k, n);
  return r / (1.0 + r);
}

enum class ActivatorRule { kOr, kAnd };

struct RegEdge {
  std::string source;
  std::string target;
  int sign = 1;  // +1 activation, -1 repression
};

// Boolean-rule network compiled to Hill-function kinetics. Activators
// combine per the gene's rule (OR by default); repressors gate production
// multiplicatively through (1 - Hill).
struct NetworkSpec {
  std::vector<std::string> genes;
  std::vector<RegEdge> edges;
  std::map<std::string, ActivatorRule> rules;  // per-target; default OR

  std::size_t gene_index(const std::string& name) const {
    for (std::size_t i = 0; i < genes.size(); ++i)
      if (genes[i] == name) return i;
    throw data_error("unknown gene in network spec: " + name);
  }

  void validate() const {
    if (genes.empty()) throw data_error("network spec has no genes");
    std::set<std::string> declared(genes.begin(), genes.end());
    if (declared.size() != genes.size()) throw data_error("duplicate gene names in spec");
    std::set<std::pair<std::string, std::string>> seen;
    std::set<std::string> has_activator;
    for (const auto& e : edges) {
      if (!declared.count(e.source) || !declared.count(e.target))
        throw data_error("edge references undeclared gene: " + e.source + "->" + e.target);
      if (e.sign != 1 && e.sign != -1) throw data_error("edge sign must be +1 or -1");
      if (!seen.emplace(e.source, e.target).second)
        throw data_error("duplicate edge in spec: " + e.source + "->" + e.target);
      if (e.sign == 1) has_activator.insert(e.target);
    }
    // Production must be able to start somewhere: at least one gene whose
    // rate does not require an upstream activator.
    bool has_source = false;
    for (const auto& gname : genes)
      if (!has_activator.count(gname)) has_source = true;
    if (!has_source) throw data_error("spec has no root gene or basal-producing gene");
  }
};

struct SimulationConfig {
  std::size_t n_cells = 1000;
  double t_max = 2.0;
  double dt = 0.01;
  double hill_coefficient = 10.0;
  double hill_threshold = 1.0;  // 0.5 * production/degradation
  double production = 20.0;
  double degradation = 10.0;
  double noise = 0.5 * 4.47213595499957939;  // 0.5 * sqrt(production)
  std::uint64_t seed = 0;
  double init_spread = 0.2;  // initial state drawn from U[0, init_spread]
  bool synchronous = false;  // sample every cell at t_max instead of U[0, t_max]

  void validate() const {
    if (n_cells < 1) throw config_error("need at least one cell");
    if (!(t_max > 0) || !(dt > 0) || !(dt < t_max)) throw config_error("need 0 < dt < t_max");
    if (!(hill_coefficient > 0) || !(hill_threshold > 0) || !(production > 0) ||
        !(degradation > 0))
      throw config_error("kinetic rates must be positive");
    if (noise < 0 || init_spread < 0) throw config_error("noise and init spread must be nonnegative");
  }
};

// Drift function dX/dt = m * R(X) - lambda * X with indexed regulator lists.
class OdeSystem {
 public:
  OdeSystem(const NetworkSpec& spec, const SimulationConfig& cfg) : cfg_(cfg) {
    spec.validate();
    cfg.validate();
    n_ = spec.genes.size();
    activators_.resize(n_);
    repressors_.resize(n_);
    rule_.assign(n_, ActivatorRule::kOr);
    for (const auto& [gene, rule] : spec.rules) rule_[spec.gene_index(gene)] = rule;
    for (const auto& e : spec.edges) {
      std::size_t s = spec.gene_index(e.source);
      std::size_t t = spec.gene_index(e.target);
      (e.sign == 1 ? activators_ : repressors_)[t].push_back(s);
    }
  }

  std::size_t size() const { return n_; }

  double production_rate(const double* x, std::size_t i) const {
    double act = 1.0;
    if (!activators_[i].empty()) {
      if (rule_[i] == ActivatorRule::kAnd) {
        act = 1.0;
        for (std::size_t s : activators_[i])
          act *= hill_activation(x[s], cfg_.hill_threshold, cfg_.hill_coefficient);
      } else {
        double none = 1.0;
        for (std::size_t s : activators_[i])
          none *= 1.0 - hill_activation(x[s], cfg_.hill_threshold, cfg_.hill_coefficient);
        act = 1.0 - none;
      }
    }
    for (std::size_t s : repressors_[i])
      act *= 1.0 - hill_activation(x[s], cfg_.hill_threshold, cfg_.hill_coefficient);
    return act;
  }

  void drift(const double* x, double* out) const {
    for (std::size_t i = 0; i < n_; ++i)
      out[i] = cfg_.production * production_rate(x, i) - cfg_.degradation * x[i];
  }

 private:
  SimulationConfig cfg_;
  std::size_t n_ = 0;
  std::vector<std::vector<std::size_t>> activators_;
  std::vector<std::vector<std::size_t>> repressors_;
  std::vector<ActivatorRule> rule_;
};

inline OdeSystem build_ode(const NetworkSpec& spec, const SimulationConfig& cfg) {
  return OdeSystem(spec, cfg);
}

// Euler-Maruyama integration of dX = drift dt + sigma * sqrt(X) dW with
// reflection at zero. Each cell is an independent trajectory from a
// perturbed initial state, recorded at a sampling time drawn uniformly from
// [0, t_max] to emulate asynchronous differentiation.
inline ExpressionMatrix simulate_cells(const NetworkSpec& spec, const SimulationConfig& cfg,
                                       unsigned n_workers = 1) {
  OdeSystem sys(spec, cfg);
  const std::size_t g = sys.size();
  ExpressionMatrix out;
  out.gene_names = spec.genes;
  out.values = Matrix(g, cfg.n_cells);
  out.cell_ids.resize(cfg.n_cells);
  for (std::size_t p = 0; p < cfg.n_cells; ++p) out.cell_ids[p] = "cell_" + std::to_string(p);

  parallel_for(cfg.n_cells, n_workers, [&](std::size_t p) {
    std::mt19937_64 rng(derive_seed(cfg.seed, p));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<double> x(g), dx(g);
    for (std::size_t i = 0; i < g; ++i) x[i] = cfg.init_spread * uni(rng);
    double t_sample = cfg.synchronous ? cfg.t_max : cfg.t_max * uni(rng);

    double t = 0.0;
    std::size_t step = 0;
    while (t < t_sample) {
      double h = std::min(cfg.dt, t_sample - t);
      sys.drift(x.data(), dx.data());
      double sqrt_h = std::sqrt(h);
      for (std::size_t i = 0; i < g; ++i) {
        double v = x[i] + dx[i] * h;
        if (cfg.noise > 0.0) v += cfg.noise * std::sqrt(std::max(x[i], 0.0)) * sqrt_h * gauss(rng);
        if (v < 0.0) v = -v;  // reflecting boundary
        if (!std::isfinite(v) || v > 1e9)
          throw numeric_error("simulation blow-up for gene " + spec.genes[i] + " at step " +
                              std::to_string(step));
        x[i] = v;
      }
      t += h;
      ++step;
    }
    for (std::size_t i = 0; i < g; ++i) out.values(i, p) = x[i];
  });
  return out;
}

// Builtin topologies. LI/LL/CY/BF/BFC/TF follow the benchmark's gene counts
// and topology classes; the curated names (mCAD/VSC/HSC/GSD) are size- and
// density-faithful stand-ins, not literature-exact Boolean rules.
inline NetworkSpec builtin_network(const std::string& name) {
  auto chain = [](int n, const std::vector<int>& signs) {
    NetworkSpec s;
    for (int i = 1; i <= n; ++i) s.genes.push_back("g" + std::to_string(i));
    for (int i = 0; i + 1 < n; ++i)
      s.edges.push_back({s.genes[i], s.genes[i + 1], signs[i % signs.size()]});
    return s;
  };
  if (name == "LI") {
    // 7-gene chain, mixed activation/repression.
    NetworkSpec s = chain(7, {1, 1, -1, 1, -1, 1});
    return s;
  }
  if (name == "LL") {
    NetworkSpec s = chain(18, {1, 1, -1, 1, 1, -1, 1, -1});
    return s;
  }
  if (name == "CY") {
    // 6-gene directed cycle with three repressions (net negative feedback).
    NetworkSpec s;
    for (int i = 1; i <= 6; ++i) s.genes.push_back("g" + std::to_string(i));
    const int signs[6] = {1, -1, 1, -1, 1, -1};
    for (int i = 0; i < 6; ++i) s.edges.push_back({s.genes[i], s.genes[(i + 1) % 6], signs[i]});
    return s;
  }
  if (name == "BF") {
    // Root drives a mutually repressing pair; each side grows an arm.
    NetworkSpec s;
    for (int i = 1; i <= 7; ++i) s.genes.push_back("g" + std::to_string(i));
    s.edges = {{"g1", "g2", 1}, {"g1", "g3", 1}, {"g2", "g3", -1}, {"g3", "g2", -1},
               {"g2", "g4", 1}, {"g4", "g5", 1}, {"g3", "g6", 1}, {"g6", "g7", 1}};
    return s;
  }
  if (name == "BFC") {
    // Bifurcating arms that converge again.
    NetworkSpec s;
    for (int i = 1; i <= 10; ++i) s.genes.push_back("g" + std::to_string(i));
    s.edges = {{"g1", "g2", 1}, {"g1", "g3", 1},  {"g2", "g3", -1}, {"g3", "g2", -1},
               {"g2", "g4", 1}, {"g4", "g6", 1},  {"g3", "g5", 1},  {"g5", "g7", 1},
               {"g6", "g8", 1}, {"g7", "g8", 1},  {"g8", "g9", 1},  {"g9", "g10", 1}};
    return s;
  }
  if (name == "TF") {
    // Trifurcating: three mutually repressing fates under one root.
    NetworkSpec s;
    for (int i = 1; i <= 8; ++i) s.genes.push_back("g" + std::to_string(i));
    s.edges = {{"g1", "g2", 1},  {"g1", "g3", 1},  {"g1", "g4", 1},  {"g2", "g3", -1},
               {"g3", "g2", -1}, {"g2", "g4", -1}, {"g4", "g2", -1}, {"g3", "g4", -1},
               {"g4", "g3", -1}, {"g2", "g5", 1},  {"g3", "g6", 1},  {"g4", "g7", 1},
               {"g5", "g8", 1}};
    return s;
  }
  if (name == "mCAD") {
    NetworkSpec s;
    for (int i = 1; i <= 5; ++i) s.genes.push_back("g" + std::to_string(i));
    s.edges = {{"g1", "g2", 1},  {"g1", "g3", 1}, {"g2", "g3", -1},
               {"g3", "g2", -1}, {"g2", "g4", 1}, {"g3", "g5", 1},
               {"g4", "g5", -1}};
    return s;
  }
  if (name == "VSC") {
    NetworkSpec s;
    for (int i = 1; i <= 8; ++i) s.genes.push_back("g" + std::to_string(i));
    s.edges = {{"g1", "g2", 1},  {"g1", "g3", 1},  {"g2", "g4", -1}, {"g4", "g2", -1},
               {"g3", "g5", -1}, {"g5", "g3", -1}, {"g2", "g6", 1},  {"g4", "g7", 1},
               {"g5", "g8", 1},  {"g3", "g6", -1}};
    return s;
  }
  if (name == "HSC") {
    NetworkSpec s;
    for (int i = 1; i <= 11; ++i) s.genes.push_back("g" + std::to_string(i));
    s.edges = {{"g1", "g2", 1},  {"g1", "g3", 1},   {"g2", "g3", -1}, {"g3", "g2", -1},
               {"g2", "g4", 1},  {"g2", "g5", 1},   {"g3", "g6", 1},  {"g3", "g7", 1},
               {"g4", "g5", -1}, {"g5", "g4", -1},  {"g6", "g8", 1},  {"g7", "g9", 1},
               {"g4", "g10", 1}, {"g5", "g11", 1},  {"g8", "g9", -1}, {"g10", "g11", -1},
               {"g1", "g6", -1}};
    return s;
  }
  if (name == "GSD") {
    NetworkSpec s;
    for (int i = 1; i <= 19; ++i) s.genes.push_back("g" + std::to_string(i));
    s.edges = {{"g1", "g2", 1},   {"g1", "g3", 1},   {"g2", "g3", -1},  {"g3", "g2", -1},
               {"g2", "g4", 1},   {"g3", "g5", 1},   {"g4", "g6", 1},   {"g5", "g7", 1},
               {"g6", "g8", 1},   {"g7", "g9", 1},   {"g8", "g10", 1},  {"g9", "g11", 1},
               {"g2", "g12", 1},  {"g3", "g13", 1},  {"g12", "g14", 1}, {"g13", "g15", 1},
               {"g14", "g16", -1},{"g15", "g17", -1},{"g16", "g18", 1}, {"g17", "g19", 1},
               {"g4", "g5", -1},  {"g5", "g4", -1},  {"g10", "g11", -1},{"g11", "g10", -1},
               {"g1", "g12", -1}};
    return s;
  }
  throw config_error("unknown builtin network: " + name);
}

// Ground truth network implied by a simulation spec.
inline GroundTruthNetwork truth_from_spec(const NetworkSpec& spec) {
  spec.validate();
  std::vector<std::tuple<std::size_t, std::size_t, int>> edges;
  for (const auto& e : spec.edges)
    edges.emplace_back(spec.gene_index(e.source), spec.gene_index(e.target), e.sign);
  return GroundTruthNetwork::from_edges(spec.genes, edges);
}

enum class ToyBranch { kRed, kBlue, kBoth };

struct BranchToyConfig {
  std::size_t n_cells_per_branch = 200;
  double noise_std = 0.1;
  ToyBranch branch = ToyBranch::kBoth;
  std::uint64_t seed = 0;
};

struct ToyDataset {
  ExpressionMatrix expression;  // genes x, y, z
  std::vector<int> branch_labels;  // 0 = red, 1 = blue
};

// The furcation toy: x uniform on [0,1]; red cells y = x + eps, blue cells
// y = -x + eps; z is pure noise. Both branches share the same underlying
// network (x and y interrelated, z isolated).
inline ToyDataset toy_branches(const BranchToyConfig& cfg) {
  if (cfg.n_cells_per_branch < 1) throw config_error("toy needs at least one cell per branch");
  if (!(cfg.noise_std >= 0)) throw config_error("noise std must be nonnegative");
  std::vector<int> branches;
  if (cfg.branch == ToyBranch::kRed || cfg.branch == ToyBranch::kBoth)
    branches.insert(branches.end(), cfg.n_cells_per_branch, 0);
  if (cfg.branch == ToyBranch::kBlue || cfg.branch == ToyBranch::kBoth)
    branches.insert(branches.end(), cfg.n_cells_per_branch, 1);

  ToyDataset out;
  out.branch_labels = branches;
  out.expression.gene_names = {"x", "y", "z"};
  out.expression.values = Matrix(3, branches.size());
  out.expression.cell_ids.resize(branches.size());
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, cfg.noise_std > 0 ? cfg.noise_std : 1e-300);
  for (std::size_t p = 0; p < branches.size(); ++p) {
    out.expression.cell_ids[p] = "cell_" + std::to_string(p);
    double x = uni(rng);
    double eps = cfg.noise_std > 0 ? gauss(rng) : 0.0;
    double z = cfg.noise_std > 0 ? gauss(rng) : 0.0;
    double y = branches[p] == 0 ? x + eps : -x + eps;
    out.expression.values(0, p) = x;
    out.expression.values(1, p) = y;
    out.expression.values(2, p) = z;
  }
  return out;
}

}  // namespace grnkan
