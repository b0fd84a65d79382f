#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "grnkan/common.hpp"
#include "grnkan/pipeline.hpp"

namespace grnkan {

struct ForestConfig {
  int n_trees = 100;
  int max_features = 0;  // 0: ceil(sqrt(d))
  int min_samples_leaf = 5;
  std::uint64_t seed = 0;
  bool bootstrap = true;

  int resolved_max_features(std::size_t d) const {
    int mf = max_features > 0 ? max_features
                              : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
    return std::clamp(mf, 1, static_cast<int>(d));
  }
};

// CART regression tree with variance-reduction splits and random feature
// subsets per node.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;  // -1: leaf
    double threshold = 0.0;
    double value = 0.0;  // leaf mean
    int left = -1, right = -1;
  };

  void fit(const Matrix& inputs, const std::vector<double>& targets,
           const std::vector<std::size_t>& samples, const ForestConfig& cfg, std::mt19937_64& rng,
           std::vector<double>& importance_accum) {
    d_ = inputs.cols();
    std::vector<std::size_t> work(samples);
    n_total_ = static_cast<double>(samples.size());
    build(inputs, targets, work, 0, work.size(), cfg, rng, importance_accum);
  }

  double predict(const double* x) const {
    int node = 0;
    while (nodes_[node].feature >= 0)
      node = x[nodes_[node].feature] <= nodes_[node].threshold ? nodes_[node].left
                                                               : nodes_[node].right;
    return nodes_[node].value;
  }

  std::size_t node_count() const { return nodes_.size(); }

 private:
  // Builds the subtree over work[lo, hi); returns the node index.
  int build(const Matrix& inputs, const std::vector<double>& targets,
            std::vector<std::size_t>& work, std::size_t lo, std::size_t hi,
            const ForestConfig& cfg, std::mt19937_64& rng, std::vector<double>& importance) {
    const std::size_t n = hi - lo;
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      double t = targets[work[i]];
      sum += t;
      sum_sq += t * t;
    }
    const double sse_parent = sum_sq - sum * sum / static_cast<double>(n);

    int node_id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[node_id].value = sum / static_cast<double>(n);

    const std::size_t min_leaf = static_cast<std::size_t>(cfg.min_samples_leaf);
    if (n < 2 * min_leaf || sse_parent <= 1e-12) return node_id;

    // Random feature subset for this node.
    std::vector<int> features(d_);
    std::iota(features.begin(), features.end(), 0);
    const int mf = cfg.resolved_max_features(d_);
    for (int i = 0; i < mf; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(d_) - 1);
      std::swap(features[i], features[pick(rng)]);
    }

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_reduction = 0.0;
    std::vector<std::pair<double, double>> vals;  // (feature value, target)
    vals.reserve(n);
    for (int fi = 0; fi < mf; ++fi) {
      int f = features[fi];
      vals.clear();
      for (std::size_t i = lo; i < hi; ++i)
        vals.emplace_back(inputs(work[i], f), targets[work[i]]);
      std::sort(vals.begin(), vals.end());
      double left_sum = 0.0, left_sq = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += vals[i].second;
        left_sq += vals[i].second * vals[i].second;
        std::size_t nl = i + 1, nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        if (vals[i].first == vals[i + 1].first) continue;  // no boundary here
        double right_sum = sum - left_sum, right_sq = sum_sq - left_sq;
        double sse_l = left_sq - left_sum * left_sum / static_cast<double>(nl);
        double sse_r = right_sq - right_sum * right_sum / static_cast<double>(nr);
        double reduction = sse_parent - sse_l - sse_r;
        if (reduction > best_reduction) {
          best_reduction = reduction;
          best_feature = f;
          best_threshold = (vals[i].first + vals[i + 1].first) / 2.0;
        }
      }
    }
    if (best_feature < 0) return node_id;

    // Partition work[lo, hi) around the threshold.
    std::size_t mid = lo;
    for (std::size_t i = lo; i < hi; ++i)
      if (inputs(work[i], best_feature) <= best_threshold) std::swap(work[mid++], work[i]);
    if (mid == lo || mid == hi) return node_id;  // numeric edge case: give up

    importance[best_feature] += best_reduction / n_total_;
    nodes_[node_id].feature = best_feature;
    nodes_[node_id].threshold = best_threshold;
    nodes_[node_id].left = build(inputs, targets, work, lo, mid, cfg, rng, importance);
    nodes_[node_id].right = build(inputs, targets, work, mid, hi, cfg, rng, importance);
    return node_id;
  }

  std::size_t d_ = 0;
  double n_total_ = 0.0;
  std::vector<Node> nodes_;
};

// Bagged regression forest; keeps the per-feature variance-reduction totals
// used as GENIE3-style importances.
class RegressionForest {
 public:
  void fit(const Matrix& inputs, const std::vector<double>& targets, const ForestConfig& cfg) {
    const std::size_t c = inputs.rows();
    const std::size_t d = inputs.cols();
    if (targets.size() != c) throw shape_error("target length does not match sample count");
    if (c < 2 * static_cast<std::size_t>(cfg.min_samples_leaf))
      throw config_error("too few samples for the configured leaf size");
    if (cfg.n_trees < 1) throw config_error("need at least one tree");
    d_ = d;
    raw_importance_.assign(d, 0.0);
    trees_.clear();
    trees_.resize(cfg.n_trees);
    std::vector<double> tree_importance(d);
    for (int t = 0; t < cfg.n_trees; ++t) {
      std::mt19937_64 rng(derive_seed(cfg.seed, static_cast<std::uint64_t>(t)));
      std::vector<std::size_t> samples(c);
      if (cfg.bootstrap) {
        std::uniform_int_distribution<std::size_t> pick(0, c - 1);
        for (auto& s : samples) s = pick(rng);
      } else {
        std::iota(samples.begin(), samples.end(), 0);
      }
      std::fill(tree_importance.begin(), tree_importance.end(), 0.0);
      trees_[t].fit(inputs, targets, samples, cfg, rng, tree_importance);
      for (std::size_t f = 0; f < d; ++f) raw_importance_[f] += tree_importance[f];
    }
    for (double& v : raw_importance_) v /= static_cast<double>(cfg.n_trees);
  }

  double predict(const double* x) const {
    double acc = 0.0;
    for (const auto& t : trees_) acc += t.predict(x);
    return acc / static_cast<double>(trees_.size());
  }

  std::size_t feature_count() const { return d_; }
  const std::vector<double>& raw_importances() const { return raw_importance_; }

 private:
  std::size_t d_ = 0;
  std::vector<double> raw_importance_;
  std::vector<RegressionTree> trees_;
};

inline RegressionForest fit_forest(const Matrix& inputs, const std::vector<double>& targets,
                                   const ForestConfig& cfg) {
  RegressionForest forest;
  forest.fit(inputs, targets, cfg);
  return forest;
}

// Per-feature importances normalized to sum 1; all zeros when the forest
// found no informative split.
inline std::vector<double> importance_scores(const RegressionForest& forest) {
  std::vector<double> scores = forest.raw_importances();
  double total = std::accumulate(scores.begin(), scores.end(), 0.0);
  if (total > 0.0)
    for (double& v : scores) v /= total;
  return scores;
}

// Nonnegative importance matrix: column i holds regulator importances for
// target i, normalized per column; diagonal is zero.
struct ImportanceMatrix {
  Matrix weights;  // g x g, row = regulator, column = target
  std::vector<std::string> gene_names;
  std::vector<std::string> warnings;
};

inline ImportanceMatrix genie3_infer(const ExpressionMatrix& x, const ForestConfig& cfg,
                                     unsigned n_workers = 1) {
  x.validate();
  const std::size_t g = x.n_genes();
  const std::size_t c = x.n_cells();
  ImportanceMatrix result;
  result.gene_names = x.gene_names;
  result.weights = Matrix(g, g, 0.0);
  std::vector<std::string> errors(g);
  parallel_for(g, n_workers, [&](std::size_t i) {
    try {
      GeneView view = build_gene_view(x, i);
      Matrix inputs(c, g - 1);
      for (std::size_t p = 0; p < c; ++p)
        for (std::size_t j = 0; j + 1 < g; ++j) inputs(p, j) = view.regressors(j, p);
      ForestConfig gene_cfg = cfg;
      gene_cfg.seed = derive_seed(cfg.seed, i);
      RegressionForest forest = fit_forest(inputs, view.target, gene_cfg);
      std::vector<double> imp = importance_scores(forest);
      for (std::size_t r = 0; r + 1 < g; ++r) result.weights(view.index_map[r], i) = imp[r];
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < g; ++i)
    if (!errors[i].empty())
      result.warnings.push_back("gene " + x.gene_names[i] + ": " + errors[i]);
  return result;
}

}  // namespace grnkan
