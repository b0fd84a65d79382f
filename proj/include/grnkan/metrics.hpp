#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "grnkan/common.hpp"
#include "json.hpp"

namespace grnkan {

// Directed ground-truth network with activation (+1) / inhibition (-1) edge
// labels. Self-loops are not part of the evaluation universe; from_edges
// drops them and reports how many were dropped.
struct GroundTruthNetwork {
  std::vector<std::string> gene_names;
  std::map<std::pair<std::size_t, std::size_t>, int> edges;  // (src, dst) -> sign

  std::size_t n_genes() const { return gene_names.size(); }
  std::size_t n_edges() const { return edges.size(); }

  bool has_edge(std::size_t src, std::size_t dst) const { return edges.count({src, dst}) > 0; }
  int edge_sign(std::size_t src, std::size_t dst) const {
    auto it = edges.find({src, dst});
    return it == edges.end() ? 0 : it->second;
  }

  static GroundTruthNetwork from_edges(
      std::vector<std::string> gene_names,
      const std::vector<std::tuple<std::size_t, std::size_t, int>>& edge_list,
      std::size_t* dropped_self_loops = nullptr) {
    GroundTruthNetwork t;
    t.gene_names = std::move(gene_names);
    std::size_t dropped = 0;
    for (const auto& [src, dst, sign] : edge_list) {
      if (src >= t.gene_names.size() || dst >= t.gene_names.size())
        throw data_error("ground-truth edge references unknown gene index");
      if (src == dst) {
        ++dropped;
        continue;
      }
      if (sign != 1 && sign != -1) throw data_error("edge sign must be +1 or -1");
      if (!t.edges.emplace(std::make_pair(src, dst), sign).second)
        throw data_error("duplicate ground-truth edge");
    }
    if (dropped_self_loops) *dropped_self_loops = dropped;
    return t;
  }
};

struct EvaluationResult {
  double auroc = 0.0;
  double auprc = 0.0;
  double shd = 0.0;
  double fdr = 0.0;
  double signed_auroc = 0.0;
  double signed_auprc = 0.0;

  nlohmann::json to_json() const {
    return {{"auroc", auroc},         {"auprc", auprc},
            {"shd", shd},             {"fdr", fdr},
            {"signed_auroc", signed_auroc}, {"signed_auprc", signed_auprc}};
  }
};

namespace detail {

struct RankedItem {
  double value;  // |weight|
  bool positive;
};

inline void check_weights_shape(const Matrix& weights, const GroundTruthNetwork& truth) {
  const std::size_t g = truth.n_genes();
  if (g < 2) throw data_error("metrics need at least 2 genes");
  if (weights.rows() != g || weights.cols() != g)
    throw shape_error("score matrix shape does not match ground truth gene count");
}

// Area under TPR(FPR) by trapezoidal integration over descending unique
// thresholds; tied values form a single step.
inline double roc_area(std::vector<RankedItem>& items, double n_pos, double n_neg) {
  std::sort(items.begin(), items.end(),
            [](const RankedItem& a, const RankedItem& b) { return a.value > b.value; });
  double tp = 0, fp = 0, area = 0, prev_tpr = 0, prev_fpr = 0;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    while (j < items.size() && items[j].value == items[i].value) {
      if (items[j].positive)
        tp += 1;
      else
        fp += 1;
      ++j;
    }
    double tpr = tp / n_pos;
    double fpr = fp / n_neg;
    area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_tpr = tpr;
    prev_fpr = fpr;
    i = j;
  }
  return area;
}

// Area under precision-recall by step-wise summation sum (R_k - R_{k-1}) P_k
// over descending unique thresholds.
inline double pr_area(std::vector<RankedItem>& items, double n_pos) {
  std::sort(items.begin(), items.end(),
            [](const RankedItem& a, const RankedItem& b) { return a.value > b.value; });
  double tp = 0, fp = 0, area = 0, prev_recall = 0;
  std::size_t i = 0;
  while (i < items.size()) {
    std::size_t j = i;
    while (j < items.size() && items[j].value == items[i].value) {
      if (items[j].positive)
        tp += 1;
      else
        fp += 1;
      ++j;
    }
    double recall = tp / n_pos;
    double precision = (tp + fp) > 0 ? tp / (tp + fp) : 0.0;
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return area;
}

inline int sign_of(double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }

// Off-diagonal candidates ranked for unsigned evaluation: positives are the
// true edges regardless of sign.
inline std::vector<RankedItem> unsigned_items(const Matrix& weights,
                                              const GroundTruthNetwork& truth) {
  check_weights_shape(weights, truth);
  const std::size_t g = truth.n_genes();
  std::vector<RankedItem> items;
  items.reserve(g * (g - 1));
  for (std::size_t s = 0; s < g; ++s)
    for (std::size_t d = 0; d < g; ++d) {
      if (s == d) continue;
      items.push_back({std::abs(weights(s, d)), truth.has_edge(s, d)});
    }
  return items;
}

// Signed evaluation: a candidate is positive only when the pair is a true
// edge and the predicted sign matches; a sign-mismatched true pair acts as a
// false positive whenever it is predicted. TPR keeps |truth| in the
// denominator, so flipped signs depress the curve instead of re-defining it.
inline std::vector<RankedItem> signed_items(const Matrix& weights,
                                            const GroundTruthNetwork& truth,
                                            std::size_t* n_matched) {
  check_weights_shape(weights, truth);
  const std::size_t g = truth.n_genes();
  std::vector<RankedItem> items;
  items.reserve(g * (g - 1));
  std::size_t matched = 0;
  for (std::size_t s = 0; s < g; ++s)
    for (std::size_t d = 0; d < g; ++d) {
      if (s == d) continue;
      bool pos = truth.has_edge(s, d) && sign_of(weights(s, d)) == truth.edge_sign(s, d);
      if (pos) ++matched;
      items.push_back({std::abs(weights(s, d)), pos});
    }
  if (n_matched) *n_matched = matched;
  return items;
}

inline void check_degenerate(const GroundTruthNetwork& truth) {
  const std::size_t g = truth.n_genes();
  const std::size_t universe = g * (g - 1);
  if (truth.n_edges() == 0) throw data_error("metric undefined: ground truth has no edges");
  if (truth.n_edges() == universe)
    throw data_error("metric undefined: ground truth contains every candidate pair");
}

// Top-k candidate pairs by |weight|; ties broken by gene-name order.
inline std::vector<std::pair<std::size_t, std::size_t>> top_k_pairs(
    const Matrix& weights, const GroundTruthNetwork& truth, std::size_t k) {
  check_weights_shape(weights, truth);
  const std::size_t g = truth.n_genes();
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(g * (g - 1));
  for (std::size_t s = 0; s < g; ++s)
    for (std::size_t d = 0; d < g; ++d)
      if (s != d) pairs.emplace_back(s, d);
  const auto& names = truth.gene_names;
  std::sort(pairs.begin(), pairs.end(), [&](const auto& a, const auto& b) {
    double va = std::abs(weights(a.first, a.second));
    double vb = std::abs(weights(b.first, b.second));
    if (va != vb) return va > vb;
    if (names[a.first] != names[b.first]) return names[a.first] < names[b.first];
    return names[a.second] < names[b.second];
  });
  pairs.resize(std::min(k, pairs.size()));
  return pairs;
}

}  // namespace detail

inline double auroc(const Matrix& scores, const GroundTruthNetwork& truth) {
  detail::check_degenerate(truth);
  auto items = detail::unsigned_items(scores, truth);
  double p = static_cast<double>(truth.n_edges());
  double n = static_cast<double>(items.size()) - p;
  return detail::roc_area(items, p, n);
}

inline double auprc(const Matrix& scores, const GroundTruthNetwork& truth) {
  detail::check_degenerate(truth);
  auto items = detail::unsigned_items(scores, truth);
  return detail::pr_area(items, static_cast<double>(truth.n_edges()));
}

inline double signed_auroc(const Matrix& weights, const GroundTruthNetwork& truth) {
  detail::check_degenerate(truth);
  std::size_t matched = 0;
  auto items = detail::signed_items(weights, truth, &matched);
  double p = static_cast<double>(truth.n_edges());
  double n = static_cast<double>(items.size() - matched);
  return detail::roc_area(items, p, n);
}

inline double signed_auprc(const Matrix& weights, const GroundTruthNetwork& truth) {
  detail::check_degenerate(truth);
  auto items = detail::signed_items(weights, truth, nullptr);
  return detail::pr_area(items, static_cast<double>(truth.n_edges()));
}

// Structured Hamming distance between the top-k binarization of the
// prediction and the ground truth (signs ignored). k beyond the candidate
// universe is capped; `capped` reports that.
inline long shd(const Matrix& weights, const GroundTruthNetwork& truth, std::size_t k,
                bool* capped = nullptr) {
  const std::size_t g = truth.n_genes();
  const std::size_t universe = g * (g - 1);
  if (capped) *capped = k > universe;
  k = std::min(k, universe);
  auto pred = detail::top_k_pairs(weights, truth, k);
  long tp = 0;
  for (const auto& e : pred)
    if (truth.has_edge(e.first, e.second)) ++tp;
  long fp = static_cast<long>(pred.size()) - tp;
  long fn = static_cast<long>(truth.n_edges()) - tp;
  return fp + fn;
}

// False discovery rate FP/(FP+TP) over the top-k binarization.
inline double fdr(const Matrix& weights, const GroundTruthNetwork& truth, std::size_t k) {
  if (k == 0) throw data_error("FDR undefined for k = 0");
  const std::size_t g = truth.n_genes();
  k = std::min(k, g * (g - 1));
  auto pred = detail::top_k_pairs(weights, truth, k);
  long tp = 0;
  for (const auto& e : pred)
    if (truth.has_edge(e.first, e.second)) ++tp;
  return static_cast<double>(static_cast<long>(pred.size()) - tp) /
         static_cast<double>(pred.size());
}

// All six metrics; k defaults to the ground-truth edge count.
inline EvaluationResult evaluate(const Matrix& weights, const GroundTruthNetwork& truth,
                                 std::size_t k = 0) {
  if (k == 0) k = truth.n_edges();
  EvaluationResult r;
  r.auroc = auroc(weights, truth);
  r.auprc = auprc(weights, truth);
  r.signed_auroc = signed_auroc(weights, truth);
  r.signed_auprc = signed_auprc(weights, truth);
  r.shd = static_cast<double>(shd(weights, truth, k));
  r.fdr = fdr(weights, truth, k);
  return r;
}

}  // namespace grnkan
