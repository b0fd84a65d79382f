#pragma once

#include <cmath>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "grnkan/common.hpp"
#include "grnkan/network.hpp"
#include "grnkan/trainer.hpp"

namespace grnkan {

// Gene expression matrix X: genes x cells.
struct ExpressionMatrix {
  Matrix values;
  std::vector<std::string> gene_names;
  std::vector<std::string> cell_ids;

  std::size_t n_genes() const { return values.rows(); }
  std::size_t n_cells() const { return values.cols(); }

  void validate() const {
    if (values.rows() < 2) throw data_error("expression matrix needs at least 2 genes");
    if (values.cols() < 2) throw data_error("expression matrix needs at least 2 cells");
    if (gene_names.size() != values.rows()) throw shape_error("gene name count mismatch");
    if (cell_ids.size() != values.cols()) throw shape_error("cell id count mismatch");
    for (double v : values.data())
      if (!std::isfinite(v)) throw data_error("expression matrix contains non-finite values");
    std::set<std::string> uniq(gene_names.begin(), gene_names.end());
    if (uniq.size() != gene_names.size()) throw data_error("gene names are not unique");
  }
};

// The per-target view X without gene i: regressors are the remaining rows in
// original order, index_map sends regressor row positions back to gene
// indices in X.
struct GeneView {
  std::size_t target_index = 0;
  Matrix regressors;  // (g-1) x c
  std::vector<double> target;
  std::vector<std::size_t> index_map;
};

inline GeneView build_gene_view(const ExpressionMatrix& x, std::size_t target_index) {
  const std::size_t g = x.n_genes();
  const std::size_t c = x.n_cells();
  if (target_index >= g) throw shape_error("gene index out of range");
  GeneView view;
  view.target_index = target_index;
  view.regressors = Matrix(g - 1, c);
  view.target.assign(x.values.row(target_index), x.values.row(target_index) + c);
  view.index_map.reserve(g - 1);
  std::size_t r = 0;
  for (std::size_t j = 0; j < g; ++j) {
    if (j == target_index) continue;
    std::copy(x.values.row(j), x.values.row(j) + c, view.regressors.row(r));
    view.index_map.push_back(j);
    ++r;
  }
  return view;
}

// Raw-unit input gradients of predictor i at every cell: rows follow the
// GeneView regressor order, regulator_index maps them to gene indices.
struct GradientField {
  std::size_t target_index = 0;
  std::vector<std::size_t> regulator_index;
  Matrix gradients;  // (g-1) x c
};

struct GeneResult {
  std::size_t gene_index = 0;
  std::optional<KanNetwork> network;
  TrainReport report;
  std::string error;  // nonempty if training failed

  bool ok() const { return network.has_value(); }
};

// Trains one predictor per gene. Per-gene seeds derive from the master seed
// and the gene index, so results do not depend on worker count or order.
inline std::vector<GeneResult> train_all(const ExpressionMatrix& x, const TrainConfig& cfg,
                                         unsigned n_workers = 1) {
  x.validate();
  const std::size_t g = x.n_genes();
  const std::size_t c = x.n_cells();
  std::vector<GeneResult> results(g);
  parallel_for(g, n_workers, [&](std::size_t i) {
    GeneResult& res = results[i];
    res.gene_index = i;
    try {
      GeneView view = build_gene_view(x, i);
      Matrix inputs(c, g - 1);
      for (std::size_t p = 0; p < c; ++p)
        for (std::size_t j = 0; j + 1 < g; ++j) inputs(p, j) = view.regressors(j, p);
      TrainConfig gene_cfg = cfg;
      gene_cfg.seed = derive_seed(cfg.seed, i);
      auto [net, report] = train_predictor(inputs, view.target, gene_cfg);
      res.network = std::move(net);
      res.report = std::move(report);
    } catch (const std::exception& e) {
      res.error = e.what();
    }
  });
  return results;
}

// Evaluates every predictor's input gradient at all cells (train and test).
// Failed genes produce an all-zero field.
inline std::vector<GradientField> evaluate_gradients(const std::vector<GeneResult>& predictors,
                                                     const ExpressionMatrix& x,
                                                     unsigned n_workers = 1) {
  const std::size_t g = x.n_genes();
  const std::size_t c = x.n_cells();
  if (predictors.size() != g) throw shape_error("predictor count does not match gene count");
  std::vector<GradientField> fields(g);
  parallel_for(g, n_workers, [&](std::size_t i) {
    GradientField& f = fields[i];
    f.target_index = i;
    f.gradients = Matrix(g - 1, c);
    f.regulator_index.reserve(g - 1);
    for (std::size_t j = 0; j < g; ++j)
      if (j != i) f.regulator_index.push_back(j);
    const GeneResult& res = predictors[i];
    if (!res.ok()) return;
    const KanNetwork& net = *res.network;
    if (net.input_dim() != static_cast<int>(g - 1))
      throw shape_error("predictor dimension does not match expression matrix");
    Workspace ws(net);
    std::vector<double> cell_input(g - 1);
    std::vector<double> grad(g - 1);
    for (std::size_t p = 0; p < c; ++p) {
      for (std::size_t r = 0; r + 1 < g; ++r) cell_input[r] = x.values(f.regulator_index[r], p);
      net.input_gradient(cell_input.data(), ws, grad.data());
      for (std::size_t r = 0; r + 1 < g; ++r) f.gradients(r, p) = grad[r];
    }
  });
  return fields;
}

}  // namespace grnkan
