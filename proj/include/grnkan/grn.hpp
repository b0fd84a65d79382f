#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <string>
#include <vector>

#include "grnkan/common.hpp"
#include "grnkan/pipeline.hpp"

namespace grnkan {

// Signed adjacency A: entry (j, i) is the weight of regulator j on target i.
// Diagonal is exactly zero; magnitudes are fractions of cells, so they lie
// in [0, 1].
struct AdjacencyMatrix {
  Matrix weights;  // g x g, row = regulator, column = target
  std::vector<std::string> gene_names;
};

struct CellSubset {
  std::vector<std::size_t> indices;
  std::string label;
};

struct ClusterConfig {
  double eps = 0.0;  // <= 0: median 4-NN distance heuristic
  int min_points = 5;
};

// Per-cell z-scores of gradient magnitudes across regulator genes
// (population standard deviation). A zero-variance vector (all magnitudes
// identical) is degenerate and maps to all zeros.
inline std::vector<double> standardize(const std::vector<double>& gradient_vector,
                                       bool* degenerate = nullptr) {
  const std::size_t n = gradient_vector.size();
  if (n < 2) throw shape_error("standardize needs at least 2 regulator gradients");
  std::vector<double> mag(n);
  double mean = 0.0, max_mag = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    mag[j] = std::abs(gradient_vector[j]);
    mean += mag[j];
    max_mag = std::max(max_mag, mag[j]);
  }
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double m : mag) var += (m - mean) * (m - mean);
  var /= static_cast<double>(n);
  double sd = std::sqrt(var);
  std::vector<double> z(n, 0.0);
  if (sd <= 1e-12 * std::max(max_mag, 1e-300)) {
    if (degenerate) *degenerate = true;
    return z;
  }
  if (degenerate) *degenerate = false;
  for (std::size_t j = 0; j < n; ++j) z[j] = (mag[j] - mean) / sd;
  return z;
}

namespace detail {
// Sign votes for one (regulator, target) pair over a cell subset. Zeros are
// excluded from the vote; ties fall back to the sign of the mean gradient.
inline double majority_sign(const Matrix& grads, std::size_t row,
                            const std::vector<std::size_t>& cells) {
  long pos = 0, neg = 0;
  double sum = 0.0;
  for (std::size_t p : cells) {
    double v = grads(row, p);
    sum += v;
    if (v > 0.0)
      ++pos;
    else if (v < 0.0)
      ++neg;
  }
  if (pos > neg) return 1.0;
  if (neg > pos) return -1.0;
  if (sum > 0.0) return 1.0;
  if (sum < 0.0) return -1.0;
  return 0.0;
}
}  // namespace detail

// Turns one target's gradient field into column i of the adjacency matrix:
// A_{j,i} = mode_p(sign grad_j(p)) * |{p : z_{j,p} > z_threshold}| / |cells|.
inline std::vector<double> sparsify(const GradientField& field, const CellSubset& cells,
                                    std::size_t n_genes, double z_threshold = 1.0) {
  if (cells.indices.empty()) throw data_error("sparsify on empty cell subset");
  const std::size_t rows = field.gradients.rows();
  if (field.regulator_index.size() != rows || rows + 1 != n_genes)
    throw shape_error("gradient field shape does not match gene count");
  for (std::size_t p : cells.indices)
    if (p >= field.gradients.cols()) throw shape_error("cell index out of range");

  std::vector<std::size_t> exceed(rows, 0);
  std::vector<double> per_cell(rows);
  for (std::size_t p : cells.indices) {
    for (std::size_t r = 0; r < rows; ++r) per_cell[r] = field.gradients(r, p);
    std::vector<double> z = standardize(per_cell);
    for (std::size_t r = 0; r < rows; ++r)
      if (z[r] > z_threshold) ++exceed[r];
  }

  std::vector<double> column(n_genes, 0.0);
  const double inv = 1.0 / static_cast<double>(cells.indices.size());
  for (std::size_t r = 0; r < rows; ++r) {
    double s = detail::majority_sign(field.gradients, r, cells.indices);
    column[field.regulator_index[r]] = s * inv * static_cast<double>(exceed[r]);
  }
  return column;
}

inline CellSubset all_cells(std::size_t n_cells, std::string label = "all") {
  CellSubset s;
  s.indices.resize(n_cells);
  std::iota(s.indices.begin(), s.indices.end(), 0);
  s.label = std::move(label);
  return s;
}

// Assembles the full adjacency matrix from all gradient fields over a cell
// subset. Requires exactly one field per target gene.
inline AdjacencyMatrix infer_grn(const std::vector<GradientField>& fields,
                                 const std::vector<std::string>& gene_names,
                                 const CellSubset& cells, double z_threshold = 1.0) {
  const std::size_t g = gene_names.size();
  if (fields.size() != g) throw data_error("incomplete gradient field collection");
  std::vector<bool> seen(g, false);
  for (const auto& f : fields) {
    if (f.target_index >= g || seen[f.target_index])
      throw data_error("gradient fields do not cover every target gene exactly once");
    seen[f.target_index] = true;
  }
  AdjacencyMatrix adj;
  adj.gene_names = gene_names;
  adj.weights = Matrix(g, g, 0.0);
  for (const auto& f : fields) {
    std::vector<double> col = sparsify(f, cells, g, z_threshold);
    for (std::size_t j = 0; j < g; ++j) adj.weights(j, f.target_index) = col[j];
  }
  return adj;
}

inline AdjacencyMatrix infer_grn(const std::vector<GradientField>& fields,
                                 const std::vector<std::string>& gene_names,
                                 double z_threshold = 1.0) {
  std::size_t c = fields.empty() ? 0 : fields.front().gradients.cols();
  return infer_grn(fields, gene_names, all_cells(c), z_threshold);
}

// Per-cell feature vectors for clustering: concatenation of every target's
// gradient vector at that cell, ordered by target index.
inline Matrix gradient_features(const std::vector<GradientField>& fields) {
  if (fields.empty()) throw data_error("no gradient fields");
  const std::size_t c = fields.front().gradients.cols();
  std::vector<const GradientField*> ordered(fields.size(), nullptr);
  for (const auto& f : fields) {
    if (f.target_index >= fields.size() || ordered[f.target_index])
      throw data_error("gradient fields do not cover every target gene exactly once");
    ordered[f.target_index] = &f;
  }
  const std::size_t dim_per = fields.front().gradients.rows();
  Matrix features(c, fields.size() * dim_per);
  for (std::size_t t = 0; t < ordered.size(); ++t) {
    const Matrix& gmat = ordered[t]->gradients;
    if (gmat.cols() != c || gmat.rows() != dim_per)
      throw shape_error("gradient fields have inconsistent shapes");
    for (std::size_t p = 0; p < c; ++p)
      for (std::size_t r = 0; r < dim_per; ++r) features(p, t * dim_per + r) = gmat(r, p);
  }
  return features;
}

// Classic DBSCAN with Euclidean metric over row vectors of `points`.
// A point's eps-neighborhood includes the point itself. Labels are assigned
// in scan order; -1 marks outliers.
inline std::vector<int> dbscan(const Matrix& points, double eps, int min_points) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  if (min_points < 1) throw config_error("min_points must be at least 1");
  const double eps_sq = eps * eps;
  auto dist_sq = [&](std::size_t a, std::size_t b) {
    const double* pa = points.row(a);
    const double* pb = points.row(b);
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      double diff = pa[k] - pb[k];
      acc += diff * diff;
    }
    return acc;
  };
  std::vector<std::vector<std::size_t>> neighbors(n);
  for (std::size_t a = 0; a < n; ++a) {
    neighbors[a].push_back(a);
    for (std::size_t b = a + 1; b < n; ++b) {
      if (dist_sq(a, b) <= eps_sq) {
        neighbors[a].push_back(b);
        neighbors[b].push_back(a);
      }
    }
  }
  std::vector<int> labels(n, -1);
  std::vector<bool> visited(n, false);
  int next_label = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (visited[i]) continue;
    visited[i] = true;
    if (neighbors[i].size() < static_cast<std::size_t>(min_points)) continue;
    int label = next_label++;
    labels[i] = label;
    std::queue<std::size_t> frontier;
    for (std::size_t nb : neighbors[i]) frontier.push(nb);
    while (!frontier.empty()) {
      std::size_t q = frontier.front();
      frontier.pop();
      if (labels[q] == -1) labels[q] = label;  // border point
      if (visited[q]) continue;
      visited[q] = true;
      labels[q] = label;
      if (neighbors[q].size() >= static_cast<std::size_t>(min_points))
        for (std::size_t nb : neighbors[q]) frontier.push(nb);
    }
  }
  return labels;
}

// Median distance to the 4th nearest neighbor (excluding self); the usual
// rule of thumb for picking DBSCAN's eps.
inline double median_knn_distance(const Matrix& points, std::size_t k = 4) {
  const std::size_t n = points.rows();
  const std::size_t d = points.cols();
  if (n < 2) return 0.0;
  std::vector<double> kth(n, 0.0);
  std::vector<double> dists;
  for (std::size_t a = 0; a < n; ++a) {
    dists.clear();
    dists.reserve(n - 1);
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      double acc = 0.0;
      for (std::size_t kk = 0; kk < d; ++kk) {
        double diff = points(a, kk) - points(b, kk);
        acc += diff * diff;
      }
      dists.push_back(acc);
    }
    std::size_t pos = std::min(k, dists.size()) - 1;
    std::nth_element(dists.begin(), dists.begin() + pos, dists.end());
    kth[a] = std::sqrt(dists[pos]);
  }
  std::size_t mid = kth.size() / 2;
  std::nth_element(kth.begin(), kth.begin() + mid, kth.end());
  return kth[mid];
}

// DBSCAN over per-cell gradient feature vectors. Returns one integer label
// per cell; -1 marks outliers.
inline std::vector<int> cluster_gradients(const std::vector<GradientField>& fields,
                                          const ClusterConfig& cfg) {
  Matrix features = gradient_features(fields);
  double eps = cfg.eps > 0.0 ? cfg.eps : median_knn_distance(features, 4);
  return dbscan(features, eps, cfg.min_points);
}

// One adjacency per non-outlier cluster label.
inline std::map<int, AdjacencyMatrix> infer_cluster_grns(const std::vector<GradientField>& fields,
                                                         const std::vector<std::string>& gene_names,
                                                         const std::vector<int>& labels,
                                                         double z_threshold = 1.0) {
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t p = 0; p < labels.size(); ++p)
    if (labels[p] >= 0) groups[labels[p]].push_back(p);
  std::map<int, AdjacencyMatrix> result;
  for (const auto& [label, cells] : groups) {
    if (cells.empty()) continue;
    CellSubset subset{cells, std::to_string(label)};
    result.emplace(label, infer_grn(fields, gene_names, subset, z_threshold));
  }
  return result;
}

}  // namespace grnkan
