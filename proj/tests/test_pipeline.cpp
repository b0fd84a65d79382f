#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "grnkan/pipeline.hpp"

using namespace grnkan;

namespace {

ExpressionMatrix random_expression(std::size_t g, std::size_t c, std::uint64_t seed) {
  ExpressionMatrix x;
  x.values = Matrix(g, c);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (std::size_t i = 0; i < g; ++i) {
    x.gene_names.push_back("g" + std::to_string(i + 1));
    for (std::size_t p = 0; p < c; ++p) x.values(i, p) = u(rng);
  }
  for (std::size_t p = 0; p < c; ++p) x.cell_ids.push_back("cell_" + std::to_string(p));
  return x;
}

}  // namespace

TEST_CASE("gene view removes exactly the target row") {
  ExpressionMatrix x = random_expression(3, 5, 1);
  GeneView v = build_gene_view(x, 1);
  CHECK(v.regressors.rows() == 2);
  CHECK(v.index_map == std::vector<std::size_t>{0, 2});
  for (std::size_t p = 0; p < 5; ++p) {
    CHECK(v.regressors(0, p) == x.values(0, p));
    CHECK(v.regressors(1, p) == x.values(2, p));
    CHECK(v.target[p] == x.values(1, p));
  }
}

TEST_CASE("two-gene view keeps the single other row") {
  ExpressionMatrix x = random_expression(2, 4, 2);
  GeneView v = build_gene_view(x, 0);
  CHECK(v.regressors.rows() == 1);
  CHECK(v.index_map == std::vector<std::size_t>{1});
  CHECK_THROWS_AS(build_gene_view(x, 2), shape_error);
}

TEST_CASE("every gene view reconstructs the original matrix") {
  ExpressionMatrix x = random_expression(5, 7, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    GeneView v = build_gene_view(x, i);
    Matrix rebuilt(5, 7);
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t p = 0; p < 7; ++p) rebuilt(v.index_map[r], p) = v.regressors(r, p);
    for (std::size_t p = 0; p < 7; ++p) rebuilt(i, p) = v.target[p];
    REQUIRE(rebuilt == x.values);
  }
}

TEST_CASE("train_all builds one predictor per gene with the right dimensions") {
  ExpressionMatrix x = random_expression(3, 30, 5);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 1;
  auto results = train_all(x, cfg);
  REQUIRE(results.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(results[i].ok());
    CHECK(results[i].gene_index == i);
    CHECK(results[i].network->input_dim() == 2);
  }
}

TEST_CASE("seven-gene predictors use the default architecture") {
  ExpressionMatrix x = random_expression(7, 20, 7);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 2;
  auto results = train_all(x, cfg);
  REQUIRE(results.size() == 7);
  for (const auto& r : results)
    CHECK(r.network->widths() == std::vector<int>{6, 13, 27, 13, 1});
}

TEST_CASE("worker count does not change training results") {
  ExpressionMatrix x = random_expression(5, 40, 9);
  TrainConfig cfg;
  cfg.epochs = 8;
  cfg.seed = 31;
  auto serial = train_all(x, cfg, 1);
  auto parallel = train_all(x, cfg, 8);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    REQUIRE(serial[i].ok());
    REQUIRE(parallel[i].ok());
    for (std::size_t li = 0; li < serial[i].network->layers.size(); ++li) {
      REQUIRE(serial[i].network->layers[li].base_w == parallel[i].network->layers[li].base_w);
      REQUIRE(serial[i].network->layers[li].spline_w ==
              parallel[i].network->layers[li].spline_w);
    }
  }
}

TEST_CASE("constant-zero predictors give an all-zero gradient field") {
  ExpressionMatrix x = random_expression(3, 10, 11);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 1;
  auto results = train_all(x, cfg);
  for (auto& r : results)
    for (auto& l : r.network->layers) {
      std::fill(l.base_w.begin(), l.base_w.end(), 0.0);
      std::fill(l.spline_w.begin(), l.spline_w.end(), 0.0);
    }
  auto fields = evaluate_gradients(results, x);
  REQUIRE(fields.size() == 3);
  for (const auto& f : fields) {
    CHECK(f.gradients.rows() == 2);
    CHECK(f.gradients.cols() == 10);
    for (double v : f.gradients.data()) REQUIRE(v == 0.0);
  }
}

TEST_CASE("failed genes yield zero fields instead of aborting") {
  ExpressionMatrix x = random_expression(3, 10, 13);
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.seed = 1;
  auto results = train_all(x, cfg);
  results[1].network.reset();
  results[1].error = "synthetic failure";
  auto fields = evaluate_gradients(results, x);
  REQUIRE(fields.size() == 3);
  for (double v : fields[1].gradients.data()) REQUIRE(v == 0.0);
}

TEST_CASE("predictor never sees its own gene") {
  ExpressionMatrix x = random_expression(4, 12, 17);
  for (std::size_t i = 0; i < 4; ++i) {
    GeneView v = build_gene_view(x, i);
    CHECK(std::find(v.index_map.begin(), v.index_map.end(), i) == v.index_map.end());
  }
}

TEST_CASE("gradient field recovers a known linear relation") {
  // Two genes with y = 2x + noise; the trained predictor for y must carry
  // slope about 2 in raw units at most cells.
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.05);
  const std::size_t c = 400;
  ExpressionMatrix x;
  x.gene_names = {"x", "y"};
  x.values = Matrix(2, c);
  for (std::size_t p = 0; p < c; ++p) {
    double xv = ux(rng);
    x.values(0, p) = xv;
    x.values(1, p) = 2.0 * xv + noise(rng);
    x.cell_ids.push_back("c" + std::to_string(p));
  }
  TrainConfig cfg;
  cfg.epochs = 1200;
  cfg.learning_rate = 1e-3;
  cfg.gap_threshold = 1e9;
  cfg.seed = 3;
  auto results = train_all(x, cfg);
  auto fields = evaluate_gradients(results, x);

  const GradientField& fy = fields[1];
  REQUIRE(fy.regulator_index == std::vector<std::size_t>{0});
  std::vector<double> slopes(fy.gradients.row(0), fy.gradients.row(0) + c);
  std::nth_element(slopes.begin(), slopes.begin() + c / 2, slopes.end());
  double median = slopes[c / 2];
  CHECK(median > 1.5);
  CHECK(median < 2.5);

  // Point consistency with the network-level gradient.
  Workspace ws(*results[1].network);
  std::vector<double> cell_input = {x.values(0, 5)};
  auto g = results[1].network->input_gradient(cell_input, ws);
  CHECK(fy.gradients(0, 5) == g[0]);
}

TEST_CASE("evaluate_gradients covers all cells and maps indices back") {
  ExpressionMatrix x = random_expression(4, 15, 29);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 4;
  auto results = train_all(x, cfg);
  auto fields = evaluate_gradients(results, x, 3);
  REQUIRE(fields.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(fields[i].target_index == i);
    CHECK(fields[i].gradients.rows() == 3);
    CHECK(fields[i].gradients.cols() == 15);
    CHECK(fields[i].regulator_index.size() == 3);
    for (std::size_t j : fields[i].regulator_index) CHECK(j != i);
  }
  // Deterministic across worker counts.
  auto fields1 = evaluate_gradients(results, x, 1);
  for (std::size_t i = 0; i < 4; ++i) REQUIRE(fields[i].gradients == fields1[i].gradients);
}

TEST_CASE("expression matrix validation") {
  ExpressionMatrix x = random_expression(3, 5, 31);
  CHECK_NOTHROW(x.validate());
  x.gene_names[1] = x.gene_names[0];
  CHECK_THROWS_AS(x.validate(), data_error);
  ExpressionMatrix bad = random_expression(3, 5, 31);
  bad.values(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(bad.validate(), data_error);
  ExpressionMatrix tiny = random_expression(2, 5, 31);
  tiny.values = Matrix(1, 5);
  tiny.gene_names = {"a"};
  CHECK_THROWS_AS(tiny.validate(), data_error);
}
