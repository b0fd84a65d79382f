#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "grnkan/bspline.hpp"

using grnkan::bspline_basis;
using grnkan::bspline_basis_derivative;
using grnkan::SplineGrid;

namespace {

// Naive textbook Cox-de Boor recursion, written independently of the
// windowed implementation. B_{i,0} uses half-open intervals.
double naive_bspline(int i, int degree, double x, const SplineGrid& g) {
  if (degree == 0) return (x >= g.knot(i) && x < g.knot(i + 1)) ? 1.0 : 0.0;
  double left = 0.0, right = 0.0;
  double d1 = g.knot(i + degree) - g.knot(i);
  if (d1 > 0.0) left = (x - g.knot(i)) / d1 * naive_bspline(i, degree - 1, x, g);
  double d2 = g.knot(i + degree + 1) - g.knot(i + 1);
  if (d2 > 0.0) right = (g.knot(i + degree + 1) - x) / d2 * naive_bspline(i + 1, degree - 1, x, g);
  return left + right;
}

std::vector<double> naive_basis(double x, const SplineGrid& g) {
  std::vector<double> out(g.basis_count(), 0.0);
  for (int i = 0; i < g.basis_count(); ++i) out[i] = naive_bspline(i, g.order(), x, g);
  return out;
}

}  // namespace

TEST_CASE("grid invariants") {
  SplineGrid g(3, 10, 0.0, 1.0);
  CHECK(g.knot_count() == 10 + 2 * 3 + 1);
  CHECK(g.basis_count() == 13);
  for (int i = 0; i + 1 < g.knot_count(); ++i) CHECK(g.knot(i) < g.knot(i + 1));
  CHECK(g.knot(3) == Catch::Approx(0.0));
  CHECK(g.knot(13) == Catch::Approx(1.0));
  CHECK_THROWS_AS(SplineGrid(3, 0, 0.0, 1.0), grnkan::config_error);
  CHECK_THROWS_AS(SplineGrid(3, 10, 1.0, 1.0), grnkan::config_error);
}

TEST_CASE("partition of unity at the domain midpoint") {
  SplineGrid g(3, 10, 0.0, 1.0);
  auto b = bspline_basis(0.5, g);
  double sum = 0.0;
  for (double v : b) {
    CHECK(v >= 0.0);
    sum += v;
  }
  CHECK(std::abs(sum - 1.0) < 1e-12);
}

TEST_CASE("partition of unity on 1000 random interior points") {
  SplineGrid g(3, 10, -0.2, 1.2);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-0.2, 1.2);
  for (int t = 0; t < 1000; ++t) {
    double x = u(rng);
    auto b = bspline_basis(x, g);
    double sum = 0.0;
    for (double v : b) {
      CHECK(v >= 0.0);
      sum += v;
    }
    REQUIRE(std::abs(sum - 1.0) < 1e-10);
  }
}

TEST_CASE("compact support outside the nominal domain") {
  SplineGrid g(3, 10, 0.0, 1.0);
  // Inside the extension zone boundary splines are active; sum stays <= 1.
  for (double x : {-0.25, -0.05, 1.02, 1.25}) {
    auto b = bspline_basis(x, g);
    double sum = 0.0;
    for (double v : b) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(sum <= 1.0 + 1e-12);
  }
  // Beyond the knot support everything vanishes.
  for (double x : {-0.5, 1.5, 100.0}) {
    auto b = bspline_basis(x, g);
    for (double v : b) CHECK(v == 0.0);
  }
}

TEST_CASE("matches the naive recursive oracle") {
  SplineGrid g(3, 10, 0.0, 1.0);
  auto fast = bspline_basis(0.5, g);
  auto slow = naive_basis(0.5, g);
  REQUIRE(fast.size() == slow.size());
  for (std::size_t i = 0; i < fast.size(); ++i)
    CHECK(fast[i] == Catch::Approx(slow[i]).margin(1e-14));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-0.4, 1.4);
  for (int t = 0; t < 200; ++t) {
    double x = u(rng);
    auto a = bspline_basis(x, g);
    auto b = naive_basis(x, g);
    for (std::size_t i = 0; i < a.size(); ++i)
      REQUIRE(a[i] == Catch::Approx(b[i]).margin(1e-13));
  }
}

TEST_CASE("oracle agreement for other orders") {
  for (int k : {1, 2, 4}) {
    SplineGrid g(k, 6, -1.0, 2.0);
    std::mt19937_64 rng(13 + k);
    std::uniform_real_distribution<double> u(-1.5, 2.5);
    for (int t = 0; t < 100; ++t) {
      double x = u(rng);
      auto a = bspline_basis(x, g);
      auto b = naive_basis(x, g);
      for (std::size_t i = 0; i < a.size(); ++i)
        REQUIRE(a[i] == Catch::Approx(b[i]).margin(1e-12));
    }
  }
}

TEST_CASE("derivatives sum to zero inside the domain") {
  SplineGrid g(3, 10, 0.0, 1.0);
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    auto d = bspline_basis_derivative(u(rng), g);
    double sum = 0.0;
    for (double v : d) sum += v;
    REQUIRE(std::abs(sum) < 1e-10);
  }
}

TEST_CASE("derivatives match central finite differences") {
  SplineGrid g(3, 10, 0.0, 1.0);
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-0.25, 1.25);
  const double h = 1e-6;
  for (int t = 0; t < 300; ++t) {
    double x = u(rng);
    auto d = bspline_basis_derivative(x, g);
    auto lo = bspline_basis(x - h, g);
    auto hi = bspline_basis(x + h, g);
    for (std::size_t i = 0; i < d.size(); ++i) {
      double fd = (hi[i] - lo[i]) / (2 * h);
      double tol = 1e-5 * std::max(1.0, std::abs(fd));
      REQUIRE(std::abs(d[i] - fd) < tol);
    }
  }
}

TEST_CASE("non-finite input is rejected") {
  SplineGrid g(3, 10, 0.0, 1.0);
  CHECK_THROWS_AS(bspline_basis(std::nan(""), g), std::domain_error);
  CHECK_THROWS_AS(bspline_basis_derivative(std::numeric_limits<double>::infinity(), g),
                  std::domain_error);
}
