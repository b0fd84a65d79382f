#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "grnkan/common.hpp"

namespace grnkan {

// Maximum supported spline order for the fixed-size evaluation window.
inline constexpr int kMaxSplineOrder = 7;

// Uniform B-spline knot grid of order `order` with `grid_size` intervals over
// the nominal domain [lo, hi]. The knot vector extends `order` uniform steps
// beyond each end of the nominal domain, giving grid_size + 2*order + 1 knots
// and grid_size + order basis functions. Internally the array is padded with
// `order` extra knots per side so the windowed de Boor recursion can run
// without boundary branches; padded knots never correspond to basis functions.
class SplineGrid {
 public:
  SplineGrid() = default;
  SplineGrid(int order, int grid_size, double lo, double hi)
      : order_(order), grid_size_(grid_size), lo_(lo), hi_(hi) {
    if (order < 1 || order > kMaxSplineOrder)
      throw config_error("spline order must be in [1, " + std::to_string(kMaxSplineOrder) + "]");
    if (grid_size < 1) throw config_error("grid size must be positive");
    if (!(lo < hi)) throw config_error("grid domain must satisfy lo < hi");
    step_ = (hi - lo) / grid_size;
    inv_step_ = 1.0 / step_;
    int padded = grid_size + 4 * order + 1;
    knots_.resize(padded);
    for (int j = 0; j < padded; ++j) knots_[j] = lo + (j - 2 * order) * step_;
  }

  int order() const { return order_; }
  int grid_size() const { return grid_size_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  double step() const { return step_; }

  // Number of basis functions: G + k.
  int basis_count() const { return grid_size_ + order_; }
  // Number of real knots: G + 2k + 1.
  int knot_count() const { return grid_size_ + 2 * order_ + 1; }
  // Real knot i, for i in [0, knot_count). T_0 = lo - k*step.
  double knot(int i) const { return knots_[order_ + i]; }

  // First and one-past-last real knot positions (support of the basis).
  double support_lo() const { return knot(0); }
  double support_hi() const { return knot(knot_count() - 1); }

 private:
  friend struct BasisWindow;
  int order_ = 0;
  int grid_size_ = 0;
  double lo_ = 0.0, hi_ = 1.0;
  double step_ = 0.0, inv_step_ = 0.0;
  std::vector<double> knots_;
};

// Nonzero basis values (and optionally derivatives) at a point. At most
// order+1 basis functions are nonzero; their indices are first..first+order
// clipped to [0, basis_count). Outside the knot support `empty` is set and
// all values are zero.
struct BasisWindow {
  int first = 0;
  bool empty = true;
  double values[kMaxSplineOrder + 1] = {};
  double derivs[kMaxSplineOrder + 1] = {};

  // Evaluates the window at x. When `with_derivative` is set, derivs[] holds
  // dB_i/dx computed through the order-reduction identity.
  void evaluate(double x, const SplineGrid& g, bool with_derivative) {
    const int k = g.order_;
    empty = true;
    for (int r = 0; r <= k; ++r) {
      values[r] = 0.0;
      derivs[r] = 0.0;
    }
    if (!(x >= g.support_lo() && x < g.support_hi())) {
      first = 0;
      return;
    }
    int j = static_cast<int>((x - g.support_lo()) * g.inv_step_);
    if (j < 0) j = 0;
    const int max_span = g.knot_count() - 2;
    if (j > max_span) j = max_span;
    first = j - k;
    empty = false;

    // Local de Boor triangle. T(i) indexes real knots; padding guarantees
    // i in [j+1-k, j+k] is addressable.
    const double* kn = g.knots_.data() + g.order_;
    double left[kMaxSplineOrder + 1];
    double right[kMaxSplineOrder + 1];
    double lower[kMaxSplineOrder + 1];  // degree k-1 values for derivatives
    values[0] = 1.0;
    for (int d = 1; d <= k; ++d) {
      if (with_derivative && d == k) {
        for (int r = 0; r < k; ++r) lower[r] = values[r];
      }
      left[d] = x - kn[j + 1 - d];
      right[d] = kn[j + d] - x;
      double saved = 0.0;
      for (int r = 0; r < d; ++r) {
        double denom = right[r + 1] + left[d - r];
        double temp = values[r] / denom;
        values[r] = saved + right[r + 1] * temp;
        saved = left[d - r] * temp;
      }
      values[d] = saved;
    }

    if (with_derivative && k >= 1) {
      // dB_{first+r} = k * (lower[r-1]/(T_{j+r}-T_{first+r})
      //                     - lower[r]/(T_{j+r+1}-T_{first+r+1}))
      for (int r = 0; r <= k; ++r) {
        double a = 0.0, b = 0.0;
        if (r >= 1) a = lower[r - 1] / (kn[j + r] - kn[first + r]);
        if (r <= k - 1) b = lower[r] / (kn[j + r + 1] - kn[first + r + 1]);
        derivs[r] = k * (a - b);
      }
    }
  }
};

namespace detail {
inline void check_finite_scalar(double x) {
  if (!std::isfinite(x)) throw std::domain_error("non-finite input to spline evaluation");
}
}  // namespace detail

// Cox-de Boor evaluation of all basis functions B_0..B_{G+k-1} at x.
inline std::vector<double> bspline_basis(double x, const SplineGrid& grid) {
  detail::check_finite_scalar(x);
  std::vector<double> out(grid.basis_count(), 0.0);
  BasisWindow w;
  w.evaluate(x, grid, false);
  if (!w.empty) {
    for (int r = 0; r <= grid.order(); ++r) {
      int i = w.first + r;
      if (i >= 0 && i < grid.basis_count()) out[i] = w.values[r];
    }
  }
  return out;
}

// Derivatives dB_i/dx at x, same indexing as bspline_basis.
inline std::vector<double> bspline_basis_derivative(double x, const SplineGrid& grid) {
  detail::check_finite_scalar(x);
  std::vector<double> out(grid.basis_count(), 0.0);
  BasisWindow w;
  w.evaluate(x, grid, true);
  if (!w.empty) {
    for (int r = 0; r <= grid.order(); ++r) {
      int i = w.first + r;
      if (i >= 0 && i < grid.basis_count()) out[i] = w.derivs[r];
    }
  }
  return out;
}

}  // namespace grnkan
