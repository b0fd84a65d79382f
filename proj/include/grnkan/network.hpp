#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "grnkan/bspline.hpp"
#include "grnkan/common.hpp"
#include "json.hpp"

namespace grnkan {

inline constexpr int kEmptyWindow = std::numeric_limits<int>::min();

inline double silu(double x) { return x / (1.0 + std::exp(-x)); }

inline double silu_derivative(double x) {
  double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

// Single learnable activation phi(x) = w_b * SiLU(x) + sum_i w_i * B_i(x).
struct SplineActivation {
  double base_weight = 0.0;
  std::vector<double> spline_weights;
};

inline double activation_forward(double x, const SplineActivation& act, const SplineGrid& grid) {
  detail::check_finite_scalar(x);
  if (static_cast<int>(act.spline_weights.size()) != grid.basis_count())
    throw shape_error("spline weight count does not match grid basis count");
  double out = act.base_weight * silu(x);
  BasisWindow w;
  w.evaluate(x, grid, false);
  if (!w.empty) {
    for (int r = 0; r <= grid.order(); ++r) {
      int i = w.first + r;
      if (i >= 0 && i < grid.basis_count()) out += act.spline_weights[i] * w.values[r];
    }
  }
  return out;
}

inline double activation_derivative(double x, const SplineActivation& act, const SplineGrid& grid) {
  detail::check_finite_scalar(x);
  if (static_cast<int>(act.spline_weights.size()) != grid.basis_count())
    throw shape_error("spline weight count does not match grid basis count");
  double out = act.base_weight * silu_derivative(x);
  BasisWindow w;
  w.evaluate(x, grid, true);
  if (!w.empty) {
    for (int r = 0; r <= grid.order(); ++r) {
      int i = w.first + r;
      if (i >= 0 && i < grid.basis_count()) out += act.spline_weights[i] * w.derivs[r];
    }
  }
  return out;
}

// One KAN layer: an out_dim x in_dim matrix of spline activations sharing a
// knot grid. Output q is the sum over inputs p of phi_{q,p}(x_p). Weights are
// stored flat: base_w[q*in+p], spline_w[(q*in+p)*m + i] with m = G + k.
struct KanLayer {
  int in_dim = 0;
  int out_dim = 0;
  SplineGrid grid;
  std::vector<double> base_w;
  std::vector<double> spline_w;

  std::size_t basis_per_activation() const { return static_cast<std::size_t>(grid.basis_count()); }
  std::size_t parameter_count() const { return base_w.size() + spline_w.size(); }

  // Read-only view of activation (q, p) as a value type, mostly for tests
  // and serialization.
  SplineActivation activation(int q, int p) const {
    SplineActivation a;
    std::size_t m = basis_per_activation();
    std::size_t base = (static_cast<std::size_t>(q) * in_dim + p);
    a.base_weight = base_w[base];
    a.spline_weights.assign(spline_w.begin() + base * m, spline_w.begin() + (base + 1) * m);
    return a;
  }
};

// Gradients of a scalar loss w.r.t. every layer parameter; mirrors the
// network's storage layout.
struct ParamGrads {
  struct LayerGrads {
    std::vector<double> base_w;
    std::vector<double> spline_w;
  };
  std::vector<LayerGrads> layers;

  void zero() {
    for (auto& l : layers) {
      std::fill(l.base_w.begin(), l.base_w.end(), 0.0);
      std::fill(l.spline_w.begin(), l.spline_w.end(), 0.0);
    }
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.base_w.size() + l.spline_w.size();
    return n;
  }
};

class KanNetwork;

// Scratch buffers for forward/backward evaluation. A Workspace may be reused
// across calls but must not be shared between threads.
struct Workspace {
  struct LayerScratch {
    std::vector<double> silu_v;
    std::vector<double> dsilu_v;
    std::vector<int> win_first;      // -1 marks an empty window
    std::vector<double> win_values;  // in_dim x (order+1)
    std::vector<double> win_derivs;  // in_dim x (order+1)
  };
  std::vector<LayerScratch> layers;
  std::vector<double> buf_a;
  std::vector<double> buf_b;

  Workspace() = default;
  explicit Workspace(const KanNetwork& net);
};

struct KanConfig {
  int spline_order = 3;
  int grid_size = 10;
  double input_grid_lo = -0.2;
  double input_grid_hi = 1.2;
  double hidden_grid_lo = -3.0;
  double hidden_grid_hi = 3.0;
  // Base weights start at base_init_scale / n_in; spline weights are drawn
  // uniformly from [-s, s] with s = spline_init_scale / sqrt(G + k).
  double base_init_scale = 1.0;
  double spline_init_scale = 0.1;
  std::vector<int> hidden_widths;  // empty: use [2d+1, 2(2d+1)+1, 2d+1]
};

// A KAN predictor: per-input affine normalization, a chain of KAN layers
// ending in a single output, and an affine de-normalization of the output.
// Mutable while training; treat as immutable (and freely shareable across
// threads) afterwards.
class KanNetwork {
 public:
  std::vector<KanLayer> layers;
  std::vector<double> norm_shift;  // x_norm = (x_raw - shift) * scale
  std::vector<double> norm_scale;
  double out_shift = 0.0;  // f_raw = out_scale * y + out_shift
  double out_scale = 1.0;

  int input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
  int output_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.parameter_count();
    return n;
  }

  std::vector<int> widths() const {
    std::vector<int> w;
    if (layers.empty()) return w;
    w.push_back(layers.front().in_dim);
    for (const auto& l : layers) w.push_back(l.out_dim);
    return w;
  }

  void validate() const {
    if (layers.empty()) throw shape_error("network has no layers");
    for (std::size_t i = 1; i < layers.size(); ++i)
      if (layers[i].in_dim != layers[i - 1].out_dim)
        throw shape_error("layer dimensions do not chain");
    if (layers.back().out_dim != 1) throw shape_error("final layer must have one output");
    if (norm_shift.size() != static_cast<std::size_t>(input_dim()) ||
        norm_scale.size() != norm_shift.size())
      throw shape_error("normalization size does not match input dimension");
  }

  ParamGrads make_grads() const {
    ParamGrads g;
    g.layers.resize(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
      g.layers[i].base_w.assign(layers[i].base_w.size(), 0.0);
      g.layers[i].spline_w.assign(layers[i].spline_w.size(), 0.0);
    }
    return g;
  }

  double forward(const double* x_raw, Workspace& ws) const {
    run_forward(x_raw, ws, false);
    return out_scale * ws.buf_a[0] + out_shift;
  }

  double forward(const std::vector<double>& x_raw, Workspace& ws) const {
    check_input(x_raw);
    return forward(x_raw.data(), ws);
  }

  double forward(const std::vector<double>& x_raw) const {
    Workspace ws(*this);
    return forward(x_raw, ws);
  }

  // Gradient of the (raw-unit) prediction w.r.t. the raw input.
  void input_gradient(const double* x_raw, Workspace& ws, double* grad_out) const {
    run_forward(x_raw, ws, true);
    backward(ws, out_scale, nullptr, grad_out);
  }

  std::vector<double> input_gradient(const std::vector<double>& x_raw, Workspace& ws) const {
    check_input(x_raw);
    std::vector<double> g(input_dim());
    input_gradient(x_raw.data(), ws, g.data());
    return g;
  }

  std::vector<double> input_gradient(const std::vector<double>& x_raw) const {
    Workspace ws(*this);
    return input_gradient(x_raw, ws);
  }

  // Accumulates gradients of grad_scale * (f(x) - target)^2 into `grads` and
  // returns the unscaled squared error. Also writes the input gradient of the
  // same loss when `input_grad_out` is non-null.
  double accumulate_squared_error_gradients(const double* x_raw, double target, Workspace& ws,
                                            ParamGrads& grads, double grad_scale = 1.0,
                                            double* input_grad_out = nullptr) const {
    run_forward(x_raw, ws, true);
    double pred = out_scale * ws.buf_a[0] + out_shift;
    double residual = pred - target;
    backward(ws, 2.0 * residual * grad_scale * out_scale, &grads, input_grad_out);
    return residual * residual;
  }

  ParamGrads parameter_gradients(const std::vector<double>& x_raw, double target) const {
    check_input(x_raw);
    Workspace ws(*this);
    ParamGrads g = make_grads();
    accumulate_squared_error_gradients(x_raw.data(), target, ws, g);
    return g;
  }

  nlohmann::json to_json() const;
  static KanNetwork from_json(const nlohmann::json& j);

 private:
  friend struct Workspace;

  void check_input(const std::vector<double>& x) const {
    if (x.size() != static_cast<std::size_t>(input_dim()))
      throw shape_error("input length " + std::to_string(x.size()) +
                        " does not match network input dimension " + std::to_string(input_dim()));
  }

  // Forward pass; leaves per-layer scratch populated. The final layer output
  // (pre output-affine) is ws.buf_a[0].
  void run_forward(const double* x_raw, Workspace& ws, bool need_derivs) const {
    const int d = input_dim();
    std::vector<double>& cur = ws.buf_a;
    std::vector<double>& nxt = ws.buf_b;
    for (int p = 0; p < d; ++p) {
      if (!std::isfinite(x_raw[p])) throw std::domain_error("non-finite network input");
      cur[p] = (x_raw[p] - norm_shift[p]) * norm_scale[p];
    }
    for (std::size_t li = 0; li < layers.size(); ++li) {
      const KanLayer& layer = layers[li];
      Workspace::LayerScratch& sc = ws.layers[li];
      const int k = layer.grid.order();
      const int m = layer.grid.basis_count();
      const int win = k + 1;
      BasisWindow w;
      for (int p = 0; p < layer.in_dim; ++p) {
        double xp = cur[p];
        sc.silu_v[p] = silu(xp);
        sc.dsilu_v[p] = need_derivs ? silu_derivative(xp) : 0.0;
        w.evaluate(xp, layer.grid, need_derivs);
        sc.win_first[p] = w.empty ? kEmptyWindow : w.first;
        double* vals = sc.win_values.data() + static_cast<std::size_t>(p) * win;
        double* ders = sc.win_derivs.data() + static_cast<std::size_t>(p) * win;
        for (int r = 0; r < win; ++r) {
          vals[r] = w.values[r];
          ders[r] = w.derivs[r];
        }
      }
      for (int q = 0; q < layer.out_dim; ++q) {
        double acc = 0.0;
        const double* bw = layer.base_w.data() + static_cast<std::size_t>(q) * layer.in_dim;
        for (int p = 0; p < layer.in_dim; ++p) {
          acc += bw[p] * sc.silu_v[p];
          int first = sc.win_first[p];
          if (first == kEmptyWindow) continue;
          const double* sw = layer.spline_w.data() +
                             (static_cast<std::size_t>(q) * layer.in_dim + p) * m;
          const double* vals = sc.win_values.data() + static_cast<std::size_t>(p) * win;
          int r0 = std::max(0, -first);
          int r1 = std::min(k, m - 1 - first);
          for (int r = r0; r <= r1; ++r) acc += sw[first + r] * vals[r];
        }
        nxt[q] = acc;
      }
      std::swap(cur, nxt);
    }
  }

  // Reverse pass seeded with dL/dy_final = seed. Requires run_forward with
  // need_derivs = true. Writes dL/dx_raw into input_grad_out when non-null.
  void backward(Workspace& ws, double seed, ParamGrads* grads, double* input_grad_out) const {
    std::vector<double>& delta = ws.buf_a;
    std::vector<double>& delta_in = ws.buf_b;
    delta[0] = seed;
    for (std::size_t li = layers.size(); li-- > 0;) {
      const KanLayer& layer = layers[li];
      Workspace::LayerScratch& sc = ws.layers[li];
      const int k = layer.grid.order();
      const int m = layer.grid.basis_count();
      const int win = k + 1;
      const bool need_input = (li > 0) || (input_grad_out != nullptr);
      if (need_input)
        for (int p = 0; p < layer.in_dim; ++p) delta_in[p] = 0.0;
      for (int q = 0; q < layer.out_dim; ++q) {
        double dq = delta[q];
        if (dq == 0.0 && grads == nullptr) continue;
        const std::size_t row = static_cast<std::size_t>(q) * layer.in_dim;
        const double* bw = layer.base_w.data() + row;
        double* gb = grads ? grads->layers[li].base_w.data() + row : nullptr;
        for (int p = 0; p < layer.in_dim; ++p) {
          int first = sc.win_first[p];
          const double* vals = sc.win_values.data() + static_cast<std::size_t>(p) * win;
          const double* ders = sc.win_derivs.data() + static_cast<std::size_t>(p) * win;
          if (grads) {
            gb[p] += dq * sc.silu_v[p];
            if (first != kEmptyWindow) {
              double* gs = grads->layers[li].spline_w.data() + (row + p) * m;
              int r0 = std::max(0, -first);
              int r1 = std::min(k, m - 1 - first);
              for (int r = r0; r <= r1; ++r) gs[first + r] += dq * vals[r];
            }
          }
          if (need_input) {
            double slope = bw[p] * sc.dsilu_v[p];
            if (first != kEmptyWindow) {
              const double* sw = layer.spline_w.data() + (row + p) * m;
              int r0 = std::max(0, -first);
              int r1 = std::min(k, m - 1 - first);
              for (int r = r0; r <= r1; ++r) slope += sw[first + r] * ders[r];
            }
            delta_in[p] += dq * slope;
          }
        }
      }
      std::swap(delta, delta_in);
    }
    if (input_grad_out) {
      const int d = input_dim();
      for (int p = 0; p < d; ++p) input_grad_out[p] = delta[p] * norm_scale[p];
    }
  }
};

inline Workspace::Workspace(const KanNetwork& net) {
  layers.resize(net.layers.size());
  std::size_t max_width = static_cast<std::size_t>(std::max(net.input_dim(), 1));
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const KanLayer& l = net.layers[i];
    max_width = std::max(max_width, static_cast<std::size_t>(l.out_dim));
    int win = l.grid.order() + 1;
    layers[i].silu_v.resize(l.in_dim);
    layers[i].dsilu_v.resize(l.in_dim);
    layers[i].win_first.resize(l.in_dim);
    layers[i].win_values.resize(static_cast<std::size_t>(l.in_dim) * win);
    layers[i].win_derivs.resize(static_cast<std::size_t>(l.in_dim) * win);
  }
  buf_a.resize(max_width);
  buf_b.resize(max_width);
}

// Hidden widths per the default architecture rule: [2d+1, 2(2d+1)+1, 2d+1].
inline std::vector<int> default_hidden_widths(int d) {
  int w1 = 2 * d + 1;
  return {w1, 2 * w1 + 1, w1};
}

inline KanNetwork init_network(int d, const KanConfig& cfg, std::uint64_t seed) {
  if (d < 1) throw config_error("network input dimension must be at least 1");
  std::vector<int> widths;
  widths.push_back(d);
  const std::vector<int> hidden = cfg.hidden_widths.empty() ? default_hidden_widths(d)
                                                            : cfg.hidden_widths;
  for (int w : hidden) {
    if (w < 1) throw config_error("hidden width must be positive");
    widths.push_back(w);
  }
  widths.push_back(1);

  KanNetwork net;
  std::mt19937_64 rng(seed);
  for (std::size_t li = 0; li + 1 < widths.size(); ++li) {
    KanLayer layer;
    layer.in_dim = widths[li];
    layer.out_dim = widths[li + 1];
    if (li == 0)
      layer.grid = SplineGrid(cfg.spline_order, cfg.grid_size, cfg.input_grid_lo, cfg.input_grid_hi);
    else
      layer.grid = SplineGrid(cfg.spline_order, cfg.grid_size, cfg.hidden_grid_lo, cfg.hidden_grid_hi);
    std::size_t n_act = static_cast<std::size_t>(layer.in_dim) * layer.out_dim;
    std::size_t m = layer.basis_per_activation();
    layer.base_w.assign(n_act, cfg.base_init_scale / layer.in_dim);
    layer.spline_w.resize(n_act * m);
    double s = cfg.spline_init_scale / std::sqrt(static_cast<double>(m));
    std::uniform_real_distribution<double> u(-s, s);
    for (auto& w : layer.spline_w) w = u(rng);
    net.layers.push_back(std::move(layer));
  }
  net.norm_shift.assign(d, 0.0);
  net.norm_scale.assign(d, 1.0);
  net.validate();
  return net;
}

inline nlohmann::json KanNetwork::to_json() const {
  nlohmann::json j;
  j["input_dim"] = input_dim();
  j["norm_shift"] = norm_shift;
  j["norm_scale"] = norm_scale;
  j["out_shift"] = out_shift;
  j["out_scale"] = out_scale;
  nlohmann::json jl = nlohmann::json::array();
  for (const auto& l : layers) {
    nlohmann::json e;
    e["in_dim"] = l.in_dim;
    e["out_dim"] = l.out_dim;
    e["grid"] = {{"order", l.grid.order()},
                 {"grid_size", l.grid.grid_size()},
                 {"lo", l.grid.lo()},
                 {"hi", l.grid.hi()}};
    e["base_w"] = l.base_w;
    e["spline_w"] = l.spline_w;
    jl.push_back(std::move(e));
  }
  j["layers"] = std::move(jl);
  return j;
}

inline KanNetwork KanNetwork::from_json(const nlohmann::json& j) {
  KanNetwork net;
  net.norm_shift = j.at("norm_shift").get<std::vector<double>>();
  net.norm_scale = j.at("norm_scale").get<std::vector<double>>();
  net.out_shift = j.at("out_shift").get<double>();
  net.out_scale = j.at("out_scale").get<double>();
  for (const auto& e : j.at("layers")) {
    KanLayer l;
    l.in_dim = e.at("in_dim").get<int>();
    l.out_dim = e.at("out_dim").get<int>();
    const auto& g = e.at("grid");
    l.grid = SplineGrid(g.at("order").get<int>(), g.at("grid_size").get<int>(),
                        g.at("lo").get<double>(), g.at("hi").get<double>());
    l.base_w = e.at("base_w").get<std::vector<double>>();
    l.spline_w = e.at("spline_w").get<std::vector<double>>();
    if (l.base_w.size() != static_cast<std::size_t>(l.in_dim) * l.out_dim ||
        l.spline_w.size() != l.base_w.size() * l.basis_per_activation())
      throw data_error("network file has inconsistent weight array sizes");
    net.layers.push_back(std::move(l));
  }
  net.validate();
  return net;
}

}  // namespace grnkan
