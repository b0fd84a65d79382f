#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <utility>
#include <vector>

#include "grnkan/common.hpp"
#include "grnkan/network.hpp"
#include "json.hpp"

namespace grnkan {

// How the early-stopping gap is read. kAbsolute is the literal protocol:
// (test - train) > threshold. kExcess measures the gap in excess of the
// initial (epoch-1) gap when that gap is positive, so a finite-sample split
// asymmetry that exceeds the threshold from the start does not halt an
// untrained model; real overfitting still trips it.
enum class GapMode { kAbsolute, kExcess };

struct TrainConfig {
  int epochs = 3000;
  double learning_rate = 1e-4;
  double clip_norm = 100.0;
  double split_ratio = 0.8;
  double gap_threshold = 0.0005;
  int gap_patience = 10;
  GapMode gap_mode = GapMode::kExcess;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool restore_best = false;  // keep final weights by default
  KanConfig kan;

  void validate() const {
    if (epochs < 0) throw config_error("epochs must be nonnegative");
    if (!(learning_rate > 0)) throw config_error("learning rate must be positive");
    if (!(clip_norm > 0)) throw config_error("clip norm must be positive");
    if (!(split_ratio > 0.0 && split_ratio < 1.0))
      throw config_error("split ratio must lie strictly between 0 and 1");
    if (!(gap_threshold > 0)) throw config_error("gap threshold must be positive");
    if (gap_patience < 1) throw config_error("gap patience must be at least 1");
  }
};

struct TrainReport {
  int epochs_run = 0;
  double final_train_loss = 0.0;
  double final_test_loss = 0.0;
  bool stopped_early = false;
  // Per-epoch (train, test) losses in normalized target units.
  std::vector<std::pair<double, double>> loss_history;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["epochs_run"] = epochs_run;
    j["final_train_loss"] = final_train_loss;
    j["final_test_loss"] = final_test_loss;
    j["stopped_early"] = stopped_early;
    nlohmann::json h = nlohmann::json::array();
    for (const auto& [tr, te] : loss_history) h.push_back({tr, te});
    j["loss_history"] = std::move(h);
    return j;
  }
};

// Deterministic random split into train/test index sets. Both halves are
// returned in ascending order; |train| = round(ratio * n).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_train_test(
    std::size_t n_samples, double ratio, std::uint64_t seed) {
  if (n_samples < 2) throw config_error("need at least 2 samples to split");
  if (!(ratio > 0.0 && ratio < 1.0)) throw config_error("split ratio must be in (0, 1)");
  std::size_t n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n_samples)));
  if (n_train == 0 || n_train == n_samples)
    throw config_error("split leaves an empty train or test part");
  std::vector<std::size_t> idx(n_samples);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<std::size_t> train(idx.begin(), idx.begin() + n_train);
  std::vector<std::size_t> test(idx.begin() + n_train, idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {std::move(train), std::move(test)};
}

inline double mse_loss(const std::vector<double>& predictions, const std::vector<double>& targets) {
  if (predictions.size() != targets.size()) throw shape_error("prediction/target length mismatch");
  if (predictions.empty()) throw data_error("mse_loss on empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double r = predictions[i] - targets[i];
    acc += r * r;
  }
  return acc / static_cast<double>(predictions.size());
}

// Scales gradients in place so the global L2 norm is at most clip_norm.
// Returns the pre-clip norm.
inline double clip_gradients(ParamGrads& grads, double clip_norm) {
  double sq = 0.0;
  for (const auto& l : grads.layers) {
    for (double g : l.base_w) sq += g * g;
    for (double g : l.spline_w) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw numeric_error("non-finite gradient");
  if (norm > clip_norm) {
    double s = clip_norm / norm;
    for (auto& l : grads.layers) {
      for (double& g : l.base_w) g *= s;
      for (double& g : l.spline_w) g *= s;
    }
  }
  return norm;
}

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;

  explicit AdamState(std::size_t n_params = 0) : m(n_params, 0.0), v(n_params, 0.0) {}
};

// One Adam update with bias correction. Gradients are clipped to the global
// L2 norm budget before the moment updates.
inline void adam_step(KanNetwork& net, ParamGrads& grads, AdamState& state,
                      const TrainConfig& cfg) {
  clip_gradients(grads, cfg.clip_norm);
  state.step += 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  std::size_t off = 0;
  auto update = [&](std::vector<double>& params, const std::vector<double>& g) {
    for (std::size_t i = 0; i < params.size(); ++i, ++off) {
      double& m = state.m[off];
      double& v = state.v[off];
      m = b1 * m + (1.0 - b1) * g[i];
      v = b2 * v + (1.0 - b2) * g[i] * g[i];
      double mhat = m / bc1;
      double vhat = v / bc2;
      params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  };
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    update(net.layers[li].base_w, grads.layers[li].base_w);
    update(net.layers[li].spline_w, grads.layers[li].spline_w);
  }
}

// True iff (test - train) exceeded gap_threshold on each of the last
// `patience` consecutive epochs.
inline bool early_stop_check(const std::vector<std::pair<double, double>>& loss_history,
                             double gap_threshold, int patience) {
  if (loss_history.empty()) throw data_error("early_stop_check on empty history");
  if (static_cast<int>(loss_history.size()) < patience) return false;
  for (std::size_t i = loss_history.size() - patience; i < loss_history.size(); ++i)
    if (!(loss_history[i].second - loss_history[i].first > gap_threshold)) return false;
  return true;
}

// Trains one KAN predictor: full-batch MSE with Adam and norm clipping, a
// seeded random split, and gap-based early stopping. Inputs are cells x d;
// normalization statistics (inputs min-max to [0,1], target min-max) come
// from the train split only. The returned network predicts in raw target
// units; recorded losses are in normalized units.
inline std::pair<KanNetwork, TrainReport> train_predictor(const Matrix& inputs,
                                                          const std::vector<double>& targets,
                                                          const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t c = inputs.rows();
  const std::size_t d = inputs.cols();
  if (c < 2) throw config_error("need at least 2 samples to train");
  if (d < 1) throw config_error("need at least 1 input feature");
  if (targets.size() != c) throw shape_error("target length does not match sample count");

  auto [train_idx, test_idx] = split_train_test(c, cfg.split_ratio, derive_seed(cfg.seed, 2));

  KanNetwork net = init_network(static_cast<int>(d), cfg.kan, derive_seed(cfg.seed, 1));

  constexpr double kTinyRange = 1e-12;
  for (std::size_t p = 0; p < d; ++p) {
    double lo = inputs(train_idx[0], p), hi = lo;
    for (std::size_t s : train_idx) {
      lo = std::min(lo, inputs(s, p));
      hi = std::max(hi, inputs(s, p));
    }
    net.norm_shift[p] = lo;
    net.norm_scale[p] = (hi - lo > kTinyRange) ? 1.0 / (hi - lo) : 1.0;
  }
  double t_lo = targets[train_idx[0]], t_hi = t_lo;
  for (std::size_t s : train_idx) {
    t_lo = std::min(t_lo, targets[s]);
    t_hi = std::max(t_hi, targets[s]);
  }
  const double t_scale = (t_hi - t_lo > kTinyRange) ? (t_hi - t_lo) : 1.0;
  std::vector<double> scaled_targets(c);
  for (std::size_t s = 0; s < c; ++s) scaled_targets[s] = (targets[s] - t_lo) / t_scale;

  TrainReport report;
  Workspace ws(net);
  ParamGrads grads = net.make_grads();
  AdamState adam(net.parameter_count());
  const double inv_n_train = 1.0 / static_cast<double>(train_idx.size());

  std::vector<KanLayer> best_layers;
  double best_test = std::numeric_limits<double>::infinity();

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    grads.zero();
    double train_loss = 0.0;
    for (std::size_t s : train_idx)
      train_loss += net.accumulate_squared_error_gradients(inputs.row(s), scaled_targets[s], ws,
                                                           grads, inv_n_train);
    train_loss *= inv_n_train;
    if (!std::isfinite(train_loss))
      throw numeric_error("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
    try {
      adam_step(net, grads, adam, cfg);
    } catch (const numeric_error& e) {
      throw numeric_error(std::string(e.what()) + " at epoch " + std::to_string(epoch));
    }

    double test_loss = 0.0;
    for (std::size_t s : test_idx) {
      double r = net.forward(inputs.row(s), ws) - scaled_targets[s];
      test_loss += r * r;
    }
    test_loss /= static_cast<double>(test_idx.size());
    report.loss_history.emplace_back(train_loss, test_loss);
    report.epochs_run = epoch;

    if (cfg.restore_best && test_loss < best_test) {
      best_test = test_loss;
      best_layers = net.layers;
    }
    double threshold = cfg.gap_threshold;
    if (cfg.gap_mode == GapMode::kExcess) {
      double initial_gap =
          report.loss_history.front().second - report.loss_history.front().first;
      threshold += std::max(initial_gap, 0.0);
    }
    if (early_stop_check(report.loss_history, threshold, cfg.gap_patience)) {
      report.stopped_early = true;
      break;
    }
  }

  if (cfg.restore_best && !best_layers.empty()) net.layers = std::move(best_layers);

  net.out_scale = t_scale;
  net.out_shift = t_lo;
  if (!report.loss_history.empty()) {
    report.final_train_loss = report.loss_history.back().first;
    report.final_test_loss = report.loss_history.back().second;
  }
  return {std::move(net), std::move(report)};
}

}  // namespace grnkan
