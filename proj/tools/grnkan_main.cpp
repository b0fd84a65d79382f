// grnkan: batch CLI for synthetic scRNA-seq simulation, KAN-based GRN
// inference, evaluation, gradient clustering, and benchmarking.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "grnkan/forest.hpp"
#include "grnkan/grn.hpp"
#include "grnkan/io.hpp"
#include "grnkan/metrics.hpp"
#include "grnkan/pipeline.hpp"
#include "grnkan/synth.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace grnkan;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("GRNKAN_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      std::cerr << "warning: ignoring non-numeric GRNKAN_SEED\n";
    }
  }
  return 0;
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

// Run manifest: config snapshot plus checksums of inputs and outputs,
// written atomically once the run is complete.
struct Manifest {
  std::string command;
  json config = json::object();
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  void write(const std::string& path, double duration_seconds) const {
    json j;
    j["command"] = command;
    j["config"] = config;
    j["seed"] = seed;
    json in = json::object(), out = json::object();
    for (const auto& p : inputs) in[p] = io::file_checksum(p);
    for (const auto& p : outputs) out[p] = io::file_checksum(p);
    j["inputs"] = in;
    j["outputs"] = out;
    j["duration_seconds"] = duration_seconds;
    write_json(path, j);
  }
};

struct TrainOptions {
  TrainConfig cfg;
  std::string gap_mode = "excess";
  unsigned workers = 1;
  double z_threshold = 1.0;

  TrainConfig resolve() const {
    TrainConfig out = cfg;
    if (gap_mode == "absolute")
      out.gap_mode = GapMode::kAbsolute;
    else if (gap_mode == "excess")
      out.gap_mode = GapMode::kExcess;
    else
      throw config_error("gap-mode must be 'absolute' or 'excess'");
    return out;
  }
};

void add_train_options(CLI::App* cmd, TrainOptions& t) {
  cmd->add_option("--epochs", t.cfg.epochs, "Training epoch cap")->capture_default_str();
  cmd->add_option("--learning-rate", t.cfg.learning_rate, "Adam learning rate")
      ->capture_default_str();
  cmd->add_option("--clip-norm", t.cfg.clip_norm, "Global L2 gradient clip")
      ->capture_default_str();
  cmd->add_option("--split-ratio", t.cfg.split_ratio, "Train fraction of the random split")
      ->capture_default_str();
  cmd->add_option("--gap-threshold", t.cfg.gap_threshold, "Early-stop train/test gap threshold")
      ->capture_default_str();
  cmd->add_option("--gap-patience", t.cfg.gap_patience,
                  "Consecutive epochs the gap must persist")
      ->capture_default_str();
  cmd->add_option("--gap-mode", t.gap_mode,
                  "Gap reading: 'absolute' or 'excess' (over the initial gap)")
      ->capture_default_str();
  cmd->add_option("--adam-beta1", t.cfg.adam_beta1, "Adam beta1")->capture_default_str();
  cmd->add_option("--adam-beta2", t.cfg.adam_beta2, "Adam beta2")->capture_default_str();
  cmd->add_option("--adam-eps", t.cfg.adam_eps, "Adam epsilon")->capture_default_str();
  cmd->add_option("--grid-size", t.cfg.kan.grid_size, "Spline grid size G")
      ->capture_default_str();
  cmd->add_option("--spline-order", t.cfg.kan.spline_order, "Spline order k")
      ->capture_default_str();
  cmd->add_option("--z-threshold", t.z_threshold, "Sparsification z-score threshold")
      ->capture_default_str();
  cmd->add_option("--workers,-w", t.workers, "Worker threads for per-gene parallelism")
      ->capture_default_str();
}

json train_options_snapshot(const TrainOptions& t) {
  return json{{"epochs", t.cfg.epochs},
              {"learning_rate", t.cfg.learning_rate},
              {"clip_norm", t.cfg.clip_norm},
              {"split_ratio", t.cfg.split_ratio},
              {"gap_threshold", t.cfg.gap_threshold},
              {"gap_patience", t.cfg.gap_patience},
              {"gap_mode", t.gap_mode},
              {"adam_beta1", t.cfg.adam_beta1},
              {"adam_beta2", t.cfg.adam_beta2},
              {"adam_eps", t.cfg.adam_eps},
              {"grid_size", t.cfg.kan.grid_size},
              {"spline_order", t.cfg.kan.spline_order},
              {"z_threshold", t.z_threshold},
              {"workers", t.workers}};
}

NetworkSpec spec_from_json_file(const std::string& path) {
  json j = json::parse(io::read_file(path));
  NetworkSpec spec;
  spec.genes = j.at("genes").get<std::vector<std::string>>();
  for (const auto& e : j.at("edges")) {
    RegEdge edge;
    edge.source = e.at(0).get<std::string>();
    edge.target = e.at(1).get<std::string>();
    std::string sign = e.at(2).get<std::string>();
    if (sign == "+")
      edge.sign = 1;
    else if (sign == "-")
      edge.sign = -1;
    else
      throw data_error(path + ": edge sign must be '+' or '-'");
    spec.edges.push_back(std::move(edge));
  }
  if (j.contains("rules"))
    for (const auto& [gene, rule] : j.at("rules").items()) {
      std::string r = rule.get<std::string>();
      if (r == "AND")
        spec.rules[gene] = ActivatorRule::kAnd;
      else if (r == "OR")
        spec.rules[gene] = ActivatorRule::kOr;
      else
        throw data_error(path + ": rule must be 'AND' or 'OR'");
    }
  spec.validate();
  return spec;
}

std::vector<NamedEdge> named_edges(const NetworkSpec& spec) {
  std::vector<NamedEdge> edges;
  for (const auto& e : spec.edges) edges.push_back({e.source, e.target, e.sign});
  return edges;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string network = "LI";
  std::size_t cells = 1000;
  std::uint64_t seed = default_seed();
  std::string out_dir;
  SimulationConfig sim;
  unsigned workers = 1;
};

int run_simulate(const SimulateArgs& a) {
  Stopwatch watch;
  Manifest manifest;
  manifest.command = "simulate";
  manifest.seed = a.seed;
  manifest.config = {{"network", a.network},
                     {"cells", a.cells},
                     {"t_max", a.sim.t_max},
                     {"dt", a.sim.dt},
                     {"noise", a.sim.noise},
                     {"hill_n", a.sim.hill_coefficient},
                     {"hill_k", a.sim.hill_threshold},
                     {"production", a.sim.production},
                     {"degradation", a.sim.degradation},
                     {"synchronous", a.sim.synchronous}};

  fs::create_directories(a.out_dir);
  std::string expr_path = (fs::path(a.out_dir) / "expression.csv").string();
  std::string truth_path = (fs::path(a.out_dir) / "truth.csv").string();

  if (a.network.rfind("toy-", 0) == 0) {
    BranchToyConfig cfg;
    cfg.seed = a.seed;
    if (a.network == "toy-red")
      cfg.branch = ToyBranch::kRed;
    else if (a.network == "toy-blue")
      cfg.branch = ToyBranch::kBlue;
    else if (a.network == "toy-both")
      cfg.branch = ToyBranch::kBoth;
    else
      throw config_error("unknown toy dataset: " + a.network);
    cfg.n_cells_per_branch = cfg.branch == ToyBranch::kBoth ? a.cells / 2 : a.cells;
    if (cfg.n_cells_per_branch == 0) throw config_error("too few cells for the toy dataset");
    ToyDataset toy = toy_branches(cfg);
    write_expression_csv(expr_path, toy.expression);
    int sign = cfg.branch == ToyBranch::kBlue ? -1 : 1;
    write_truth_csv(truth_path, {{"x", "y", sign}, {"y", "x", sign}});
    std::string labels_path = (fs::path(a.out_dir) / "labels.csv").string();
    write_labels_csv(labels_path, toy.expression.cell_ids, toy.branch_labels);
    manifest.outputs = {expr_path, truth_path, labels_path};
  } else {
    NetworkSpec spec;
    if (fs::exists(a.network) && fs::path(a.network).extension() == ".json")
      spec = spec_from_json_file(a.network);
    else
      spec = builtin_network(a.network);
    SimulationConfig cfg = a.sim;
    cfg.n_cells = a.cells;
    cfg.seed = a.seed;
    ExpressionMatrix x = simulate_cells(spec, cfg, a.workers);
    write_expression_csv(expr_path, x);
    write_truth_csv(truth_path, named_edges(spec));
    manifest.outputs = {expr_path, truth_path};
  }
  manifest.write((fs::path(a.out_dir) / "manifest.json").string(), watch.seconds());
  std::cout << "wrote " << expr_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

struct InferArgs {
  std::string expr_path;
  std::uint64_t seed = default_seed();
  std::string out_dir;
  TrainOptions train;
};

int run_infer(const InferArgs& a) {
  Stopwatch watch;
  ExpressionMatrix x = read_expression_csv(a.expr_path);
  TrainConfig cfg = a.train.resolve();
  cfg.seed = a.seed;

  auto results = train_all(x, cfg, a.train.workers);
  for (const auto& r : results)
    if (!r.ok())
      std::cerr << "warning: gene " << x.gene_names[r.gene_index]
                << " failed to train: " << r.error << "\n";
  auto fields = evaluate_gradients(results, x, a.train.workers);
  AdjacencyMatrix adj = infer_grn(fields, x.gene_names, a.train.z_threshold);

  fs::create_directories(a.out_dir);
  std::string adj_path = (fs::path(a.out_dir) / "adjacency.csv").string();
  std::string edges_path = (fs::path(a.out_dir) / "edges.csv").string();
  std::string grads_path = (fs::path(a.out_dir) / "gradients.csv").string();
  write_adjacency_csv(adj_path, adj);
  write_edge_list_csv(edges_path, adj);
  write_gradients_csv(grads_path, fields, x.gene_names, x.cell_ids);

  Manifest manifest;
  manifest.command = "infer";
  manifest.seed = a.seed;
  manifest.config = train_options_snapshot(a.train);
  manifest.inputs = {a.expr_path};
  manifest.outputs = {adj_path, edges_path, grads_path};
  for (std::size_t i = 0; i < results.size(); ++i) {
    json log;
    log["gene"] = x.gene_names[i];
    log["trained"] = results[i].ok();
    if (!results[i].ok()) log["error"] = results[i].error;
    log["report"] = results[i].report.to_json();
    std::string log_path =
        (fs::path(a.out_dir) / "train_logs" / (x.gene_names[i] + ".json")).string();
    write_json(log_path, log);
    manifest.outputs.push_back(log_path);
  }
  manifest.write((fs::path(a.out_dir) / "manifest.json").string(), watch.seconds());
  std::cout << "wrote " << adj_path << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string pred_path;
  std::string truth_path;
  bool signed_requested = false;
  std::size_t k = 0;
  std::uint64_t seed = default_seed();
  std::string out_path;
};

int run_eval(const EvalArgs& a) {
  AdjacencyMatrix pred = read_adjacency_csv(a.pred_path);
  auto edges = read_truth_csv(a.truth_path);
  std::size_t dropped = 0;
  GroundTruthNetwork truth = align_truth(edges, pred.gene_names, &dropped);
  if (dropped > 0)
    std::cerr << "warning: dropped " << dropped << " ground-truth self-loop(s)\n";
  std::size_t k = a.k == 0 ? truth.n_edges() : a.k;
  EvaluationResult result = evaluate(pred.weights, truth, k);

  json j = result.to_json();
  j["metadata"] = {{"prediction", a.pred_path}, {"truth", a.truth_path},
                   {"k", k},                    {"seed", a.seed},
                   {"signed_requested", a.signed_requested},
                   {"dropped_self_loops", dropped}};
  write_json(a.out_path, j);
  std::cout << "auroc=" << result.auroc << " auprc=" << result.auprc
            << " signed_auroc=" << result.signed_auroc
            << " signed_auprc=" << result.signed_auprc << " shd=" << result.shd
            << " fdr=" << result.fdr << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// cluster-grn
// ---------------------------------------------------------------------------

struct ClusterArgs {
  std::string expr_path;
  std::string grads_path;
  double eps = 0.0;
  int min_points = 5;
  double z_threshold = 1.0;
  std::string out_dir;
};

int run_cluster_grn(const ClusterArgs& a) {
  Stopwatch watch;
  ExpressionMatrix x = read_expression_csv(a.expr_path);
  auto fields = read_gradients_csv(a.grads_path, x.gene_names, x.cell_ids);

  ClusterConfig cfg;
  cfg.eps = a.eps;
  cfg.min_points = a.min_points;
  auto labels = cluster_gradients(fields, cfg);
  auto grns = infer_cluster_grns(fields, x.gene_names, labels, a.z_threshold);

  fs::create_directories(a.out_dir);
  std::string labels_path = (fs::path(a.out_dir) / "clusters.csv").string();
  write_labels_csv(labels_path, x.cell_ids, labels);

  Manifest manifest;
  manifest.command = "cluster-grn";
  manifest.config = {{"eps", a.eps}, {"min_points", a.min_points}, {"z_threshold", a.z_threshold}};
  manifest.inputs = {a.expr_path, a.grads_path};
  manifest.outputs = {labels_path};
  for (const auto& [label, adj] : grns) {
    std::string path =
        (fs::path(a.out_dir) / ("adjacency_cluster_" + std::to_string(label) + ".csv")).string();
    write_adjacency_csv(path, adj);
    manifest.outputs.push_back(path);
  }
  if (grns.empty())
    std::cerr << "warning: every cell is an outlier; no per-cluster adjacency written\n";
  manifest.write((fs::path(a.out_dir) / "manifest.json").string(), watch.seconds());
  std::cout << "found " << grns.size() << " cluster(s)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// toy-demo
// ---------------------------------------------------------------------------

struct ToyDemoArgs {
  std::string branch = "both";
  std::size_t cells = 400;
  std::uint64_t seed = default_seed();
  std::string out_dir;
  TrainOptions train;
  ForestConfig forest;
};

int run_toy_demo(const ToyDemoArgs& a) {
  Stopwatch watch;
  BranchToyConfig toy_cfg;
  toy_cfg.seed = a.seed;
  if (a.branch == "red")
    toy_cfg.branch = ToyBranch::kRed;
  else if (a.branch == "blue")
    toy_cfg.branch = ToyBranch::kBlue;
  else if (a.branch == "both")
    toy_cfg.branch = ToyBranch::kBoth;
  else
    throw config_error("branch must be red, blue, or both");
  toy_cfg.n_cells_per_branch = toy_cfg.branch == ToyBranch::kBoth ? a.cells / 2 : a.cells;
  if (toy_cfg.n_cells_per_branch == 0) throw config_error("too few cells");
  ToyDataset toy = toy_branches(toy_cfg);
  const ExpressionMatrix& x = toy.expression;
  auto idx = [&](const std::string& name) {
    return static_cast<std::size_t>(
        std::find(x.gene_names.begin(), x.gene_names.end(), name) - x.gene_names.begin());
  };

  ForestConfig fcfg = a.forest;
  fcfg.seed = a.seed;
  ImportanceMatrix tree = genie3_infer(x, fcfg, a.train.workers);

  TrainConfig tcfg = a.train.resolve();
  tcfg.seed = a.seed;
  auto results = train_all(x, tcfg, a.train.workers);
  auto fields = evaluate_gradients(results, x, a.train.workers);
  AdjacencyMatrix adj = infer_grn(fields, x.gene_names, a.train.z_threshold);

  // Sign consistency of the y-predictor's gradient along x.
  const GradientField& fy = fields[idx("y")];
  std::size_t x_row = 0;
  for (std::size_t r = 0; r < fy.regulator_index.size(); ++r)
    if (fy.regulator_index[r] == idx("x")) x_row = r;
  std::size_t positive = 0;
  double mean_grad = 0.0;
  for (std::size_t p = 0; p < x.n_cells(); ++p) {
    if (fy.gradients(x_row, p) > 0.0) ++positive;
    mean_grad += fy.gradients(x_row, p);
  }
  double positive_fraction = static_cast<double>(positive) / static_cast<double>(x.n_cells());
  mean_grad /= static_cast<double>(x.n_cells());

  fs::create_directories(a.out_dir);
  std::string expr_path = (fs::path(a.out_dir) / "expression.csv").string();
  std::string tree_path = (fs::path(a.out_dir) / "tree_importances.csv").string();
  std::string kan_path = (fs::path(a.out_dir) / "kan_adjacency.csv").string();
  std::string cmp_path = (fs::path(a.out_dir) / "comparison.json").string();
  write_expression_csv(expr_path, x);
  AdjacencyMatrix tree_adj{tree.weights, tree.gene_names};
  write_adjacency_csv(tree_path, tree_adj);
  write_adjacency_csv(kan_path, adj);

  double i_xy = tree.weights(idx("x"), idx("y"));
  double i_yx = tree.weights(idx("y"), idx("x"));
  json cmp;
  cmp["branch"] = a.branch;
  cmp["cells"] = x.n_cells();
  cmp["seed"] = a.seed;
  cmp["tree"] = {{"importance_x_to_y", i_xy},
                 {"importance_y_to_x", i_yx},
                 {"x_to_y_detected", i_xy > 0.8},
                 {"y_to_x_detected", i_yx > 0.8}};
  // The 3-gene toy has two regressors per target, so the sparsified
  // adjacency is structurally zero (a 2-vector's z-scores cannot exceed 1);
  // detection is judged on the gradient sign consensus instead.
  cmp["kan"] = {{"gradient_sign_positive_fraction_x_to_y", positive_fraction},
                {"mean_gradient_x_to_y", mean_grad},
                {"x_to_y_detected", positive_fraction > 0.9 || positive_fraction < 0.1}};
  write_json(cmp_path, cmp);

  Manifest manifest;
  manifest.command = "toy-demo";
  manifest.seed = a.seed;
  manifest.config = train_options_snapshot(a.train);
  manifest.config["branch"] = a.branch;
  manifest.config["cells"] = a.cells;
  manifest.config["trees"] = a.forest.n_trees;
  manifest.outputs = {expr_path, tree_path, kan_path, cmp_path};
  manifest.write((fs::path(a.out_dir) / "manifest.json").string(), watch.seconds());
  std::cout << "tree x->y " << i_xy << (i_xy > 0.8 ? " (detected)" : " (missed)")
            << ", kan sign fraction " << positive_fraction << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

struct BenchArgs {
  std::string suite_path;
  int runs = 3;
  std::string out_dir;
  TrainOptions train;
  SimulationConfig sim;
};

struct SuiteRow {
  std::string network;
  std::size_t cells = 0;
  std::vector<std::uint64_t> seeds;
};

std::vector<SuiteRow> read_suite(const std::string& path, int default_runs) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw data_error(path + ": empty suite");
  ++line_no;
  std::vector<SuiteRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = io::split_csv_line(line);
    if (fields.size() < 2)
      throw data_error(path + ": line " + std::to_string(line_no) +
                       ": expected network,cells[,seeds]");
    SuiteRow row;
    row.network = fields[0];
    row.cells = static_cast<std::size_t>(io::parse_double(fields[1], path, line_no));
    if (fields.size() > 2 && !fields[2].empty()) {
      const std::string& s = fields[2];
      std::size_t start = 0;
      for (;;) {
        std::size_t pos = s.find(';', start);
        std::string tok = s.substr(start, pos == std::string::npos ? pos : pos - start);
        if (!tok.empty()) row.seeds.push_back(std::stoull(tok));
        if (pos == std::string::npos) break;
        start = pos + 1;
      }
    }
    if (row.seeds.empty())
      for (int r = 1; r <= default_runs; ++r) row.seeds.push_back(static_cast<std::uint64_t>(r));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw data_error(path + ": suite lists no runs");
  return rows;
}

int run_bench(const BenchArgs& a) {
  Stopwatch watch;
  auto suite = read_suite(a.suite_path, a.runs);
  fs::create_directories(a.out_dir);

  Manifest manifest;
  manifest.command = "bench";
  manifest.config = train_options_snapshot(a.train);
  manifest.config["runs"] = a.runs;
  manifest.inputs = {a.suite_path};

  struct Agg {
    std::vector<EvaluationResult> results;
    std::vector<double> infer_seconds;
    std::size_t n_genes = 0;
    std::size_t cells = 0;
  };
  std::map<std::string, Agg> aggregates;

  for (const auto& row : suite) {
    for (std::uint64_t seed : row.seeds) {
      std::string run_id =
          row.network + "_c" + std::to_string(row.cells) + "_s" + std::to_string(seed);
      json run_json;
      run_json["network"] = row.network;
      run_json["cells"] = row.cells;
      run_json["seed"] = seed;
      try {
        NetworkSpec spec = builtin_network(row.network);
        SimulationConfig sim = a.sim;
        sim.n_cells = row.cells;
        sim.seed = seed;
        Stopwatch sim_watch;
        ExpressionMatrix x = simulate_cells(spec, sim, a.train.workers);
        run_json["simulate_seconds"] = sim_watch.seconds();

        TrainConfig cfg = a.train.resolve();
        cfg.seed = seed;
        Stopwatch infer_watch;
        auto results = train_all(x, cfg, a.train.workers);
        auto fields = evaluate_gradients(results, x, a.train.workers);
        AdjacencyMatrix adj = infer_grn(fields, x.gene_names, a.train.z_threshold);
        double infer_seconds = infer_watch.seconds();
        run_json["infer_seconds"] = infer_seconds;
        run_json["n_genes"] = x.n_genes();

        GroundTruthNetwork truth = truth_from_spec(spec);
        EvaluationResult ev = evaluate(adj.weights, truth);
        run_json["metrics"] = ev.to_json();

        Agg& agg = aggregates[row.network];
        agg.results.push_back(ev);
        agg.infer_seconds.push_back(infer_seconds);
        agg.n_genes = x.n_genes();
        agg.cells = row.cells;
      } catch (const std::exception& e) {
        run_json["error"] = e.what();
        std::cerr << "warning: run " << run_id << " failed: " << e.what() << "\n";
      }
      std::string run_path = (fs::path(a.out_dir) / ("run_" + run_id + ".json")).string();
      write_json(run_path, run_json);
      manifest.outputs.push_back(run_path);
    }
  }

  auto mean_std = [](const std::vector<double>& v) {
    if (v.empty()) return std::make_pair(0.0, 0.0);
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - m) * (x - m);
    var /= static_cast<double>(v.size());
    return std::make_pair(m, std::sqrt(var));
  };
  std::string csv =
      "network,cells,n_genes,runs,auroc_mean,auroc_std,auprc_mean,auprc_std,"
      "signed_auroc_mean,signed_auroc_std,signed_auprc_mean,signed_auprc_std,"
      "shd_mean,shd_std,fdr_mean,fdr_std,infer_seconds_mean,infer_seconds_std\n";
  for (const auto& [network, agg] : aggregates) {
    auto metric = [&](auto getter) {
      std::vector<double> v;
      for (const auto& r : agg.results) v.push_back(getter(r));
      return mean_std(v);
    };
    auto [auroc_m, auroc_s] = metric([](const EvaluationResult& r) { return r.auroc; });
    auto [auprc_m, auprc_s] = metric([](const EvaluationResult& r) { return r.auprc; });
    auto [sroc_m, sroc_s] = metric([](const EvaluationResult& r) { return r.signed_auroc; });
    auto [sprc_m, sprc_s] = metric([](const EvaluationResult& r) { return r.signed_auprc; });
    auto [shd_m, shd_s] = metric([](const EvaluationResult& r) { return r.shd; });
    auto [fdr_m, fdr_s] = metric([](const EvaluationResult& r) { return r.fdr; });
    auto [sec_m, sec_s] = mean_std(agg.infer_seconds);
    csv += network + ',' + std::to_string(agg.cells) + ',' + std::to_string(agg.n_genes) + ',' +
           std::to_string(agg.results.size()) + ',' + format_double(auroc_m) + ',' +
           format_double(auroc_s) + ',' + format_double(auprc_m) + ',' + format_double(auprc_s) +
           ',' + format_double(sroc_m) + ',' + format_double(sroc_s) + ',' +
           format_double(sprc_m) + ',' + format_double(sprc_s) + ',' + format_double(shd_m) +
           ',' + format_double(shd_s) + ',' + format_double(fdr_m) + ',' + format_double(fdr_s) +
           ',' + format_double(sec_m) + ',' + format_double(sec_s) + '\n';
  }
  std::string agg_path = (fs::path(a.out_dir) / "aggregate.csv").string();
  io::atomic_write(agg_path, csv);
  manifest.outputs.push_back(agg_path);
  manifest.write((fs::path(a.out_dir) / "manifest.json").string(), watch.seconds());
  std::cout << "wrote " << agg_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"KAN-based gene regulatory network inference toolkit"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Flat key=value config file (flags take precedence)");

  SimulateArgs sim_args;
  CLI::App* sim = app.add_subcommand("simulate", "Generate a synthetic scRNA-seq dataset");
  sim->add_option("--network", sim_args.network,
                  "Builtin name (LI, LL, CY, BF, BFC, TF, mCAD, VSC, HSC, GSD), "
                  "toy-{red,blue,both}, or a JSON spec file")
      ->capture_default_str();
  sim->add_option("--cells", sim_args.cells, "Number of cells")->capture_default_str();
  sim->add_option("--seed", sim_args.seed, "RNG seed")->capture_default_str();
  sim->add_option("--out", sim_args.out_dir, "Output directory")->required();
  sim->add_option("--t-max", sim_args.sim.t_max, "Simulation horizon")->capture_default_str();
  sim->add_option("--dt", sim_args.sim.dt, "Integration step")->capture_default_str();
  sim->add_option("--noise", sim_args.sim.noise, "Langevin noise scale")->capture_default_str();
  sim->add_option("--hill-n", sim_args.sim.hill_coefficient, "Hill coefficient")
      ->capture_default_str();
  sim->add_option("--hill-k", sim_args.sim.hill_threshold, "Hill threshold")
      ->capture_default_str();
  sim->add_option("--production", sim_args.sim.production, "Production rate m")
      ->capture_default_str();
  sim->add_option("--degradation", sim_args.sim.degradation, "Degradation rate lambda")
      ->capture_default_str();
  sim->add_flag("--synchronous", sim_args.sim.synchronous,
                "Sample every cell at t_max instead of uniformly in [0, t_max]");
  sim->add_option("--workers,-w", sim_args.workers, "Worker threads")->capture_default_str();

  InferArgs infer_args;
  CLI::App* infer = app.add_subcommand("infer", "Train per-gene KAN predictors and emit the GRN");
  infer->add_option("--expr", infer_args.expr_path, "Expression CSV (genes as rows)")->required();
  infer->add_option("--seed", infer_args.seed, "RNG seed")->capture_default_str();
  infer->add_option("--out", infer_args.out_dir, "Output directory")->required();
  add_train_options(infer, infer_args.train);

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Score a predicted GRN against ground truth");
  eval_cmd->add_option("--pred", eval_args.pred_path, "Predicted adjacency CSV")->required();
  eval_cmd->add_option("--truth", eval_args.truth_path, "Ground-truth edge CSV")->required();
  eval_cmd->add_flag("--signed", eval_args.signed_requested,
                     "Record that signed metrics are of interest (all six are always computed)");
  eval_cmd->add_option("--k", eval_args.k, "Edge budget for SHD/FDR (default: |truth|)");
  eval_cmd->add_option("--seed", eval_args.seed, "Seed recorded in metadata")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_args.out_path, "Output JSON path")->required();

  ClusterArgs cluster_args;
  CLI::App* cluster =
      app.add_subcommand("cluster-grn", "Cluster gradients and emit per-cluster GRNs");
  cluster->add_option("--expr", cluster_args.expr_path, "Expression CSV")->required();
  cluster->add_option("--grads", cluster_args.grads_path, "Gradient long CSV from infer")
      ->required();
  cluster->add_option("--eps", cluster_args.eps,
                      "DBSCAN eps (default: median 4-NN distance heuristic)");
  cluster->add_option("--min-points", cluster_args.min_points, "DBSCAN min points")
      ->capture_default_str();
  cluster->add_option("--z-threshold", cluster_args.z_threshold, "Sparsification threshold")
      ->capture_default_str();
  cluster->add_option("--out", cluster_args.out_dir, "Output directory")->required();

  ToyDemoArgs toy_args;
  CLI::App* toy = app.add_subcommand("toy-demo", "Run the furcation toy comparison");
  toy->add_option("--branch", toy_args.branch, "red, blue, or both")->capture_default_str();
  toy->add_option("--cells", toy_args.cells, "Total number of cells")->capture_default_str();
  toy->add_option("--seed", toy_args.seed, "RNG seed")->capture_default_str();
  toy->add_option("--out", toy_args.out_dir, "Output directory")->required();
  toy->add_option("--trees", toy_args.forest.n_trees, "Forest size")->capture_default_str();
  add_train_options(toy, toy_args.train);

  BenchArgs bench_args;
  CLI::App* bench = app.add_subcommand("bench", "Run a simulate-infer-eval suite");
  bench->add_option("--suite", bench_args.suite_path, "Suite CSV: network,cells[,seed;seed;...]")
      ->required();
  bench->add_option("--runs", bench_args.runs, "Seeds 1..R when a row lists none")
      ->capture_default_str();
  bench->add_option("--out", bench_args.out_dir, "Output directory")->required();
  add_train_options(bench, bench_args.train);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (sim->parsed()) return run_simulate(sim_args);
    if (infer->parsed()) return run_infer(infer_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (cluster->parsed()) return run_cluster_grn(cluster_args);
    if (toy->parsed()) return run_toy_demo(toy_args);
    if (bench->parsed()) return run_bench(bench_args);
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const numeric_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return 0;
}
