#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "grnkan/common.hpp"
#include "grnkan/grn.hpp"
#include "grnkan/metrics.hpp"
#include "grnkan/pipeline.hpp"
#include "json.hpp"

namespace grnkan {

namespace io {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r')
    fields.back().pop_back();
  return fields;
}

inline double parse_double(const std::string& s, const std::string& file, std::size_t line_no) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw data_error(file + ": line " + std::to_string(line_no) + ": cannot parse number '" + s +
                     "'");
  return v;
}

inline void check_name_writable(const std::string& name) {
  if (name.empty() || name.find(',') != std::string::npos ||
      name.find('\n') != std::string::npos)
    throw data_error("name not representable in CSV: '" + name + "'");
}

// Writes content to path via a temporary file and rename.
inline void atomic_write(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw data_error("cannot open for writing: " + tmp.string());
    out << content;
    if (!out) throw data_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// FNV-1a checksum of a file's bytes, as 16 hex digits.
inline std::string file_checksum(const std::string& path) {
  std::string bytes = read_file(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  static const char* hex = "0123456789abcdef";
  for (int i = 15; i >= 0; --i) {
    buf[i] = hex[h & 0xf];
    h >>= 4;
  }
  buf[16] = '\0';
  return std::string(buf);
}

}  // namespace io

// --- Expression matrix CSV: genes as rows, first column gene name, header
// --- row carries cell ids.

inline std::string expression_to_csv(const ExpressionMatrix& x) {
  std::string out = "gene";
  for (const auto& id : x.cell_ids) {
    io::check_name_writable(id);
    out += ',';
    out += id;
  }
  out += '\n';
  for (std::size_t i = 0; i < x.n_genes(); ++i) {
    io::check_name_writable(x.gene_names[i]);
    out += x.gene_names[i];
    for (std::size_t p = 0; p < x.n_cells(); ++p) {
      out += ',';
      out += format_double(x.values(i, p));
    }
    out += '\n';
  }
  return out;
}

inline void write_expression_csv(const std::string& path, const ExpressionMatrix& x) {
  io::atomic_write(path, expression_to_csv(x));
}

inline ExpressionMatrix read_expression_csv(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw data_error(path + ": empty file");
  ++line_no;
  auto header = io::split_csv_line(line);
  if (header.size() < 2) throw data_error(path + ": line 1: header needs at least one cell id");
  ExpressionMatrix x;
  x.cell_ids.assign(header.begin() + 1, header.end());
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = io::split_csv_line(line);
    if (fields.size() != header.size())
      throw data_error(path + ": line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    x.gene_names.push_back(fields[0]);
    std::vector<double> vals(fields.size() - 1);
    for (std::size_t j = 1; j < fields.size(); ++j) {
      vals[j - 1] = io::parse_double(fields[j], path, line_no);
      if (!std::isfinite(vals[j - 1]))
        throw data_error(path + ": line " + std::to_string(line_no) + ": non-finite value");
    }
    rows.push_back(std::move(vals));
  }
  x.values = Matrix(rows.size(), x.cell_ids.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(), x.values.row(i));
  x.validate();
  return x;
}

// --- Ground truth CSV: Gene1,Gene2,Type with Type in {+, -}.

struct NamedEdge {
  std::string source;
  std::string target;
  int sign = 1;
};

inline std::string truth_to_csv(const std::vector<NamedEdge>& edges) {
  std::string out = "Gene1,Gene2,Type\n";
  for (const auto& e : edges) {
    io::check_name_writable(e.source);
    io::check_name_writable(e.target);
    out += e.source + ',' + e.target + ',' + (e.sign >= 0 ? '+' : '-');
    out += '\n';
  }
  return out;
}

inline void write_truth_csv(const std::string& path, const std::vector<NamedEdge>& edges) {
  io::atomic_write(path, truth_to_csv(edges));
}

inline std::vector<NamedEdge> read_truth_csv(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw data_error(path + ": empty file");
  ++line_no;
  std::vector<NamedEdge> edges;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = io::split_csv_line(line);
    if (fields.size() != 3)
      throw data_error(path + ": line " + std::to_string(line_no) + ": expected 3 fields");
    NamedEdge e;
    e.source = fields[0];
    e.target = fields[1];
    if (fields[2] == "+")
      e.sign = 1;
    else if (fields[2] == "-")
      e.sign = -1;
    else
      throw data_error(path + ": line " + std::to_string(line_no) + ": edge type must be + or -");
    edges.push_back(std::move(e));
  }
  return edges;
}

// Reindexes named edges against a gene-name universe; unknown names produce
// an explicit diff listing. Self-loops are dropped (counted in
// dropped_self_loops).
inline GroundTruthNetwork align_truth(const std::vector<NamedEdge>& edges,
                                      const std::vector<std::string>& gene_names,
                                      std::size_t* dropped_self_loops = nullptr) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < gene_names.size(); ++i) index[gene_names[i]] = i;
  std::vector<std::string> missing;
  std::vector<std::tuple<std::size_t, std::size_t, int>> idx_edges;
  for (const auto& e : edges) {
    auto s = index.find(e.source);
    auto t = index.find(e.target);
    if (s == index.end()) missing.push_back(e.source);
    if (t == index.end()) missing.push_back(e.target);
    if (s == index.end() || t == index.end()) continue;
    idx_edges.emplace_back(s->second, t->second, e.sign);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::string msg = "gene names in truth but not in prediction:";
    for (const auto& m : missing) msg += " " + m;
    throw data_error(msg);
  }
  return GroundTruthNetwork::from_edges(gene_names, idx_edges, dropped_self_loops);
}

// --- Adjacency CSV: dense, rows = regulators, columns = targets.

inline std::string adjacency_to_csv(const AdjacencyMatrix& adj) {
  const std::size_t g = adj.gene_names.size();
  if (adj.weights.rows() != g || adj.weights.cols() != g)
    throw shape_error("adjacency matrix shape does not match gene names");
  std::string out;
  for (const auto& n : adj.gene_names) {
    io::check_name_writable(n);
    out += ',';
    out += n;
  }
  out += '\n';
  for (std::size_t j = 0; j < g; ++j) {
    out += adj.gene_names[j];
    for (std::size_t i = 0; i < g; ++i) {
      out += ',';
      out += format_double(adj.weights(j, i));
    }
    out += '\n';
  }
  return out;
}

inline void write_adjacency_csv(const std::string& path, const AdjacencyMatrix& adj) {
  io::atomic_write(path, adjacency_to_csv(adj));
}

inline AdjacencyMatrix read_adjacency_csv(const std::string& path) {
  std::istringstream in(io::read_file(path));
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw data_error(path + ": empty file");
  ++line_no;
  auto header = io::split_csv_line(line);
  if (header.size() < 3 || !header[0].empty())
    throw data_error(path + ": line 1: adjacency header must start with an empty field");
  AdjacencyMatrix adj;
  adj.gene_names.assign(header.begin() + 1, header.end());
  const std::size_t g = adj.gene_names.size();
  adj.weights = Matrix(g, g);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = io::split_csv_line(line);
    if (fields.size() != g + 1)
      throw data_error(path + ": line " + std::to_string(line_no) + ": expected " +
                       std::to_string(g + 1) + " fields, got " + std::to_string(fields.size()));
    if (row >= g) throw data_error(path + ": more rows than genes");
    if (fields[0] != adj.gene_names[row])
      throw data_error(path + ": line " + std::to_string(line_no) +
                       ": row order does not match header order");
    for (std::size_t i = 0; i < g; ++i)
      adj.weights(row, i) = io::parse_double(fields[i + 1], path, line_no);
    ++row;
  }
  if (row != g) throw data_error(path + ": expected " + std::to_string(g) + " rows");
  return adj;
}

// --- Ranked edge list CSV: Gene1,Gene2,EdgeWeight,Sign sorted by |weight|
// --- descending, ties broken lexicographically; zero entries are omitted.

inline std::string edge_list_to_csv(const AdjacencyMatrix& adj, bool signed_output = true) {
  const std::size_t g = adj.gene_names.size();
  struct Row {
    std::size_t src, dst;
    double w;
  };
  std::vector<Row> rows;
  for (std::size_t j = 0; j < g; ++j)
    for (std::size_t i = 0; i < g; ++i)
      if (j != i && adj.weights(j, i) != 0.0) rows.push_back({j, i, adj.weights(j, i)});
  std::sort(rows.begin(), rows.end(), [&](const Row& a, const Row& b) {
    double va = std::abs(a.w), vb = std::abs(b.w);
    if (va != vb) return va > vb;
    if (adj.gene_names[a.src] != adj.gene_names[b.src])
      return adj.gene_names[a.src] < adj.gene_names[b.src];
    return adj.gene_names[a.dst] < adj.gene_names[b.dst];
  });
  std::string out = signed_output ? "Gene1,Gene2,EdgeWeight,Sign\n" : "Gene1,Gene2,EdgeWeight\n";
  for (const auto& r : rows) {
    out += adj.gene_names[r.src] + ',' + adj.gene_names[r.dst] + ',' + format_double(r.w);
    if (signed_output) {
      out += ',';
      out += (r.w > 0 ? '+' : '-');
    }
    out += '\n';
  }
  return out;
}

inline void write_edge_list_csv(const std::string& path, const AdjacencyMatrix& adj,
                                bool signed_output = true) {
  io::atomic_write(path, edge_list_to_csv(adj, signed_output));
}

// --- Gradient field long CSV: target_gene,regulator_gene,cell_id,gradient.

inline std::string gradients_to_csv(const std::vector<GradientField>& fields,
                                    const std::vector<std::string>& gene_names,
                                    const std::vector<std::string>& cell_ids) {
  std::string out = "target_gene,regulator_gene,cell_id,gradient\n";
  for (const auto& f : fields) {
    const std::string& target = gene_names.at(f.target_index);
    for (std::size_t r = 0; r < f.gradients.rows(); ++r) {
      const std::string& reg = gene_names.at(f.regulator_index[r]);
      for (std::size_t p = 0; p < f.gradients.cols(); ++p) {
        out += target + ',' + reg + ',' + cell_ids.at(p) + ',' +
               format_double(f.gradients(r, p));
        out += '\n';
      }
    }
  }
  return out;
}

inline void write_gradients_csv(const std::string& path, const std::vector<GradientField>& fields,
                                const std::vector<std::string>& gene_names,
                                const std::vector<std::string>& cell_ids) {
  io::atomic_write(path, gradients_to_csv(fields, gene_names, cell_ids));
}

inline std::vector<GradientField> read_gradients_csv(const std::string& path,
                                                     const std::vector<std::string>& gene_names,
                                                     const std::vector<std::string>& cell_ids) {
  std::map<std::string, std::size_t> gene_idx, cell_idx;
  for (std::size_t i = 0; i < gene_names.size(); ++i) gene_idx[gene_names[i]] = i;
  for (std::size_t p = 0; p < cell_ids.size(); ++p) cell_idx[cell_ids[p]] = p;
  const std::size_t g = gene_names.size();
  const std::size_t c = cell_ids.size();

  std::vector<GradientField> fields(g);
  std::vector<std::vector<std::size_t>> reg_row(g, std::vector<std::size_t>(g, 0));
  for (std::size_t i = 0; i < g; ++i) {
    fields[i].target_index = i;
    fields[i].gradients = Matrix(g - 1, c);
    std::size_t r = 0;
    for (std::size_t j = 0; j < g; ++j) {
      if (j == i) continue;
      fields[i].regulator_index.push_back(j);
      reg_row[i][j] = r++;
    }
  }

  std::istringstream in(io::read_file(path));
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw data_error(path + ": empty file");
  ++line_no;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fieldv = io::split_csv_line(line);
    if (fieldv.size() != 4)
      throw data_error(path + ": line " + std::to_string(line_no) + ": expected 4 fields");
    auto ti = gene_idx.find(fieldv[0]);
    auto ri = gene_idx.find(fieldv[1]);
    auto ci = cell_idx.find(fieldv[2]);
    if (ti == gene_idx.end() || ri == gene_idx.end())
      throw data_error(path + ": line " + std::to_string(line_no) + ": unknown gene name");
    if (ci == cell_idx.end())
      throw data_error(path + ": line " + std::to_string(line_no) + ": unknown cell id");
    if (ti->second == ri->second)
      throw data_error(path + ": line " + std::to_string(line_no) +
                       ": self-gradient entries are not allowed");
    double v = io::parse_double(fieldv[3], path, line_no);
    fields[ti->second].gradients(reg_row[ti->second][ri->second], ci->second) = v;
  }
  return fields;
}

// --- Cluster label CSV: cell_id,label.

inline std::string labels_to_csv(const std::vector<std::string>& cell_ids,
                                 const std::vector<int>& labels) {
  if (cell_ids.size() != labels.size()) throw shape_error("label count mismatch");
  std::string out = "cell_id,label\n";
  for (std::size_t p = 0; p < cell_ids.size(); ++p)
    out += cell_ids[p] + ',' + std::to_string(labels[p]) + '\n';
  return out;
}

inline void write_labels_csv(const std::string& path, const std::vector<std::string>& cell_ids,
                             const std::vector<int>& labels) {
  io::atomic_write(path, labels_to_csv(cell_ids, labels));
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  io::atomic_write(path, j.dump(2) + "\n");
}

}  // namespace grnkan
