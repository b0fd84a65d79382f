#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <random>
#include <string>

#include "grnkan/io.hpp"

using namespace grnkan;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("grnkan_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

ExpressionMatrix sample_expression(std::uint64_t seed) {
  ExpressionMatrix x;
  x.gene_names = {"g1", "g2", "g3"};
  x.cell_ids = {"c1", "c2", "c3", "c4"};
  x.values = Matrix(3, 4);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 3.0);
  for (auto& v : x.values.data()) v = u(rng);
  x.values(1, 2) = 1.0 / 3.0;  // force a non-terminating decimal
  return x;
}

}  // namespace

TEST_CASE("expression csv round-trips bit-exactly") {
  TempDir dir;
  ExpressionMatrix x = sample_expression(1);
  write_expression_csv(dir.file("expr.csv"), x);
  ExpressionMatrix back = read_expression_csv(dir.file("expr.csv"));
  CHECK(back.gene_names == x.gene_names);
  CHECK(back.cell_ids == x.cell_ids);
  REQUIRE(back.values == x.values);
}

TEST_CASE("malformed expression csv reports the line number") {
  TempDir dir;
  io::atomic_write(dir.file("ragged.csv"), "gene,c1,c2\ng1,1.0,2.0\ng2,1.0\n");
  try {
    read_expression_csv(dir.file("ragged.csv"));
    FAIL("expected data_error");
  } catch (const data_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  io::atomic_write(dir.file("text.csv"), "gene,c1,c2\ng1,1.0,banana\n");
  try {
    read_expression_csv(dir.file("text.csv"));
    FAIL("expected data_error");
  } catch (const data_error& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    CHECK(std::string(e.what()).find("banana") != std::string::npos);
  }
  io::atomic_write(dir.file("nan.csv"), "gene,c1,c2\ng1,1.0,nan\n");
  CHECK_THROWS_AS(read_expression_csv(dir.file("nan.csv")), data_error);
}

TEST_CASE("truth csv round-trips") {
  TempDir dir;
  std::vector<NamedEdge> edges = {{"a", "b", 1}, {"b", "c", -1}, {"c", "a", 1}};
  write_truth_csv(dir.file("truth.csv"), edges);
  auto back = read_truth_csv(dir.file("truth.csv"));
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].source == edges[i].source);
    CHECK(back[i].target == edges[i].target);
    CHECK(back[i].sign == edges[i].sign);
  }
  io::atomic_write(dir.file("bad.csv"), "Gene1,Gene2,Type\na,b,?\n");
  CHECK_THROWS_AS(read_truth_csv(dir.file("bad.csv")), data_error);
}

TEST_CASE("align_truth reports unknown gene names explicitly") {
  std::vector<NamedEdge> edges = {{"a", "b", 1}, {"q", "b", 1}, {"a", "zz", -1}};
  try {
    align_truth(edges, {"a", "b", "c"});
    FAIL("expected data_error");
  } catch (const data_error& e) {
    std::string msg = e.what();
    CHECK(msg.find("q") != std::string::npos);
    CHECK(msg.find("zz") != std::string::npos);
  }
  // Self loops counted and dropped.
  std::size_t dropped = 0;
  auto t = align_truth({{"a", "a", 1}, {"a", "b", 1}}, {"a", "b"}, &dropped);
  CHECK(dropped == 1);
  CHECK(t.n_edges() == 1);
}

TEST_CASE("adjacency csv round-trips bit-exactly") {
  TempDir dir;
  AdjacencyMatrix adj;
  adj.gene_names = {"g1", "g2", "g3"};
  adj.weights = Matrix(3, 3);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) adj.weights(i, j) = i == j ? 0.0 : u(rng);
  write_adjacency_csv(dir.file("adj.csv"), adj);
  AdjacencyMatrix back = read_adjacency_csv(dir.file("adj.csv"));
  CHECK(back.gene_names == adj.gene_names);
  REQUIRE(back.weights == adj.weights);
}

TEST_CASE("edge list is ranked by magnitude with lexicographic ties") {
  AdjacencyMatrix adj;
  adj.gene_names = {"b", "a", "c"};
  adj.weights = Matrix(3, 3, 0.0);
  adj.weights(0, 1) = -0.9;  // b -> a
  adj.weights(1, 0) = 0.5;   // a -> b
  adj.weights(2, 0) = -0.5;  // c -> b, ties with a->b
  adj.weights(2, 1) = 0.1;   // c -> a
  std::string csv = edge_list_to_csv(adj);
  std::string expected =
      "Gene1,Gene2,EdgeWeight,Sign\n"
      "b,a,-0.9,-\n"
      "a,b,0.5,+\n"
      "c,b,-0.5,-\n"
      "c,a,0.1,+\n";
  CHECK(csv == expected);
}

TEST_CASE("gradient csv round-trips through the parser") {
  std::vector<std::string> genes = {"g1", "g2", "g3"};
  std::vector<std::string> cells = {"c1", "c2"};
  std::vector<GradientField> fields(3);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (std::size_t i = 0; i < 3; ++i) {
    fields[i].target_index = i;
    fields[i].gradients = Matrix(2, 2);
    for (std::size_t j = 0; j < 3; ++j)
      if (j != i) fields[i].regulator_index.push_back(j);
    for (auto& v : fields[i].gradients.data()) v = u(rng);
  }
  TempDir dir;
  write_gradients_csv(dir.file("grads.csv"), fields, genes, cells);
  auto back = read_gradients_csv(dir.file("grads.csv"), genes, cells);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].target_index == fields[i].target_index);
    CHECK(back[i].regulator_index == fields[i].regulator_index);
    REQUIRE(back[i].gradients == fields[i].gradients);
  }
}

TEST_CASE("label csv format") {
  std::string csv = labels_to_csv({"c1", "c2", "c3"}, {0, -1, 2});
  CHECK(csv == "cell_id,label\nc1,0\nc2,-1\nc3,2\n");
}

TEST_CASE("checksums are stable and content-sensitive") {
  TempDir dir;
  io::atomic_write(dir.file("a.txt"), "hello world\n");
  io::atomic_write(dir.file("b.txt"), "hello world\n");
  io::atomic_write(dir.file("c.txt"), "hello worle\n");
  CHECK(io::file_checksum(dir.file("a.txt")) == io::file_checksum(dir.file("b.txt")));
  CHECK(io::file_checksum(dir.file("a.txt")) != io::file_checksum(dir.file("c.txt")));
  CHECK(io::file_checksum(dir.file("a.txt")).size() == 16);
}

TEST_CASE("atomic write creates nested directories and leaves no temp file") {
  TempDir dir;
  std::string nested = dir.file("sub/dir/out.csv");
  io::atomic_write(nested, "x\n");
  CHECK(fs::exists(nested));
  CHECK_FALSE(fs::exists(nested + ".tmp"));
  CHECK(io::read_file(nested) == "x\n");
}

TEST_CASE("names with commas are rejected at write time") {
  ExpressionMatrix x = sample_expression(9);
  x.gene_names[0] = "bad,name";
  TempDir dir;
  CHECK_THROWS_AS(write_expression_csv(dir.file("e.csv"), x), data_error);
}
