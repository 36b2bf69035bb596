#include <algorithm>
#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "kgd/gnn.hpp"
#include "kgd/rng.hpp"
#include "kgd/teacher.hpp"
#include "support/fixtures.hpp"

using namespace kgd;

namespace {

KnowledgeGraph tiny_kg() {
  std::vector<KgNode> nodes = {
      {"A", "Gene", "gene alpha sample"},
      {"B", "Gene", "gene beta other"},
      {"C", "Drug", "drug gamma third"},
  };
  std::vector<KnowledgeGraph::EdgeTriple> edges = {{"A", "rel", "B"}};
  return KnowledgeGraph::build(std::move(nodes), edges);
}

}  // namespace

TEST_CASE("encode_descriptions: single token, mean, unk fallback") {
  std::vector<KgNode> nodes = {
      {"A", "T1", "alpha"},
      {"B", "T1", "alpha beta"},
      {"C", "T2", "zzz qqq"},  // entirely out of vocabulary
  };
  auto kg = KnowledgeGraph::build(std::move(nodes), {});
  Vocab vocab;
  vocab.add("alpha");
  vocab.add("beta");
  Matrix table(3, 2);
  table.at(0, 0) = 9.0;  // unk row
  table.at(0, 1) = -9.0;
  table.at(1, 0) = 1.0;  // alpha
  table.at(1, 1) = 2.0;
  table.at(2, 0) = 3.0;  // beta
  table.at(2, 1) = 6.0;

  const auto features = encode_descriptions(kg, vocab, table);
  CHECK(features.z.at(0, 0) == 1.0);
  CHECK(features.z.at(0, 1) == 2.0);
  CHECK(features.z.at(1, 0) == 2.0);  // mean of alpha, beta
  CHECK(features.z.at(1, 1) == 4.0);
  CHECK(features.z.at(2, 0) == 9.0);  // unk row
  CHECK(features.z.at(2, 1) == -9.0);
  CHECK(features.label_names == std::vector<std::string>{"T1", "T2"});
  CHECK(features.labels == std::vector<std::size_t>{0, 0, 1});
}

TEST_CASE("propagate: zero layers is the identity") {
  auto kg = tiny_kg();
  Matrix z = Matrix::from_rows({{1, 0}, {0, 1}, {2, 2}});
  const Matrix a = neighbor_mean_matrix(kg.node_count(), kg.edges());
  CHECK(propagate_features(z, a, {}) == z);
}

TEST_CASE("propagate: two connected nodes average with identity weights") {
  std::vector<KgEdge> edges = {{0, 0, 1}};
  const Matrix a = neighbor_mean_matrix(2, edges);
  Matrix z = Matrix::from_rows({{1, 0}, {0, 1}});
  Matrix identity = Matrix::from_rows({{1, 0}, {0, 1}});
  const Matrix out = propagate_features(z, a, std::vector<Matrix>{identity});
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(out.at(i, 0) == doctest::Approx(0.5));
    CHECK(out.at(i, 1) == doctest::Approx(0.5));
  }
}

TEST_CASE("propagate: isolated node is a fixed point under identity weights") {
  std::vector<KgEdge> edges = {{0, 0, 1}};  // node 2 isolated
  const Matrix a = neighbor_mean_matrix(3, edges);
  Matrix z = Matrix::from_rows({{1, 0}, {0, 1}, {3, 4}});
  Matrix identity = Matrix::from_rows({{1, 0}, {0, 1}});
  const std::vector<Matrix> weights = {identity, identity};
  const Matrix out = propagate_features(z, a, weights);
  CHECK(out.at(2, 0) == doctest::Approx(3.0));
  CHECK(out.at(2, 1) == doctest::Approx(4.0));
}

TEST_CASE("propagate is permutation-equivariant") {
  auto fixture = kgd::testing::make_two_cliques(5, 6, 9);
  const std::size_t n = fixture.features.z.rows();
  Rng rng(77);
  Matrix w1(6, 6), w2(6, 6);
  for (double& v : w1.flat()) v = rng.gauss() * 0.4;
  for (double& v : w2.flat()) v = rng.gauss() * 0.4;
  const std::vector<Matrix> weights = {w1, w2};

  const Matrix base = propagate_features(
      fixture.features.z, neighbor_mean_matrix(n, fixture.edges), weights);

  // Relabel nodes by a random permutation.
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.integer(i)]);

  Matrix permuted_z(n, 6);
  for (std::size_t i = 0; i < n; ++i) {
    auto src = fixture.features.z.row(i);
    std::copy(src.begin(), src.end(), permuted_z.row(perm[i]).begin());
  }
  std::vector<KgEdge> permuted_edges;
  for (const auto& e : fixture.edges) {
    permuted_edges.push_back({perm[e.head], e.relation, perm[e.tail]});
  }
  const Matrix permuted = propagate_features(
      permuted_z, neighbor_mean_matrix(n, permuted_edges), weights);

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(permuted.at(perm[i], j) == doctest::Approx(base.at(i, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("pretrain_gnn separates homophilous cliques") {
  auto fixture = kgd::testing::make_two_cliques(30, 16, 3);
  GnnConfig config;
  config.layers = 2;
  config.epochs = 100;
  config.seed = 5;
  const auto model = pretrain_gnn(fixture.features, fixture.edges, config);
  CHECK(model.report.val_accuracy >= 0.9);
  CHECK(model.report.train_accuracy >= 0.9);
  CHECK(model.layer_weights.size() == 2);
  CHECK(model.report.epoch_loss.size() == 100);
}

TEST_CASE("pretrain_gnn stays at chance on random labels") {
  auto fixture = kgd::testing::make_random_label_graph(400, 4, 16, 4);
  GnnConfig config;
  config.layers = 2;
  config.epochs = 60;
  config.seed = 6;
  const auto model = pretrain_gnn(fixture.features, fixture.edges, config);
  CHECK(model.report.val_accuracy >= 0.25 - 0.15);
  CHECK(model.report.val_accuracy <= 0.25 + 0.15);
}

TEST_CASE("pretrain_gnn: zero epochs reports without training") {
  auto fixture = kgd::testing::make_two_cliques(10, 8, 3);
  GnnConfig config;
  config.epochs = 0;
  const auto model = pretrain_gnn(fixture.features, fixture.edges, config);
  CHECK(model.report.epoch_loss.empty());
  CHECK(model.layer_weights.size() == config.layers);

  // Single-label graphs are a degenerate classification task.
  NodeFeatures degenerate = fixture.features;
  degenerate.label_names = {"only"};
  for (auto& label : degenerate.labels) label = 0;
  CHECK_THROWS_AS(pretrain_gnn(degenerate, fixture.edges, config), ConfigError);
}

TEST_CASE("assemble_teacher concatenates blocks and re-splits exactly") {
  Matrix z = Matrix::from_rows({{1}});
  Matrix zp = Matrix::from_rows({{2}});
  Matrix zr = Matrix::from_rows({{3}});
  const auto teacher = assemble_teacher(z, zp, zr, {"n0"});
  CHECK(teacher.h() == Matrix::from_rows({{1, 2, 3}}));
  CHECK(teacher.width() == 3);

  Rng rng(8);
  Matrix big_z(5, 58), big_zp(5, 58), big_zr(5, 58);
  for (double& v : big_z.flat()) v = rng.gauss();
  for (double& v : big_zp.flat()) v = rng.gauss();
  for (double& v : big_zr.flat()) v = rng.gauss();
  const auto big = assemble_teacher(big_z, big_zp, big_zr,
                                    {"a", "b", "c", "d", "e"});
  CHECK(big.width() == 174);  // 2*58 + 58
  CHECK(big.slice(big.text_block()) == big_z);
  CHECK(big.slice(big.prop_block()) == big_zp);
  CHECK(big.slice(big.rel_block()) == big_zr);
  CHECK(big.row_of("c") == 2);
  CHECK_FALSE(big.row_of("zz").has_value());

  CHECK_THROWS_AS(assemble_teacher(Matrix(2, 3), Matrix(3, 3), Matrix(3, 2),
                                   {"a", "b", "c"}),
                  ShapeError);
  CHECK_THROWS_AS(assemble_teacher(Matrix(2, 3), Matrix(2, 4), Matrix(2, 2),
                                   {"a", "b"}),
                  ShapeError);
}

TEST_CASE("teacher save/load round-trips exactly") {
  Rng rng(12);
  Matrix z(4, 6), zp(4, 6), zr(4, 5);
  for (double& v : z.flat()) v = rng.gauss();
  for (double& v : zp.flat()) v = rng.gauss();
  for (double& v : zr.flat()) v = rng.gauss();
  const auto teacher = assemble_teacher(z, zp, zr, {"n0", "n1", "n2", "n3"});
  const std::string path = "teacher_roundtrip.bin";
  save_teacher(teacher, path);
  const auto loaded = load_teacher(path);
  CHECK(loaded.h() == teacher.h());
  CHECK(loaded.d_text() == 6);
  CHECK(loaded.d_rel() == 5);
  CHECK(loaded.node_ids() == teacher.node_ids());
  std::remove(path.c_str());
}
