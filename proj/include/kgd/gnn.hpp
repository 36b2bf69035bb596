#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kgd/kg.hpp"
#include "kgd/matrix.hpp"
#include "kgd/vocab.hpp"

namespace kgd {

/// Encoded node descriptions (rows of Z) plus node class labels.
struct NodeFeatures {
  Matrix z;                              // M x d'
  std::vector<std::size_t> labels;       // length M
  std::vector<std::string> label_names;  // index -> type label
};

/// Z row for a node = mean of its description-token embedding rows;
/// out-of-vocabulary tokens hit the reserved unknown row.
NodeFeatures encode_descriptions(const KnowledgeGraph& kg, const Vocab& vocab,
                                 const Matrix& token_table);

/// Row-stochastic matrix A with A[v][u] = 1/|N(v) ∪ {v}| over the undirected
/// neighborhood including self. One left-multiply = one mean-aggregation.
Matrix neighbor_mean_matrix(std::size_t node_count, std::span<const KgEdge> edges);

/// h^{k+1} = ReLU(mean_{u in N(v) ∪ {v}} h^k · W_k); zero layers = identity.
Matrix propagate_features(const Matrix& z, const Matrix& neighbor_means,
                          std::span<const Matrix> layer_weights);

struct GnnConfig {
  std::size_t layers = 2;  // K
  std::size_t epochs = 200;
  double learning_rate = 0.02;
  double val_fraction = 0.2;
  std::uint64_t seed = 1;
};

struct GnnReport {
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  std::size_t train_nodes = 0;
  std::size_t val_nodes = 0;
  std::vector<double> epoch_loss;
};

struct GnnModel {
  std::vector<Matrix> layer_weights;  // K matrices d' x d'
  Matrix head_weight;                 // d' x L (classification only)
  Matrix head_bias;                   // 1 x L
  std::vector<std::string> label_names;
  GnnReport report;
};

/// Trains mean-aggregation message passing plus a linear softmax head with
/// cross-entropy on a seeded train split; the head is kept for reporting but
/// propagation uses only layer_weights. epochs == 0 returns the seeded
/// initialization with accuracies measured as-is.
GnnModel pretrain_gnn(const NodeFeatures& features, std::span<const KgEdge> edges,
                      const GnnConfig& config);

}  // namespace kgd
