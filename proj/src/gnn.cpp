#include "kgd/gnn.hpp"

#include <algorithm>
#include <set>

#include "kgd/autodiff.hpp"
#include "kgd/errors.hpp"
#include "kgd/rng.hpp"
#include "kgd/text.hpp"

namespace kgd {

NodeFeatures encode_descriptions(const KnowledgeGraph& kg, const Vocab& vocab,
                                 const Matrix& token_table) {
  if (token_table.rows() != vocab.size()) {
    throw ShapeError("encode_descriptions: token table has " +
                     std::to_string(token_table.rows()) + " rows but vocab has " +
                     std::to_string(vocab.size()) + " tokens");
  }
  NodeFeatures features;
  features.z = Matrix(kg.node_count(), token_table.cols());
  std::unordered_map<std::string, std::size_t> label_index;
  for (std::size_t i = 0; i < kg.node_count(); ++i) {
    const auto& node = kg.nodes()[i];
    const auto tokens = tokenize_text(node.description);
    if (tokens.empty()) {
      throw DataError("encode_descriptions: node '" + node.id +
                      "' has a whitespace-only description");
    }
    auto dst = features.z.row(i);
    for (const auto& tok : tokens) {
      auto src = token_table.row(vocab.id(tok));
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
    }
    const double inv = 1.0 / static_cast<double>(tokens.size());
    for (double& v : dst) v *= inv;

    auto [it, inserted] =
        label_index.emplace(node.type_label, features.label_names.size());
    if (inserted) {
      features.label_names.push_back(node.type_label);
    }
    features.labels.push_back(it->second);
  }
  return features;
}

Matrix neighbor_mean_matrix(std::size_t node_count, std::span<const KgEdge> edges) {
  std::vector<std::set<std::size_t>> neighborhood(node_count);
  for (std::size_t v = 0; v < node_count; ++v) {
    neighborhood[v].insert(v);
  }
  for (const auto& edge : edges) {
    if (edge.head >= node_count || edge.tail >= node_count) {
      throw ShapeError("neighbor_mean_matrix: edge endpoint out of range");
    }
    neighborhood[edge.head].insert(edge.tail);
    neighborhood[edge.tail].insert(edge.head);
  }
  Matrix a(node_count, node_count);
  for (std::size_t v = 0; v < node_count; ++v) {
    const double w = 1.0 / static_cast<double>(neighborhood[v].size());
    for (std::size_t u : neighborhood[v]) {
      a.at(v, u) = w;
    }
  }
  return a;
}

namespace {

Var propagate_on_tape(Tape& tape, Var features, Var neighbor_means,
                      std::span<const Var> layer_weights) {
  Var h = features;
  for (Var w : layer_weights) {
    h = tape.relu(tape.matmul(tape.matmul(neighbor_means, h), w));
  }
  return h;
}

}  // namespace

Matrix propagate_features(const Matrix& z, const Matrix& neighbor_means,
                          std::span<const Matrix> layer_weights) {
  for (const auto& w : layer_weights) {
    if (w.rows() != z.cols() || w.cols() != z.cols()) {
      throw ShapeError("propagate_features: layer weight is " + shape_str(w) +
                       ", features are " + shape_str(z));
    }
  }
  Tape tape;
  Var h = tape.constant(z);
  Var a = tape.constant(neighbor_means);
  std::vector<Var> weights;
  weights.reserve(layer_weights.size());
  for (const auto& w : layer_weights) {
    weights.push_back(tape.constant(w));
  }
  return tape.value(propagate_on_tape(tape, h, a, weights));
}

GnnModel pretrain_gnn(const NodeFeatures& features, std::span<const KgEdge> edges,
                      const GnnConfig& config) {
  const std::size_t node_count = features.z.rows();
  const std::size_t dim = features.z.cols();
  const std::size_t num_labels = features.label_names.size();
  if (features.labels.size() != node_count) {
    throw ShapeError("pretrain_gnn: label count does not match feature rows");
  }
  if (num_labels < 2) {
    throw ConfigError("pretrain_gnn: need at least 2 distinct labels, got " +
                      std::to_string(num_labels));
  }
  if (config.val_fraction < 0.0 || config.val_fraction >= 1.0) {
    throw ConfigError("pretrain_gnn: val_fraction must lie in [0, 1)");
  }

  // Seeded split.
  std::vector<std::size_t> order(node_count);
  for (std::size_t i = 0; i < node_count; ++i) order[i] = i;
  Rng split_rng(Rng::derive(config.seed, 0xA11));
  for (std::size_t i = node_count; i > 1; --i) {
    std::swap(order[i - 1], order[split_rng.integer(i)]);
  }
  const auto val_count =
      static_cast<std::size_t>(config.val_fraction * static_cast<double>(node_count));
  std::vector<std::uint8_t> train_mask(node_count, 0);
  std::vector<std::uint8_t> val_mask(node_count, 0);
  for (std::size_t i = 0; i < node_count; ++i) {
    (i < val_count ? val_mask : train_mask)[order[i]] = 1;
  }

  ParamStore store;
  Rng init_rng(Rng::derive(config.seed, 0xB22));
  const double w_scale = std::sqrt(2.0 / static_cast<double>(dim + dim));
  for (std::size_t k = 0; k < config.layers; ++k) {
    Matrix w(dim, dim);
    for (double& v : w.flat()) v = init_rng.gauss() * w_scale;
    store.create("gnn.layer_" + std::to_string(k), std::move(w));
  }
  {
    const double h_scale = std::sqrt(2.0 / static_cast<double>(dim + num_labels));
    Matrix w(dim, num_labels);
    for (double& v : w.flat()) v = init_rng.gauss() * h_scale;
    store.create("gnn.head_w", std::move(w));
    store.create("gnn.head_b", Matrix(1, num_labels));
  }

  const Matrix neighbor_means = neighbor_mean_matrix(node_count, edges);

  auto forward_logits = [&](Tape& tape) {
    Var z = tape.constant(features.z);
    Var a = tape.constant(neighbor_means);
    std::vector<Var> weights;
    for (std::size_t k = 0; k < config.layers; ++k) {
      weights.push_back(tape.param(store, "gnn.layer_" + std::to_string(k)));
    }
    Var h = propagate_on_tape(tape, z, a, weights);
    return tape.linear(h, tape.param(store, "gnn.head_w"),
                       tape.param(store, "gnn.head_b"));
  };

  GnnModel model;
  model.report.train_nodes = node_count - val_count;
  model.report.val_nodes = val_count;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Tape tape;
    Var loss = tape.softmax_xent(forward_logits(tape), features.labels, train_mask);
    model.report.epoch_loss.push_back(tape.scalar(loss));
    store.zero_grad();
    tape.backward(loss);
    store.adam_step(config.learning_rate);
  }

  auto accuracy = [&](const std::vector<std::uint8_t>& mask) {
    Tape tape;
    const Matrix logits = tape.value(forward_logits(tape));
    std::size_t correct = 0;
    std::size_t total = 0;
    for (std::size_t i = 0; i < node_count; ++i) {
      if (!mask[i]) continue;
      auto row = logits.row(i);
      const std::size_t argmax =
          std::max_element(row.begin(), row.end()) - row.begin();
      correct += argmax == features.labels[i] ? 1 : 0;
      ++total;
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
  };
  model.report.train_accuracy = accuracy(train_mask);
  model.report.val_accuracy = accuracy(val_mask);

  for (std::size_t k = 0; k < config.layers; ++k) {
    model.layer_weights.push_back(store.value("gnn.layer_" + std::to_string(k)));
  }
  model.head_weight = store.value("gnn.head_w");
  model.head_bias = store.value("gnn.head_b");
  model.label_names = features.label_names;
  return model;
}

}  // namespace kgd
