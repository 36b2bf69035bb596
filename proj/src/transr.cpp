#include "kgd/transr.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "kgd/autodiff.hpp"
#include "kgd/errors.hpp"
#include "kgd/optim.hpp"
#include "kgd/rng.hpp"

namespace kgd {

namespace {

std::uint64_t triple_key(std::size_t h, std::size_t r, std::size_t t,
                         std::size_t num_nodes) {
  return (static_cast<std::uint64_t>(h) * num_nodes + t) * 65536ULL + r;
}

}  // namespace

double transr_score(const TransRParams& params, std::size_t head,
                    std::size_t relation, std::size_t tail) {
  if (head >= params.entities.rows() || tail >= params.entities.rows()) {
    throw ShapeError("transr_score: entity index out of range");
  }
  if (relation >= params.projections.size()) {
    throw ShapeError("transr_score: relation index out of range");
  }
  const Matrix& proj = params.projections[relation];
  const std::size_t d = params.entities.cols();
  auto h = params.entities.row(head);
  auto t = params.entities.row(tail);
  auto r = params.relations.row(relation);
  double score = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double ph = 0.0;
    double pt = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      ph += h[k] * proj.at(k, j);
      pt += t[k] * proj.at(k, j);
    }
    const double diff = ph + r[j] - pt;
    score += diff * diff;
  }
  return score;
}

TransRResult train_transr(const KnowledgeGraph& kg, const TransRConfig& config) {
  const std::size_t num_nodes = kg.node_count();
  const std::size_t num_relations = kg.relation_count();
  if (kg.edges().empty()) {
    throw ConfigError("train_transr: graph has no edges");
  }
  if (num_nodes < 2) {
    throw ConfigError("train_transr: need at least 2 nodes to form negatives");
  }
  if (config.dim == 0) {
    throw ConfigError("train_transr: dim must be >= 1");
  }

  ParamStore store;
  Rng init_rng(Rng::derive(config.seed, 0xC33));
  {
    Matrix entities(num_nodes, config.dim);
    for (double& v : entities.flat()) v = init_rng.gauss();
    normalize_rows(entities);
    store.create("transr.entities", std::move(entities));

    const double r_scale = 1.0 / std::sqrt(static_cast<double>(config.dim));
    Matrix relations(num_relations, config.dim);
    for (double& v : relations.flat()) v = init_rng.gauss() * r_scale;
    store.create("transr.relations", std::move(relations));

    // Projections start at the identity, i.e. TransE geometry.
    for (std::size_t r = 0; r < num_relations; ++r) {
      Matrix proj(config.dim, config.dim);
      for (std::size_t j = 0; j < config.dim; ++j) proj.at(j, j) = 1.0;
      store.create("transr.proj_" + std::to_string(r), std::move(proj));
    }
  }

  std::unordered_set<std::uint64_t> known;
  for (const auto& edge : kg.edges()) {
    known.insert(triple_key(edge.head, edge.relation, edge.tail, num_nodes));
  }

  TransRResult result;
  Rng epoch_rng(Rng::derive(config.seed, 0xD44));
  std::vector<std::size_t> order(kg.edges().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[epoch_rng.integer(i)]);
    }

    Tape tape;
    Var entities = tape.param(store, "transr.entities");
    Var relations = tape.param(store, "transr.relations");
    std::vector<Var> projections;
    for (std::size_t r = 0; r < num_relations; ++r) {
      projections.push_back(tape.param(store, "transr.proj_" + std::to_string(r)));
    }
    auto score_var = [&](std::size_t h, std::size_t r, std::size_t t) {
      Var hp = tape.matmul(tape.gather_rows(entities, {h}), projections[r]);
      Var tp = tape.matmul(tape.gather_rows(entities, {t}), projections[r]);
      Var diff = tape.sub(tape.add(hp, tape.gather_rows(relations, {r})), tp);
      return tape.sum_all(tape.mul(diff, diff));
    };

    Var total{};
    std::size_t pairs = 0;
    for (std::size_t idx : order) {
      const KgEdge& pos = kg.edges()[idx];
      for (std::size_t n = 0; n < config.negatives_per_positive; ++n) {
        // Corrupt head or tail uniformly; resample while the corrupted triple
        // is a known edge.
        std::size_t neg_head = pos.head;
        std::size_t neg_tail = pos.tail;
        bool found = false;
        for (int attempt = 0; attempt < 64 && !found; ++attempt) {
          neg_head = pos.head;
          neg_tail = pos.tail;
          const std::size_t replacement = epoch_rng.integer(num_nodes);
          if (epoch_rng.bernoulli(0.5)) {
            neg_head = replacement;
          } else {
            neg_tail = replacement;
          }
          found = (neg_head != pos.head || neg_tail != pos.tail) &&
                  !known.count(
                      triple_key(neg_head, pos.relation, neg_tail, num_nodes));
        }
        if (!found) continue;  // densely connected corner; skip this negative

        Var hinge = tape.relu(tape.add_scalar(
            tape.sub(score_var(pos.head, pos.relation, pos.tail),
                     score_var(neg_head, pos.relation, neg_tail)),
            config.margin));
        total = pairs == 0 ? hinge : tape.add(total, hinge);
        ++pairs;
      }
    }

    if (pairs == 0) {
      result.epoch_mean_loss.push_back(0.0);
      continue;
    }
    Var mean_loss = tape.scale(total, 1.0 / static_cast<double>(pairs));
    result.epoch_mean_loss.push_back(tape.scalar(mean_loss));
    store.zero_grad();
    tape.backward(mean_loss);
    // Plain SGD with a cosine-decayed rate, as in the standard TransR
    // recipe. Moment-normalized steps misbehave here: hinge gradients go
    // silent near the optimum and the next active pair then produces an
    // enormous normalized step.
    const double rate = lr_at(epoch, {config.learning_rate, config.epochs, 0.0});
    for (const auto& name : store.names()) {
      auto value = store.value(name).flat();
      auto grad = store.grad(name).flat();
      for (std::size_t i = 0; i < value.size(); ++i) {
        value[i] -= rate * grad[i];
      }
    }
    normalize_rows(store.value("transr.entities"));
  }

  result.params.entities = store.value("transr.entities");
  result.params.relations = store.value("transr.relations");
  for (std::size_t r = 0; r < num_relations; ++r) {
    result.params.projections.push_back(
        store.value("transr.proj_" + std::to_string(r)));
  }
  return result;
}

std::size_t filtered_tail_rank(const TransRParams& params, const KnowledgeGraph& kg,
                               const KgEdge& triple) {
  std::unordered_set<std::size_t> other_true;
  for (const auto& edge : kg.edges()) {
    if (edge.head == triple.head && edge.relation == triple.relation &&
        edge.tail != triple.tail) {
      other_true.insert(edge.tail);
    }
  }
  const double true_score =
      transr_score(params, triple.head, triple.relation, triple.tail);
  std::size_t rank = 1;
  for (std::size_t candidate = 0; candidate < kg.node_count(); ++candidate) {
    if (candidate == triple.tail || other_true.count(candidate)) continue;
    if (transr_score(params, triple.head, triple.relation, candidate) < true_score) {
      ++rank;
    }
  }
  return rank;
}

}  // namespace kgd
