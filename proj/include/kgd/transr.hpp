#pragma once

#include <cstdint>
#include <vector>

#include "kgd/kg.hpp"
#include "kgd/matrix.hpp"

namespace kgd {

/// Entity vectors live in entity space; each relation carries a translation
/// vector and a projection matrix into its own space. Row-vector convention:
/// the projection of h is h · M_r.
struct TransRParams {
  Matrix entities;                  // M x d''
  Matrix relations;                 // R x d''
  std::vector<Matrix> projections;  // R matrices d'' x d''
};

/// Energy ‖h·M_r + r − t·M_r‖₂²; lower = more plausible.
double transr_score(const TransRParams& params, std::size_t head,
                    std::size_t relation, std::size_t tail);

struct TransRConfig {
  std::size_t dim = 58;  // d''
  double margin = 1.0;
  std::size_t epochs = 200;
  std::size_t negatives_per_positive = 1;
  double learning_rate = 0.02;
  std::uint64_t seed = 1;
};

struct TransRResult {
  TransRParams params;
  std::vector<double> epoch_mean_loss;  // hinge mean per epoch
};

/// Margin ranking over the graph's directed edges with filtered uniform
/// corruption of head or tail. Entity vectors are renormalized to unit L2
/// after every epoch; epochs == 0 returns the seeded unit-norm init.
TransRResult train_transr(const KnowledgeGraph& kg, const TransRConfig& config);

/// Rank of the true tail among all candidate tails by ascending energy,
/// with other known-true tails for (head, relation) removed from the
/// candidate list (standard filtered ranking). Rank is 1-based.
std::size_t filtered_tail_rank(const TransRParams& params, const KnowledgeGraph& kg,
                               const KgEdge& triple);

}  // namespace kgd
