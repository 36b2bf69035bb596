#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kgd/data.hpp"
#include "kgd/gnn.hpp"
#include "kgd/kg.hpp"
#include "kgd/teacher.hpp"

namespace kgd::testing {

/// Seeded synthetic world: a small typed knowledge graph, sentence templates
/// over its relations, and a generated corpus split into train/held-out.
struct CorpusFixture {
  KnowledgeGraph kg;
  TemplateSet templates;
  std::vector<std::string> type_names;
  std::vector<RelationRow> rows;  // one row per generated entry, same order
  std::vector<DatasetEntry> train_entries;
  std::vector<DatasetEntry> heldout_entries;
};

CorpusFixture make_corpus_fixture(std::size_t sentences = 550,
                                  std::uint64_t seed = 7,
                                  std::size_t entity_count = 40);

/// 20-node single-relation cycle: node i --next--> node (i+1) mod n.
KnowledgeGraph make_cycle_kg(std::size_t nodes = 20);

struct GraphFixture {
  NodeFeatures features;
  std::vector<KgEdge> edges;
};

/// Two disconnected cliques with label-correlated features.
GraphFixture make_two_cliques(std::size_t per_clique = 30, std::size_t dim = 16,
                              std::uint64_t seed = 3);

/// Uniformly random labels over pure-noise features.
GraphFixture make_random_label_graph(std::size_t nodes = 400,
                                     std::size_t num_labels = 4,
                                     std::size_t dim = 16, std::uint64_t seed = 4);

/// Full teacher for a KG: encoded descriptions, pretrained propagation,
/// TransR entity vectors, assembled H.
TeacherEmbedding build_fixture_teacher(const KnowledgeGraph& kg, std::uint64_t seed,
                                       std::size_t d_prime = 58,
                                       std::size_t d_rel = 58);

}  // namespace kgd::testing
