#include "support/fixtures.hpp"

#include <cctype>
#include <cmath>
#include <set>

#include "kgd/rng.hpp"
#include "kgd/text.hpp"
#include "kgd/transr.hpp"
#include "kgd/vocab.hpp"

namespace kgd::testing {

namespace {

const std::vector<std::string> kTypes = {"Gene",    "Disease", "Drug",
                                         "Protein", "Cell",    "Pathway"};
const std::vector<std::string> kPrefixes = {"GN", "DS", "DR", "PR", "CL", "PW"};
const std::vector<std::string> kSuffixes = {"alpha", "beta", "gamma", "delta"};
const std::vector<std::string> kRelations = {"regulates", "interacts_with",
                                             "treats"};

nlohmann::json template_json() {
  return {
      {"regulates",
       {"HEAD regulates TAIL .", "HEAD strongly regulates TAIL in tissue .",
        "Researchers report that HEAD regulates TAIL .",
        "TAIL is regulated by HEAD ."}},
      {"interacts_with",
       {"HEAD interacts with TAIL .", "HEAD binds TAIL in vitro .",
        "Binding between HEAD and TAIL is stable .",
        "TAIL and HEAD form a module ."}},
      {"treats",
       {"HEAD treats TAIL .", "Clinicians use HEAD to treat TAIL .",
        "HEAD is prescribed for TAIL .",
        "Trials show HEAD improves TAIL outcomes ."}},
  };
}

struct Entity {
  std::string id;
  std::string name;
  std::string type;
};

std::vector<Entity> make_entities(std::size_t count) {
  std::vector<Entity> entities;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t type_idx = i % kTypes.size();
    const std::size_t within = i / kTypes.size();
    Entity e;
    e.id = "N" + std::to_string(i);
    e.type = kTypes[type_idx];
    if (i % 4 == 3) {
      // Two-token surface form; the first token never appears as a
      // standalone entity name, so first-occurrence alignment stays exact.
      e.name = kPrefixes[type_idx] + "X" + std::to_string(within) + " " +
               kSuffixes[i % kSuffixes.size()];
    } else {
      e.name = kPrefixes[type_idx] + std::to_string(within);
    }
    entities.push_back(std::move(e));
  }
  return entities;
}

}  // namespace

CorpusFixture make_corpus_fixture(std::size_t sentences, std::uint64_t seed,
                                  std::size_t entity_count) {
  CorpusFixture fixture;
  fixture.templates = TemplateSet::from_json(template_json());
  fixture.type_names = kTypes;

  const auto entities = make_entities(entity_count);
  std::vector<KgNode> nodes;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    const auto& e = entities[i];
    std::string lowered = e.type;
    for (char& c : lowered) c = static_cast<char>(std::tolower(c));
    nodes.push_back(
        {e.id, e.type, lowered + " " + e.name + " catalog " + std::to_string(i)});
  }
  std::vector<KnowledgeGraph::EdgeTriple> triples;
  {
    Rng rng(Rng::derive(seed, 11));
    std::set<std::tuple<std::size_t, std::size_t, std::size_t>> seen;
    while (triples.size() < 2 * entity_count) {
      const std::size_t h = rng.integer(entities.size());
      const std::size_t t = rng.integer(entities.size());
      const std::size_t r = rng.integer(kRelations.size());
      if (h == t || !seen.insert({h, r, t}).second) continue;
      triples.emplace_back(entities[h].id, kRelations[r], entities[t].id);
    }
  }
  fixture.kg = KnowledgeGraph::build(nodes, triples);

  Rng rng(Rng::derive(seed, 22));
  std::vector<DatasetEntry> entries;
  while (entries.size() < sentences) {
    const std::size_t h = rng.integer(entities.size());
    std::size_t t = rng.integer(entities.size());
    if (h == t) continue;
    RelationRow row;
    row.head_id = entities[h].id;
    row.head_name = entities[h].name;
    row.head_type = entities[h].type;
    row.tail_id = entities[t].id;
    row.tail_name = entities[t].name;
    row.tail_type = entities[t].type;
    row.relation_type = kRelations[rng.integer(kRelations.size())];
    auto generated = generate_entry(row, fixture.templates, rng.raw());
    if (generated.ambiguous) continue;
    fixture.rows.push_back(std::move(row));
    entries.push_back(std::move(generated.entry));
  }

  const std::size_t train_count = sentences * 4 / 5;
  fixture.train_entries.assign(entries.begin(), entries.begin() + train_count);
  fixture.heldout_entries.assign(entries.begin() + train_count, entries.end());
  return fixture;
}

KnowledgeGraph make_cycle_kg(std::size_t nodes) {
  std::vector<KgNode> node_list;
  std::vector<KnowledgeGraph::EdgeTriple> triples;
  for (std::size_t i = 0; i < nodes; ++i) {
    node_list.push_back({"C" + std::to_string(i), "Link",
                         "link node " + std::to_string(i)});
  }
  for (std::size_t i = 0; i < nodes; ++i) {
    triples.emplace_back("C" + std::to_string(i),
                         "next", "C" + std::to_string((i + 1) % nodes));
  }
  return KnowledgeGraph::build(std::move(node_list), triples);
}

GraphFixture make_two_cliques(std::size_t per_clique, std::size_t dim,
                              std::uint64_t seed) {
  GraphFixture fixture;
  const std::size_t total = 2 * per_clique;
  fixture.features.z = Matrix(total, dim);
  fixture.features.label_names = {"left", "right"};
  Rng rng(Rng::derive(seed, 33));
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t label = i < per_clique ? 0 : 1;
    fixture.features.labels.push_back(label);
    auto row = fixture.features.z.row(i);
    for (std::size_t j = 0; j < dim; ++j) {
      const double mean = (j < dim / 2) == (label == 0) ? 1.0 : 0.0;
      row[j] = mean + 0.4 * rng.gauss();
    }
  }
  for (std::size_t c = 0; c < 2; ++c) {
    const std::size_t base = c * per_clique;
    for (std::size_t i = 0; i < per_clique; ++i) {
      for (std::size_t j = i + 1; j < per_clique; ++j) {
        fixture.edges.push_back({base + i, 0, base + j});
      }
    }
  }
  return fixture;
}

GraphFixture make_random_label_graph(std::size_t nodes, std::size_t num_labels,
                                     std::size_t dim, std::uint64_t seed) {
  GraphFixture fixture;
  fixture.features.z = Matrix(nodes, dim);
  Rng rng(Rng::derive(seed, 44));
  for (std::size_t l = 0; l < num_labels; ++l) {
    fixture.features.label_names.push_back("label" + std::to_string(l));
  }
  for (std::size_t i = 0; i < nodes; ++i) {
    fixture.features.labels.push_back(rng.integer(num_labels));
    auto row = fixture.features.z.row(i);
    for (double& v : row) v = rng.gauss();
  }
  for (std::size_t e = 0; e < nodes; ++e) {
    const std::size_t h = rng.integer(nodes);
    const std::size_t t = rng.integer(nodes);
    if (h != t) fixture.edges.push_back({h, 0, t});
  }
  return fixture;
}

TeacherEmbedding build_fixture_teacher(const KnowledgeGraph& kg, std::uint64_t seed,
                                       std::size_t d_prime, std::size_t d_rel) {
  Vocab vocab;
  for (const auto& node : kg.nodes()) {
    for (const auto& tok : tokenize_text(node.description)) {
      vocab.add(tok);
    }
  }
  Matrix table(vocab.size(), d_prime);
  {
    Rng rng(Rng::derive(seed, 55));
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_prime));
    for (double& v : table.flat()) v = rng.gauss() * scale;
  }
  const auto features = encode_descriptions(kg, vocab, table);

  GnnConfig gnn_config;
  gnn_config.layers = 2;
  gnn_config.epochs = 120;
  gnn_config.learning_rate = 0.02;
  gnn_config.seed = Rng::derive(seed, 66);
  const auto gnn = pretrain_gnn(features, kg.edges(), gnn_config);

  const Matrix neighbor_means = neighbor_mean_matrix(kg.node_count(), kg.edges());
  const Matrix z_prop =
      propagate_features(features.z, neighbor_means, gnn.layer_weights);

  TransRConfig transr_config;
  transr_config.dim = d_rel;
  transr_config.epochs = 120;
  transr_config.negatives_per_positive = 2;
  transr_config.learning_rate = 0.02;
  transr_config.seed = Rng::derive(seed, 77);
  const auto transr = train_transr(kg, transr_config);

  return assemble_teacher(features.z, z_prop, transr.params.entities, kg.node_ids());
}

}  // namespace kgd::testing
