#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

namespace kgd {

struct KgNode {
  std::string id;
  std::string type_label;
  std::string description;
};

struct KgEdge {
  std::size_t head = 0;
  std::size_t relation = 0;
  std::size_t tail = 0;
  bool operator==(const KgEdge&) const = default;
};

/// Typed nodes with text descriptions plus typed directed edges. Node ids are
/// unique, descriptions and type labels non-empty, edge endpoints resolved to
/// node indices and relation names interned first-seen.
class KnowledgeGraph {
 public:
  using EdgeTriple = std::tuple<std::string, std::string, std::string>;

  static KnowledgeGraph build(std::vector<KgNode> nodes,
                              const std::vector<EdgeTriple>& edge_triples);
  /// Nodes file rows: node_id, type_label, description.
  /// Edges file rows: head_id, relation_type, tail_id. No header rows.
  static KnowledgeGraph load(std::istream& nodes, std::istream& edges,
                             char delimiter = ',');
  static KnowledgeGraph load_files(const std::string& nodes_path,
                                   const std::string& edges_path,
                                   char delimiter = ',');

  const std::vector<KgNode>& nodes() const { return nodes_; }
  const std::vector<KgEdge>& edges() const { return edges_; }
  const std::vector<std::string>& relation_names() const { return relations_; }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t relation_count() const { return relations_.size(); }
  std::optional<std::size_t> node_index(const std::string& id) const;
  std::vector<std::string> node_ids() const;

 private:
  std::vector<KgNode> nodes_;
  std::vector<KgEdge> edges_;
  std::vector<std::string> relations_;
  std::unordered_map<std::string, std::size_t> id_index_;
};

}  // namespace kgd
