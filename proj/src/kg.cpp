#include "kgd/kg.hpp"

#include <fstream>
#include <sstream>

#include "kgd/errors.hpp"

namespace kgd {

namespace {

std::vector<std::string> split_simple(const std::string& line, char delimiter) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"' && current.empty()) {
      quoted = true;
    } else if (c == delimiter) {
      fields.push_back(std::move(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  fields.push_back(std::move(current));
  if (!fields.empty() && !fields.back().empty() && fields.back().back() == '\r') {
    fields.back().pop_back();
  }
  return fields;
}

}  // namespace

KnowledgeGraph KnowledgeGraph::build(std::vector<KgNode> nodes,
                                     const std::vector<EdgeTriple>& edge_triples) {
  KnowledgeGraph kg;
  kg.nodes_ = std::move(nodes);
  for (std::size_t i = 0; i < kg.nodes_.size(); ++i) {
    const auto& node = kg.nodes_[i];
    if (node.id.empty()) {
      throw DataError("kg: node " + std::to_string(i) + " has empty id");
    }
    if (node.description.empty()) {
      throw DataError("kg: node '" + node.id + "' has empty description");
    }
    if (node.type_label.empty()) {
      throw DataError("kg: node '" + node.id + "' has empty type label");
    }
    if (!kg.id_index_.emplace(node.id, i).second) {
      throw DataError("kg: duplicate node id '" + node.id + "'");
    }
  }
  std::unordered_map<std::string, std::size_t> relation_index;
  for (const auto& [head_id, relation, tail_id] : edge_triples) {
    const auto head = kg.node_index(head_id);
    if (!head) {
      throw DataError("kg: edge references unknown head '" + head_id + "'");
    }
    const auto tail = kg.node_index(tail_id);
    if (!tail) {
      throw DataError("kg: edge references unknown tail '" + tail_id + "'");
    }
    auto [it, inserted] = relation_index.emplace(relation, kg.relations_.size());
    if (inserted) {
      kg.relations_.push_back(relation);
    }
    kg.edges_.push_back({*head, it->second, *tail});
  }
  return kg;
}

KnowledgeGraph KnowledgeGraph::load(std::istream& nodes, std::istream& edges,
                                    char delimiter) {
  std::vector<KgNode> node_list;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(nodes, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_simple(line, delimiter);
    if (fields.size() != 3) {
      throw DataError("kg nodes: line " + std::to_string(line_no) +
                      ": expected node_id, type_label, description");
    }
    node_list.push_back({fields[0], fields[1], fields[2]});
  }
  std::vector<EdgeTriple> triples;
  line_no = 0;
  while (std::getline(edges, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_simple(line, delimiter);
    if (fields.size() != 3) {
      throw DataError("kg edges: line " + std::to_string(line_no) +
                      ": expected head_id, relation_type, tail_id");
    }
    triples.emplace_back(fields[0], fields[1], fields[2]);
  }
  return build(std::move(node_list), triples);
}

KnowledgeGraph KnowledgeGraph::load_files(const std::string& nodes_path,
                                          const std::string& edges_path,
                                          char delimiter) {
  std::ifstream nodes(nodes_path);
  if (!nodes) {
    throw DataError("cannot open file: " + nodes_path);
  }
  std::ifstream edges(edges_path);
  if (!edges) {
    throw DataError("cannot open file: " + edges_path);
  }
  return load(nodes, edges, delimiter);
}

std::optional<std::size_t> KnowledgeGraph::node_index(const std::string& id) const {
  auto it = id_index_.find(id);
  if (it == id_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> KnowledgeGraph::node_ids() const {
  std::vector<std::string> ids;
  ids.reserve(nodes_.size());
  for (const auto& node : nodes_) ids.push_back(node.id);
  return ids;
}

}  // namespace kgd
