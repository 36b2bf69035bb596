#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgd/matrix.hpp"

namespace kgd {

/// Per-node concatenation H = [Z | Z' | Z''] of textual, propagated and
/// relational vectors, width r = 2·d' + d''. Block boundaries are recorded at
/// construction and immutable afterwards.
class TeacherEmbedding {
 public:
  struct Block {
    std::size_t begin = 0;
    std::size_t end = 0;  // exclusive
  };

  TeacherEmbedding(Matrix h, std::size_t d_text, std::size_t d_prop,
                   std::size_t d_rel, std::vector<std::string> node_ids);

  const Matrix& h() const { return h_; }
  std::size_t node_count() const { return h_.rows(); }
  std::size_t width() const { return h_.cols(); }  // r
  std::size_t d_text() const { return d_text_; }
  std::size_t d_prop() const { return d_prop_; }
  std::size_t d_rel() const { return d_rel_; }

  Block text_block() const { return {0, d_text_}; }
  Block prop_block() const { return {d_text_, d_text_ + d_prop_}; }
  Block rel_block() const { return {d_text_ + d_prop_, d_text_ + d_prop_ + d_rel_}; }
  Matrix slice(Block block) const;

  std::optional<std::size_t> row_of(const std::string& node_id) const;
  const std::vector<std::string>& node_ids() const { return node_ids_; }

 private:
  Matrix h_;
  std::size_t d_text_;
  std::size_t d_prop_;
  std::size_t d_rel_;
  std::vector<std::string> node_ids_;
  std::unordered_map<std::string, std::size_t> id_index_;
};

/// Column-wise concatenation in the order Z, Z', Z''. Z and Z' must share
/// width; the r = 2d' + d'' identity is checked on the result.
TeacherEmbedding assemble_teacher(const Matrix& z, const Matrix& z_prop,
                                  const Matrix& z_rel,
                                  std::vector<std::string> node_ids);

void save_teacher(const TeacherEmbedding& teacher, const std::string& path);
TeacherEmbedding load_teacher(const std::string& path);

}  // namespace kgd
