#include "kgd/teacher.hpp"

#include "kgd/container.hpp"
#include "kgd/errors.hpp"

namespace kgd {

TeacherEmbedding::TeacherEmbedding(Matrix h, std::size_t d_text, std::size_t d_prop,
                                   std::size_t d_rel,
                                   std::vector<std::string> node_ids)
    : h_(std::move(h)),
      d_text_(d_text),
      d_prop_(d_prop),
      d_rel_(d_rel),
      node_ids_(std::move(node_ids)) {
  if (h_.cols() != d_text_ + d_prop_ + d_rel_) {
    throw ShapeError("TeacherEmbedding: H has " + std::to_string(h_.cols()) +
                     " columns, blocks sum to " +
                     std::to_string(d_text_ + d_prop_ + d_rel_));
  }
  if (d_text_ != d_prop_) {
    throw ShapeError("TeacherEmbedding: textual and propagated widths differ (" +
                     std::to_string(d_text_) + " vs " + std::to_string(d_prop_) +
                     "); r = 2d' + d'' requires them equal");
  }
  if (node_ids_.size() != h_.rows()) {
    throw ShapeError("TeacherEmbedding: " + std::to_string(node_ids_.size()) +
                     " node ids for " + std::to_string(h_.rows()) + " rows");
  }
  if (!h_.all_finite()) {
    throw NumericError("TeacherEmbedding: non-finite entries in H");
  }
  for (std::size_t i = 0; i < node_ids_.size(); ++i) {
    if (!id_index_.emplace(node_ids_[i], i).second) {
      throw DataError("TeacherEmbedding: duplicate node id '" + node_ids_[i] + "'");
    }
  }
}

Matrix TeacherEmbedding::slice(Block block) const {
  Matrix out(h_.rows(), block.end - block.begin);
  for (std::size_t i = 0; i < h_.rows(); ++i) {
    auto src = h_.row(i);
    auto dst = out.row(i);
    std::copy(src.begin() + block.begin, src.begin() + block.end, dst.begin());
  }
  return out;
}

std::optional<std::size_t> TeacherEmbedding::row_of(const std::string& node_id) const {
  auto it = id_index_.find(node_id);
  if (it == id_index_.end()) return std::nullopt;
  return it->second;
}

TeacherEmbedding assemble_teacher(const Matrix& z, const Matrix& z_prop,
                                  const Matrix& z_rel,
                                  std::vector<std::string> node_ids) {
  if (z.rows() != z_prop.rows() || z.rows() != z_rel.rows()) {
    throw ShapeError("assemble_teacher: row counts disagree, Z " + shape_str(z) +
                     ", Z' " + shape_str(z_prop) + ", Z'' " + shape_str(z_rel));
  }
  if (z.cols() != z_prop.cols()) {
    throw ShapeError("assemble_teacher: Z and Z' widths disagree, " + shape_str(z) +
                     " vs " + shape_str(z_prop));
  }
  Matrix h = concat_cols(concat_cols(z, z_prop), z_rel);
  return TeacherEmbedding(std::move(h), z.cols(), z_prop.cols(), z_rel.cols(),
                          std::move(node_ids));
}

void save_teacher(const TeacherEmbedding& teacher, const std::string& path) {
  nlohmann::json meta;
  meta["format"] = "kgd-teacher";
  meta["version"] = 1;
  meta["node_count"] = teacher.node_count();
  meta["d_text"] = teacher.d_text();
  meta["d_prop"] = teacher.d_prop();
  meta["d_rel"] = teacher.d_rel();
  meta["blocks"] = {
      {"text", {teacher.text_block().begin, teacher.text_block().end}},
      {"prop", {teacher.prop_block().begin, teacher.prop_block().end}},
      {"rel", {teacher.rel_block().begin, teacher.rel_block().end}},
  };
  meta["node_ids"] = teacher.node_ids();
  const Matrix& h = teacher.h();
  write_blob_file(path, std::move(meta), {{"h", &h}});
}

TeacherEmbedding load_teacher(const std::string& path) {
  BlobFile file = read_blob_file(path);
  if (!file.meta.contains("format") ||
      file.meta["format"].get<std::string>() != "kgd-teacher") {
    throw DataError("load_teacher: '" + path + "' is not a teacher file");
  }
  auto it = file.matrices.find("h");
  if (it == file.matrices.end()) {
    throw IntegrityError("load_teacher: missing matrix 'h' in " + path);
  }
  std::vector<std::string> node_ids =
      file.meta.at("node_ids").get<std::vector<std::string>>();
  return TeacherEmbedding(std::move(it->second),
                          file.meta.at("d_text").get<std::size_t>(),
                          file.meta.at("d_prop").get<std::size_t>(),
                          file.meta.at("d_rel").get<std::size_t>(),
                          std::move(node_ids));
}

}  // namespace kgd
