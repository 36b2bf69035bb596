#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kgd/matrix.hpp"

namespace kgd {

/// On-disk format shared by checkpoints, teacher embeddings and pretrained
/// teacher parts: one JSON header line followed by a raw little-endian
/// float64 payload. The header records a matrix manifest (name, rows, cols,
/// offset into the payload) plus an FNV-1a checksum of the payload bytes, so
/// truncation and corruption are both detected on read.
void write_blob_file(const std::string& path, nlohmann::json meta,
                     const std::vector<std::pair<std::string, const Matrix*>>& mats);

struct BlobFile {
  nlohmann::json meta;
  std::map<std::string, Matrix> matrices;
};

/// Throws IntegrityError on length/checksum mismatch, DataError on a
/// malformed header.
BlobFile read_blob_file(const std::string& path);

std::uint64_t fnv1a64(const void* data, std::size_t bytes);

}  // namespace kgd
