#include "kgd/container.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "kgd/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "blob files are little-endian; big-endian hosts are unsupported");

namespace kgd {

std::uint64_t fnv1a64(const void* data, std::size_t bytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 1469598103934665603ULL;
  constexpr std::uint64_t kPrime = 1099511628211ULL;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= kPrime;
  }
  return h;
}

void write_blob_file(const std::string& path, nlohmann::json meta,
                     const std::vector<std::pair<std::string, const Matrix*>>& mats) {
  std::vector<double> payload;
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& [name, mat] : mats) {
    manifest.push_back({{"name", name},
                        {"rows", mat->rows()},
                        {"cols", mat->cols()},
                        {"offset", payload.size()}});
    payload.insert(payload.end(), mat->flat().begin(), mat->flat().end());
  }
  meta["matrices"] = std::move(manifest);
  meta["payload_doubles"] = payload.size();
  char checksum[19];
  std::snprintf(checksum, sizeof(checksum), "0x%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(payload.data(), payload.size() * sizeof(double))));
  meta["checksum"] = checksum;

  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError("cannot open file for writing: " + path);
  }
  out << meta.dump() << '\n';
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (!out) {
    throw DataError("write failed: " + path);
  }
}

BlobFile read_blob_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open file: " + path);
  }
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw DataError("blob file: missing header line: " + path);
  }
  BlobFile file;
  try {
    file.meta = nlohmann::json::parse(header_line);
  } catch (const std::exception& e) {
    throw DataError("blob file: bad header in " + path + ": " + e.what());
  }
  if (!file.meta.contains("matrices") || !file.meta.contains("payload_doubles") ||
      !file.meta.contains("checksum")) {
    throw DataError("blob file: header missing manifest fields: " + path);
  }

  const auto expected = file.meta["payload_doubles"].get<std::size_t>();
  std::vector<double> payload(expected);
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(expected * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != expected * sizeof(double)) {
    throw IntegrityError("blob file: truncated payload: " + path);
  }
  char trailing;
  if (in.read(&trailing, 1)) {
    throw IntegrityError("blob file: trailing bytes after payload: " + path);
  }

  char checksum[19];
  std::snprintf(checksum, sizeof(checksum), "0x%016llx",
                static_cast<unsigned long long>(
                    fnv1a64(payload.data(), payload.size() * sizeof(double))));
  if (file.meta["checksum"].get<std::string>() != checksum) {
    throw IntegrityError("blob file: checksum mismatch: " + path);
  }

  for (const auto& item : file.meta["matrices"]) {
    const auto name = item.at("name").get<std::string>();
    const auto rows = item.at("rows").get<std::size_t>();
    const auto cols = item.at("cols").get<std::size_t>();
    const auto offset = item.at("offset").get<std::size_t>();
    if (offset + rows * cols > payload.size()) {
      throw IntegrityError("blob file: manifest overruns payload: " + path);
    }
    Matrix m(rows, cols);
    std::memcpy(m.data(), payload.data() + offset, rows * cols * sizeof(double));
    file.matrices.emplace(name, std::move(m));
  }
  return file;
}

}  // namespace kgd
