#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace kgd {

/// Token -> row-index mapping for embedding tables. Row 0 is the reserved
/// unknown token; lookups of unseen tokens land there.
class Vocab {
 public:
  static constexpr std::size_t kUnkId = 0;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocab();

  /// Inserts the token if new; returns its id either way.
  std::size_t add(const std::string& token);
  std::size_t id(const std::string& token) const;
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  std::size_t size() const { return tokens_.size(); }
  const std::string& token(std::size_t id) const { return tokens_.at(id); }

  /// FNV-1a over the token list; used to detect checkpoint/vocab drift.
  std::uint64_t fingerprint() const;

  nlohmann::json to_json() const;
  static Vocab from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace kgd
