#include "kgd/vocab.hpp"

#include "kgd/errors.hpp"

namespace kgd {

Vocab::Vocab() {
  tokens_.emplace_back(kUnkToken);
  index_.emplace(tokens_.back(), kUnkId);
}

std::size_t Vocab::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) {
    return it->second;
  }
  tokens_.push_back(token);
  index_.emplace(token, tokens_.size() - 1);
  return tokens_.size() - 1;
}

std::size_t Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

std::uint64_t Vocab::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  constexpr std::uint64_t kPrime = 1099511628211ULL;
  for (const auto& tok : tokens_) {
    for (unsigned char c : tok) {
      h ^= c;
      h *= kPrime;
    }
    h ^= 0xFF;  // token separator
    h *= kPrime;
  }
  return h;
}

nlohmann::json Vocab::to_json() const { return nlohmann::json(tokens_); }

Vocab Vocab::from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty() || j[0].get<std::string>() != kUnkToken) {
    throw IntegrityError("Vocab: malformed token list");
  }
  Vocab v;
  for (std::size_t i = 1; i < j.size(); ++i) {
    v.add(j[i].get<std::string>());
  }
  if (v.size() != j.size()) {
    throw IntegrityError("Vocab: duplicate tokens in stored list");
  }
  return v;
}

}  // namespace kgd
