#include "kgd/text.hpp"

#include <cctype>

namespace kgd {

namespace {

constexpr std::string_view kSplitPunct = ".,;:()[]";
constexpr std::string_view kSurround = "\"'()[]{}";

bool is_split_punct(char c) { return kSplitPunct.find(c) != std::string_view::npos; }

void emit_word(std::string_view word, std::vector<std::string>& out) {
  // Peel leading punctuation, remember trailing punctuation, keep the core.
  std::size_t begin = 0;
  while (begin < word.size() && is_split_punct(word[begin])) {
    out.emplace_back(1, word[begin]);
    ++begin;
  }
  std::size_t end = word.size();
  while (end > begin && is_split_punct(word[end - 1])) {
    --end;
  }
  if (end > begin) {
    out.emplace_back(word.substr(begin, end - begin));
  }
  for (std::size_t i = end; i < word.size(); ++i) {
    out.emplace_back(1, word[i]);
  }
}

}  // namespace

std::vector<std::string> tokenize_text(std::string_view raw) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < raw.size()) {
    while (i < raw.size() && std::isspace(static_cast<unsigned char>(raw[i]))) {
      ++i;
    }
    std::size_t start = i;
    while (i < raw.size() && !std::isspace(static_cast<unsigned char>(raw[i]))) {
      ++i;
    }
    if (i > start) {
      emit_word(raw.substr(start, i - start), out);
    }
  }
  return out;
}

std::string join_tokens(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string clean_entity_name(std::string_view raw) {
  std::size_t begin = 0;
  std::size_t end = raw.size();
  auto is_ws = [](char c) { return std::isspace(static_cast<unsigned char>(c)); };
  auto surround = [](char c) { return kSurround.find(c) != std::string_view::npos; };
  while (begin < end && (is_ws(raw[begin]) || surround(raw[begin]))) ++begin;
  while (end > begin && (is_ws(raw[end - 1]) || surround(raw[end - 1]))) --end;

  std::string out;
  bool pending_space = false;
  for (std::size_t i = begin; i < end; ++i) {
    if (is_ws(raw[i])) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(raw[i]);
  }
  return out;
}

}  // namespace kgd
