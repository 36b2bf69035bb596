#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kgd {

/// Whitespace split, then leading/trailing punctuation from the set .,;:()[]
/// is peeled off into separate tokens. Hyphens and interior punctuation are
/// kept. Idempotent: re-tokenizing the joined output is a fixed point.
std::vector<std::string> tokenize_text(std::string_view raw);

std::string join_tokens(std::span<const std::string> tokens);

/// Strips surrounding quotes/brackets and collapses internal whitespace runs
/// to single spaces.
std::string clean_entity_name(std::string_view raw);

}  // namespace kgd
