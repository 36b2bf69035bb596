#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgd/errors.hpp"

namespace kgd {

// ---------------------------------------------------------------------------
// Relation rows (the raw entity-pair input)

struct RelationRow {
  std::string head_id;
  std::string head_name;
  std::string tail_id;
  std::string tail_name;
  std::string relation_type;
  std::string head_type;
  std::string tail_type;
};

/// Delimiter-separated file with a header row naming the seven fields in any
/// order. Quoted fields ("" escapes a quote) are supported. Validates that
/// ids and cleaned names are non-empty and that each id maps to one name.
std::vector<RelationRow> read_relation_rows(std::istream& in, char delimiter = ',');
std::vector<RelationRow> read_relation_rows_file(const std::string& path,
                                                 char delimiter = ',');

/// Keeps index i with probability 1/rate_denominator, independently per row,
/// preserving order. Deterministic under seed.
std::vector<std::size_t> subsample_indices(std::size_t count,
                                           std::uint64_t rate_denominator,
                                           std::uint64_t seed);
std::vector<RelationRow> subsample_rows(const std::vector<RelationRow>& rows,
                                        std::uint64_t rate_denominator,
                                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dataset entries (JSON-lines corpus)

struct NerSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  std::string type;
  bool operator==(const NerSpan&) const = default;
};

struct KgeSpan {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  std::string node_id;
  bool operator==(const KgeSpan&) const = default;
};

struct DatasetEntry {
  std::vector<std::string> tokens;
  std::vector<NerSpan> ner;
  std::vector<KgeSpan> kge;
  bool operator==(const DatasetEntry&) const = default;
};

/// Returns a description of the first violated invariant, or nullopt.
std::optional<std::string> entry_violation(const DatasetEntry& entry);

/// Strict reader: throws DataError naming the offending line / entry index.
std::vector<DatasetEntry> read_dataset(std::istream& in);
std::vector<DatasetEntry> read_dataset_file(const std::string& path);

struct LenientReadResult {
  std::vector<DatasetEntry> entries;
  std::vector<std::string> errors;
};
/// Collects per-line errors instead of throwing; bad lines are skipped.
LenientReadResult read_dataset_lenient(std::istream& in);
LenientReadResult read_dataset_lenient_file(const std::string& path);

void write_dataset(const std::vector<DatasetEntry>& entries, std::ostream& out);
void write_dataset_file(const std::vector<DatasetEntry>& entries,
                        const std::string& path);

// ---------------------------------------------------------------------------
// Sentence templates

/// relation_type -> sentence skeletons, each containing exactly one HEAD and
/// one TAIL placeholder word.
class TemplateSet {
 public:
  static TemplateSet from_json(const nlohmann::json& j);
  static TemplateSet load_file(const std::string& path);

  bool has(const std::string& relation) const;
  const std::vector<std::string>& skeletons(const std::string& relation) const;
  std::vector<std::string> relations() const;

 private:
  std::vector<std::pair<std::string, std::vector<std::string>>> entries_;
};

// ---------------------------------------------------------------------------
// Span alignment

struct AlignEntity {
  std::string name;
  std::string type;
  std::string kg_id;
};

struct AlignErrorRecord {
  std::string text;                        // full joined text
  std::vector<std::string> search_tokens;  // what was looked for
  std::ptrdiff_t found_index = -1;         // -1: no match
};

struct AlignResult {
  std::vector<NerSpan> entity_spans;
  std::vector<KgeSpan> kges;
  std::vector<AlignErrorRecord> errors;
};

/// For each entity: tokenize its name and scan the text left-to-right for the
/// first contiguous token match. Misses produce a diagnostic error record and
/// processing continues; structurally empty entities are skipped silently.
AlignResult align_entry(const std::vector<std::string>& tokens,
                        const std::vector<AlignEntity>& entities);

// ---------------------------------------------------------------------------
// Entry generation

struct GeneratedEntry {
  DatasetEntry entry;
  /// Head and tail share a surface form, so first-occurrence matching mapped
  /// them to the same span; such entries are excluded from training sets.
  bool ambiguous = false;
};

/// Picks a skeleton (seeded), substitutes cleaned entity names, tokenizes and
/// aligns. The result always passes align_entry with zero error records.
GeneratedEntry generate_entry(const RelationRow& row, const TemplateSet& templates,
                              std::uint64_t seed);

}  // namespace kgd
