#include "kgd/data.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "kgd/rng.hpp"
#include "kgd/text.hpp"

namespace kgd {

namespace {

std::vector<std::string> split_delimited(const std::string& line, char delimiter) {
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
  return fields;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') {
    line.pop_back();
  }
  return line;
}

const std::vector<std::string> kRowFields = {
    "head_entity_id", "head_entity_name", "tail_entity_id", "tail_entity_name",
    "relation_type",  "head_type",        "tail_type"};

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open file: " + path);
  }
  return in;
}

}  // namespace

std::vector<RelationRow> read_relation_rows(std::istream& in, char delimiter) {
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("relation rows: empty input, header row required");
  }
  const auto header = split_delimited(strip_cr(line), delimiter);
  std::unordered_map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    column[header[i]] = i;
  }
  for (const auto& field : kRowFields) {
    if (!column.count(field)) {
      throw DataError("relation rows: header is missing field '" + field + "'");
    }
  }

  std::vector<RelationRow> rows;
  std::unordered_map<std::string, std::string> id_to_name;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_delimited(line, delimiter);
    if (fields.size() != header.size()) {
      throw DataError("relation rows: line " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, header has " +
                      std::to_string(header.size()));
    }
    RelationRow row;
    row.head_id = fields[column.at("head_entity_id")];
    row.head_name = clean_entity_name(fields[column.at("head_entity_name")]);
    row.tail_id = fields[column.at("tail_entity_id")];
    row.tail_name = clean_entity_name(fields[column.at("tail_entity_name")]);
    row.relation_type = fields[column.at("relation_type")];
    row.head_type = fields[column.at("head_type")];
    row.tail_type = fields[column.at("tail_type")];
    if (row.head_id.empty() || row.tail_id.empty()) {
      throw DataError("relation rows: line " + std::to_string(line_no) +
                      ": empty entity id");
    }
    if (row.head_name.empty() || row.tail_name.empty()) {
      throw DataError("relation rows: line " + std::to_string(line_no) +
                      ": empty entity name after cleaning");
    }
    for (const auto& [id, name] :
         {std::pair{row.head_id, row.head_name}, {row.tail_id, row.tail_name}}) {
      auto [it, inserted] = id_to_name.emplace(id, name);
      if (!inserted && it->second != name) {
        throw DataError("relation rows: line " + std::to_string(line_no) + ": id '" +
                        id + "' maps to both '" + it->second + "' and '" + name + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<RelationRow> read_relation_rows_file(const std::string& path,
                                                 char delimiter) {
  auto in = open_input(path);
  return read_relation_rows(in, delimiter);
}

std::vector<std::size_t> subsample_indices(std::size_t count,
                                           std::uint64_t rate_denominator,
                                           std::uint64_t seed) {
  if (rate_denominator < 1) {
    throw ConfigError("subsample: rate_denominator must be >= 1");
  }
  std::vector<std::size_t> kept;
  Rng rng(seed);
  const double p = 1.0 / static_cast<double>(rate_denominator);
  for (std::size_t i = 0; i < count; ++i) {
    if (rng.uniform() < p) {
      kept.push_back(i);
    }
  }
  return kept;
}

std::vector<RelationRow> subsample_rows(const std::vector<RelationRow>& rows,
                                        std::uint64_t rate_denominator,
                                        std::uint64_t seed) {
  std::vector<RelationRow> kept;
  for (std::size_t i : subsample_indices(rows.size(), rate_denominator, seed)) {
    kept.push_back(rows[i]);
  }
  return kept;
}

std::optional<std::string> entry_violation(const DatasetEntry& entry) {
  const std::size_t t = entry.tokens.size();
  for (std::size_t i = 0; i < entry.ner.size(); ++i) {
    const auto& span = entry.ner[i];
    if (span.start > span.end || span.end >= t) {
      return "ner span " + std::to_string(i) + " (" + std::to_string(span.start) +
             "," + std::to_string(span.end) + ") out of range for " +
             std::to_string(t) + " tokens";
    }
    if (span.type.empty()) {
      return "ner span " + std::to_string(i) + " has empty type";
    }
  }
  for (std::size_t i = 0; i < entry.kge.size(); ++i) {
    const auto& span = entry.kge[i];
    if (span.start > span.end || span.end >= t) {
      return "kge span " + std::to_string(i) + " (" + std::to_string(span.start) +
             "," + std::to_string(span.end) + ") out of range for " +
             std::to_string(t) + " tokens";
    }
    if (span.node_id.empty()) {
      return "kge span " + std::to_string(i) + " has empty node id";
    }
    const bool matched =
        std::any_of(entry.ner.begin(), entry.ner.end(), [&](const NerSpan& n) {
          return n.start == span.start && n.end == span.end;
        });
    if (!matched) {
      return "kge span " + std::to_string(i) +
             " does not coincide with any ner span";
    }
  }
  return std::nullopt;
}

namespace {

DatasetEntry entry_from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw DataError("expected a JSON object");
  }
  DatasetEntry entry;
  if (!j.contains("tokenized_text") || !j["tokenized_text"].is_array()) {
    throw DataError("missing 'tokenized_text' array");
  }
  for (const auto& tok : j["tokenized_text"]) {
    entry.tokens.push_back(tok.get<std::string>());
  }
  auto read_span = [](const nlohmann::json& item, const char* what) {
    if (!item.is_array() || item.size() != 3 || !item[0].is_number_integer() ||
        !item[1].is_number_integer() || !item[2].is_string()) {
      throw DataError(std::string("malformed ") + what +
                      " item, expected [start, end, string]");
    }
    const auto start = item[0].get<std::int64_t>();
    const auto end = item[1].get<std::int64_t>();
    if (start < 0 || end < 0) {
      throw DataError(std::string(what) + " span has negative index");
    }
    return std::pair<std::size_t, std::size_t>(static_cast<std::size_t>(start),
                                               static_cast<std::size_t>(end));
  };
  if (j.contains("ner")) {
    for (const auto& item : j["ner"]) {
      auto [start, end] = read_span(item, "ner");
      entry.ner.push_back({start, end, item[2].get<std::string>()});
    }
  }
  if (j.contains("kge")) {
    for (const auto& item : j["kge"]) {
      auto [start, end] = read_span(item, "kge");
      entry.kge.push_back({start, end, item[2].get<std::string>()});
    }
  }
  return entry;
}

nlohmann::json entry_to_json(const DatasetEntry& entry) {
  nlohmann::json j;
  j["tokenized_text"] = entry.tokens;
  auto& ner = j["ner"] = nlohmann::json::array();
  for (const auto& span : entry.ner) {
    ner.push_back({span.start, span.end, span.type});
  }
  auto& kge = j["kge"] = nlohmann::json::array();
  for (const auto& span : entry.kge) {
    kge.push_back({span.start, span.end, span.node_id});
  }
  return j;
}

template <typename OnError>
std::vector<DatasetEntry> read_dataset_impl(std::istream& in, OnError&& on_error) {
  std::vector<DatasetEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    DatasetEntry entry;
    try {
      const auto j = nlohmann::json::parse(line);
      entry = entry_from_json(j);
    } catch (const std::exception& e) {
      on_error("line " + std::to_string(line_no) + ": " + e.what());
      continue;
    }
    if (auto violation = entry_violation(entry)) {
      on_error("entry " + std::to_string(entries.size()) + " (line " +
               std::to_string(line_no) + "): " + *violation);
      continue;
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace

std::vector<DatasetEntry> read_dataset(std::istream& in) {
  return read_dataset_impl(
      in, [](const std::string& msg) { throw DataError("dataset: " + msg); });
}

std::vector<DatasetEntry> read_dataset_file(const std::string& path) {
  auto in = open_input(path);
  return read_dataset(in);
}

LenientReadResult read_dataset_lenient(std::istream& in) {
  LenientReadResult result;
  result.entries = read_dataset_impl(
      in, [&](const std::string& msg) { result.errors.push_back(msg); });
  return result;
}

LenientReadResult read_dataset_lenient_file(const std::string& path) {
  auto in = open_input(path);
  return read_dataset_lenient(in);
}

void write_dataset(const std::vector<DatasetEntry>& entries, std::ostream& out) {
  for (const auto& entry : entries) {
    out << entry_to_json(entry).dump() << '\n';
  }
}

void write_dataset_file(const std::vector<DatasetEntry>& entries,
                        const std::string& path) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot open file for writing: " + path);
  }
  write_dataset(entries, out);
}

TemplateSet TemplateSet::from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw DataError("templates: expected an object of relation -> skeleton list");
  }
  TemplateSet set;
  for (const auto& [relation, skeletons] : j.items()) {
    if (!skeletons.is_array() || skeletons.empty()) {
      throw DataError("templates: relation '" + relation +
                      "' needs a non-empty skeleton array");
    }
    std::vector<std::string> list;
    for (const auto& skeleton : skeletons) {
      const auto text = skeleton.get<std::string>();
      std::size_t heads = 0;
      std::size_t tails = 0;
      std::istringstream words(text);
      std::string word;
      while (words >> word) {
        if (word == "HEAD") ++heads;
        if (word == "TAIL") ++tails;
      }
      if (heads != 1 || tails != 1) {
        throw DataError("templates: skeleton '" + text +
                        "' must contain exactly one HEAD and one TAIL");
      }
      list.push_back(text);
    }
    set.entries_.emplace_back(relation, std::move(list));
  }
  return set;
}

TemplateSet TemplateSet::load_file(const std::string& path) {
  auto in = open_input(path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("templates: " + path + ": " + e.what());
  }
  return from_json(j);
}

bool TemplateSet::has(const std::string& relation) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const auto& e) { return e.first == relation; });
}

const std::vector<std::string>& TemplateSet::skeletons(
    const std::string& relation) const {
  for (const auto& [rel, list] : entries_) {
    if (rel == relation) return list;
  }
  throw DataError("templates: no skeletons for relation '" + relation + "'");
}

std::vector<std::string> TemplateSet::relations() const {
  std::vector<std::string> out;
  for (const auto& [rel, _] : entries_) out.push_back(rel);
  return out;
}

AlignResult align_entry(const std::vector<std::string>& tokens,
                        const std::vector<AlignEntity>& entities) {
  AlignResult result;
  for (const auto& entity : entities) {
    // Structural problems are skipped without a record.
    if (entity.name.empty() || entity.type.empty() || entity.kg_id.empty()) {
      continue;
    }
    const auto search = tokenize_text(entity.name);
    if (search.empty()) {
      continue;
    }
    std::ptrdiff_t found = -1;
    if (search.size() <= tokens.size()) {
      for (std::size_t start = 0; start + search.size() <= tokens.size(); ++start) {
        if (std::equal(search.begin(), search.end(), tokens.begin() + start)) {
          found = static_cast<std::ptrdiff_t>(start);
          break;
        }
      }
    }
    if (found < 0) {
      result.errors.push_back({join_tokens(tokens), search, -1});
      continue;
    }
    const auto start = static_cast<std::size_t>(found);
    const std::size_t end = start + search.size() - 1;
    result.entity_spans.push_back({start, end, entity.type});
    result.kges.push_back({start, end, entity.kg_id});
  }
  return result;
}

GeneratedEntry generate_entry(const RelationRow& row, const TemplateSet& templates,
                              std::uint64_t seed) {
  if (!templates.has(row.relation_type)) {
    throw DataError("generate_entry: no template for relation '" +
                    row.relation_type + "'");
  }
  const auto& skeletons = templates.skeletons(row.relation_type);
  Rng rng(seed);
  const auto& skeleton = skeletons[rng.integer(skeletons.size())];

  const std::string head = clean_entity_name(row.head_name);
  const std::string tail = clean_entity_name(row.tail_name);
  if (head.empty() || tail.empty()) {
    throw DataError("generate_entry: empty entity name after cleaning");
  }

  std::string sentence;
  std::istringstream words(skeleton);
  std::string word;
  while (words >> word) {
    if (!sentence.empty()) sentence.push_back(' ');
    if (word == "HEAD") {
      sentence += head;
    } else if (word == "TAIL") {
      sentence += tail;
    } else {
      sentence += word;
    }
  }

  GeneratedEntry out;
  out.entry.tokens = tokenize_text(sentence);
  const std::vector<AlignEntity> entities = {
      {head, row.head_type, row.head_id},
      {tail, row.tail_type, row.tail_id},
  };
  auto aligned = align_entry(out.entry.tokens, entities);
  if (!aligned.errors.empty() || aligned.entity_spans.size() != entities.size()) {
    throw DataError("generate_entry: alignment failed for relation '" +
                    row.relation_type + "' (" + sentence + ")");
  }
  out.entry.ner = std::move(aligned.entity_spans);
  out.entry.kge = std::move(aligned.kges);
  out.ambiguous = out.entry.ner[0].start == out.entry.ner[1].start &&
                  out.entry.ner[0].end == out.entry.ner[1].end;
  return out;
}

}  // namespace kgd
