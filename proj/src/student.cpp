#include "kgd/student.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "kgd/text.hpp"

namespace kgd {

SpanIndexSet SpanIndexSet::enumerate(std::size_t token_count, std::size_t window) {
  if (token_count < 1 || window < 1) {
    throw ConfigError("SpanIndexSet: need token_count >= 1 and window >= 1");
  }
  SpanIndexSet set;
  set.token_count = token_count;
  set.window = window;
  set.spans.reserve(token_count * window);
  set.valid.reserve(token_count * window);
  for (std::size_t start = 0; start < token_count; ++start) {
    for (std::size_t width = 1; width <= window; ++width) {
      const std::size_t end = start + width - 1;
      set.spans.emplace_back(start, end);
      const bool ok = end < token_count;
      set.valid.push_back(ok ? 1 : 0);
      set.valid_count += ok ? 1 : 0;
    }
  }
  if (set.spans.size() != token_count * window) {
    throw NumericError("SpanIndexSet: raw span count invariant violated");
  }
  return set;
}

std::optional<std::size_t> SpanIndexSet::position_of(std::size_t start,
                                                     std::size_t end) const {
  if (end < start || end >= token_count) return std::nullopt;
  const std::size_t width = end - start + 1;
  if (width > window) return std::nullopt;
  return start * window + (width - 1);
}

std::vector<std::string> dedup_preserving_order(std::span<const std::string> names) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& name : names) {
    if (seen.insert(name).second) {
      out.push_back(name);
    }
  }
  return out;
}

namespace {

Matrix gauss_matrix(std::size_t rows, std::size_t cols, double scale, Rng& rng) {
  Matrix m(rows, cols);
  for (double& v : m.flat()) v = rng.gauss() * scale;
  return m;
}

double xavier(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace

StudentModel::StudentModel(Vocab vocab, StudentDims dims, std::uint64_t init_seed)
    : vocab_(std::move(vocab)), dims_(dims) {
  if (dims_.embed_dim == 0 || dims_.distill_width == 0 || dims_.teacher_width == 0) {
    throw ConfigError("StudentModel: all widths must be >= 1");
  }
  const std::size_t d = dims_.embed_dim;
  Rng rng(Rng::derive(init_seed, 0xE55));
  store_.create("embed.table",
                gauss_matrix(vocab_.size(), d, 1.0 / std::sqrt(double(d)), rng));
  store_.create("type_ffn.w1", gauss_matrix(d, d, xavier(d, d), rng));
  store_.create("type_ffn.b1", Matrix(1, d));
  store_.create("type_ffn.w2", gauss_matrix(d, d, xavier(d, d), rng));
  store_.create("type_ffn.b2", Matrix(1, d));
  store_.create("span_ffn.w1", gauss_matrix(2 * d, d, xavier(2 * d, d), rng));
  store_.create("span_ffn.b1", Matrix(1, d));
  store_.create("span_ffn.w2", gauss_matrix(d, d, xavier(d, d), rng));
  store_.create("span_ffn.b2", Matrix(1, d));
  store_.create("head.span.w",
                gauss_matrix(d, dims_.distill_width, xavier(d, dims_.distill_width), rng));
  store_.create("head.span.b", Matrix(1, dims_.distill_width));
  store_.create("head.dist.w",
                gauss_matrix(dims_.teacher_width, dims_.distill_width,
                             xavier(dims_.teacher_width, dims_.distill_width), rng));
  store_.create("head.dist.b", Matrix(1, dims_.distill_width));
}

Var StudentModel::embed_tokens(Tape& tape, std::span<const std::string> tokens,
                               bool training, Rng& dropout_rng) {
  if (tokens.empty()) {
    throw DataError("embed_tokens: empty token list");
  }
  std::vector<std::size_t> rows;
  rows.reserve(tokens.size());
  for (const auto& tok : tokens) {
    rows.push_back(vocab_.id(tok));
  }
  Var table = tape.param(store_, "embed.table");
  Var looked_up = tape.gather_rows(table, std::move(rows));
  return tape.dropout(looked_up, dims_.dropout, training, dropout_rng.raw());
}

Var StudentModel::encode_types(Tape& tape, std::span<const std::string> type_names) {
  const auto unique = dedup_preserving_order(type_names);
  if (unique.empty()) {
    throw DataError("encode_types: no type names");
  }
  std::vector<std::vector<std::size_t>> groups;
  groups.reserve(unique.size());
  for (const auto& name : unique) {
    const auto tokens = tokenize_text(name);
    std::vector<std::size_t> rows;
    for (const auto& tok : tokens) {
      rows.push_back(vocab_.id(tok));
    }
    if (rows.empty()) {
      rows.push_back(Vocab::kUnkId);  // whitespace-only name
    }
    groups.push_back(std::move(rows));
  }
  Var table = tape.param(store_, "embed.table");
  Var pooled = tape.segment_mean(table, std::move(groups));
  Var hidden = tape.relu(tape.linear(pooled, tape.param(store_, "type_ffn.w1"),
                                     tape.param(store_, "type_ffn.b1")));
  return tape.linear(hidden, tape.param(store_, "type_ffn.w2"),
                     tape.param(store_, "type_ffn.b2"));
}

Var StudentModel::span_representations(Tape& tape, Var token_reps,
                                       const SpanIndexSet& spans, bool training,
                                       Rng& dropout_rng) {
  const std::size_t t = tape.value(token_reps).rows();
  if (t != spans.token_count) {
    throw ShapeError("span_representations: span set built for " +
                     std::to_string(spans.token_count) + " tokens, got " +
                     std::to_string(t));
  }
  std::vector<std::size_t> starts;
  std::vector<std::size_t> ends;
  starts.reserve(spans.spans.size());
  ends.reserve(spans.spans.size());
  for (const auto& [p, q] : spans.spans) {
    starts.push_back(p);
    ends.push_back(std::min(q, t - 1));  // invalid spans are masked downstream
  }
  Var endpoints = tape.concat_cols(tape.gather_rows(token_reps, std::move(starts)),
                                   tape.gather_rows(token_reps, std::move(ends)));
  Var hidden = tape.relu(tape.linear(endpoints, tape.param(store_, "span_ffn.w1"),
                                     tape.param(store_, "span_ffn.b1")));
  hidden = tape.dropout(hidden, dims_.dropout, training, dropout_rng.raw());
  return tape.linear(hidden, tape.param(store_, "span_ffn.w2"),
                     tape.param(store_, "span_ffn.b2"));
}

Var StudentModel::match_scores(Tape& tape, Var span_reps, Var type_reps) {
  if (tape.value(span_reps).cols() != tape.value(type_reps).cols()) {
    throw ShapeError("match_scores: width mismatch, spans " +
                     shape_str(tape.value(span_reps)) + " vs types " +
                     shape_str(tape.value(type_reps)));
  }
  return tape.sigmoid(tape.matmul_nt(span_reps, type_reps));
}

Var StudentModel::project_spans(Tape& tape, Var span_subset) {
  return tape.linear(span_subset, tape.param(store_, "head.span.w"),
                     tape.param(store_, "head.span.b"));
}

Var StudentModel::project_teacher(Tape& tape, Var teacher_rows) {
  return tape.linear(teacher_rows, tape.param(store_, "head.dist.w"),
                     tape.param(store_, "head.dist.b"));
}

Matrix StudentModel::score_sentence(const std::vector<std::string>& tokens,
                                    std::span<const std::string> type_names,
                                    std::size_t window) {
  Tape tape;
  Rng no_dropout(0);
  const auto spans = SpanIndexSet::enumerate(tokens.size(), window);
  Var reps = embed_tokens(tape, tokens, /*training=*/false, no_dropout);
  Var span_reps = span_representations(tape, reps, spans, false, no_dropout);
  Var types = encode_types(tape, type_names);
  return tape.value(match_scores(tape, span_reps, types));
}

SpanLabels build_span_labels(const DatasetEntry& entry, const SpanIndexSet& spans,
                             std::span<const std::string> type_names) {
  SpanLabels out;
  const std::size_t num_spans = spans.spans.size();
  const std::size_t num_types = type_names.size();
  out.labels = Matrix(num_spans, num_types);
  out.mask = Matrix(num_spans, num_types);
  for (std::size_t i = 0; i < num_spans; ++i) {
    if (!spans.valid[i]) continue;
    for (std::size_t b = 0; b < num_types; ++b) {
      out.mask.at(i, b) = 1.0;
    }
    out.masked_count += num_types;
  }
  for (const auto& gold : entry.ner) {
    const auto pos = spans.position_of(gold.start, gold.end);
    if (!pos) {
      throw DataError("build_span_labels: gold span (" +
                      std::to_string(gold.start) + "," + std::to_string(gold.end) +
                      ") does not fit the window; filter wide entries upstream");
    }
    const auto type_it = std::find(type_names.begin(), type_names.end(), gold.type);
    if (type_it == type_names.end()) continue;  // type outside this label set
    const auto b = static_cast<std::size_t>(type_it - type_names.begin());
    if (out.labels.at(*pos, b) == 0.0) {
      out.labels.at(*pos, b) = 1.0;
      ++out.positive_count;
    }
  }
  return out;
}

Var language_loss(Tape& tape, Var scores, const SpanLabels& labels) {
  return tape.masked_bce(scores, labels.labels, labels.mask);
}

}  // namespace kgd
