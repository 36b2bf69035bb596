#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgd/autodiff.hpp"
#include "kgd/data.hpp"
#include "kgd/matrix.hpp"
#include "kgd/optim.hpp"
#include "kgd/rng.hpp"
#include "kgd/vocab.hpp"

namespace kgd {

/// All spans of a T-token sentence under a width-w search window. The raw
/// list always has exactly T*w entries in (start-major, width-minor) order;
/// valid marks the spans whose inclusive end stays inside the sentence, and
/// only those enter losses and predictions.
struct SpanIndexSet {
  std::size_t token_count = 0;  // T
  std::size_t window = 0;       // w
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::vector<std::uint8_t> valid;
  std::size_t valid_count = 0;

  static SpanIndexSet enumerate(std::size_t token_count, std::size_t window);
  /// Raw-list position of (start, end); nullopt when the width exceeds the
  /// window or the span is out of range.
  std::optional<std::size_t> position_of(std::size_t start, std::size_t end) const;
};

std::vector<std::string> dedup_preserving_order(std::span<const std::string> names);

struct StudentDims {
  std::size_t embed_dim = 64;      // d: token embedding and FFN hidden width
  std::size_t distill_width = 58;  // m: shared projection width
  std::size_t teacher_width = 174; // r: teacher embedding width
  double dropout = 0.4;
};

/// Span-based bi-encoder: a trainable token table feeds both the sentence
/// side (span FFN over concatenated endpoints) and the label side (type FFN
/// over mean-pooled type-name tokens), scored by sigmoid inner products.
/// Arbitrary unseen type strings remain encodable through the shared table.
class StudentModel {
 public:
  StudentModel(Vocab vocab, StudentDims dims, std::uint64_t init_seed);

  Var embed_tokens(Tape& tape, std::span<const std::string> tokens, bool training,
                   Rng& dropout_rng);
  Var encode_types(Tape& tape, std::span<const std::string> type_names);
  Var span_representations(Tape& tape, Var token_reps, const SpanIndexSet& spans,
                           bool training, Rng& dropout_rng);
  /// phi[i][b] = sigmoid(dot(span_rep i, type_rep b)).
  Var match_scores(Tape& tape, Var span_reps, Var type_reps);
  Var project_spans(Tape& tape, Var span_subset);     // d -> m head
  Var project_teacher(Tape& tape, Var teacher_rows);  // r -> m head

  /// Eval-mode scores for one sentence (no dropout, deterministic).
  Matrix score_sentence(const std::vector<std::string>& tokens,
                        std::span<const std::string> type_names,
                        std::size_t window);

  const Vocab& vocab() const { return vocab_; }
  const StudentDims& dims() const { return dims_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

 private:
  Vocab vocab_;
  StudentDims dims_;
  ParamStore store_;
};

struct SpanLabels {
  Matrix labels;  // (T*w) x B, 1 at gold (span, type) pairs
  Matrix mask;    // (T*w) x B, valid spans broadcast over types
  std::size_t masked_count = 0;
  std::size_t positive_count = 0;
};

/// Gold ner spans become positives; all other valid (span, type) pairs are
/// negatives. Gold spans wider than the window cannot be represented and
/// must have been filtered upstream — they raise DataError here.
SpanLabels build_span_labels(const DatasetEntry& entry, const SpanIndexSet& spans,
                             std::span<const std::string> type_names);

/// Binary cross-entropy (sum form) over all masked-in (span, type) pairs.
Var language_loss(Tape& tape, Var scores, const SpanLabels& labels);

}  // namespace kgd
