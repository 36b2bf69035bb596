#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgd/data.hpp"
#include "kgd/student.hpp"
#include "kgd/teacher.hpp"

namespace kgd {

/// Run configuration. Defaults are the desk-scale values; the full-scale
/// reference configuration uses hidden_size 512 and 10000 steps.
struct TrainConfig {
  std::size_t max_span_width = 8;  // w
  std::size_t hidden_size = 64;    // d
  std::size_t kg_hidden = 58;      // d'
  double dropout = 0.4;
  std::size_t steps = 2000;
  std::size_t batch = 8;
  double warmup_ratio = 0.1;
  std::string schedule = "cosine";
  double loss_a_bce = 0.8;
  double loss_b_dist = 0.2;
  double loss_a_cls = -1.0;  // recorded for config parity; never applied
  std::size_t distill_width = 58;  // m
  double learning_rate = 3e-3;
  std::uint64_t seed = 1;
  std::size_t checkpoint_interval = 0;  // 0: final checkpoint only

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing keys keep their defaults; unknown keys raise ConfigError.
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainStepRow {
  std::size_t step = 0;
  double lr = 0.0;
  double loss_lang = 0.0;   // per masked-in (span, type) pair
  double loss_dist = 0.0;   // mean over matched pairs and projection dims
  double loss_total = 0.0;  // weighted combination
};

struct TrainReport {
  std::vector<TrainStepRow> rows;  // exactly `steps` rows
  std::string checkpoint_path;
  double wall_seconds = 0.0;
  std::size_t excluded_wide = 0;       // entries with gold spans wider than w
  std::size_t excluded_empty = 0;      // entries without tokens
  std::size_t dropped_kge_pairs = 0;   // unusable kge annotations seen in batches
  std::vector<std::string> type_names;

  void write_csv(std::ostream& out) const;
  nlohmann::json summary() const;
};

struct TrainOutcome {
  StudentModel model;
  TrainReport report;
};

/// Seeded, single-threaded training loop: per step, sample a batch of
/// sentences, combine the batch-averaged language loss with the concatenated
/// distillation loss, backprop, adam at lr_at(step). Bit-reproducible under a
/// fixed config+seed. A non-finite loss aborts with a diagnostic NumericError
/// naming the offending batch and the last saved checkpoint.
TrainOutcome train(const std::vector<DatasetEntry>& data,
                   const TeacherEmbedding& teacher, const TrainConfig& config,
                   const std::string& checkpoint_path);

void save_checkpoint(const StudentModel& model, const TrainConfig& config,
                     const std::vector<std::string>& type_names,
                     const std::string& path);

struct Checkpoint {
  StudentModel model;
  TrainConfig config;
  std::vector<std::string> type_names;
};

/// Restores a checkpoint. When `expected` is given, a different hidden size,
/// span window, distill width or vocab fingerprint is a hard error; other
/// config drift is reported on stderr.
Checkpoint load_checkpoint(const std::string& path,
                           const TrainConfig* expected = nullptr);

}  // namespace kgd
