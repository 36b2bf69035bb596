#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "kgd/data.hpp"
#include "kgd/matrix.hpp"
#include "kgd/student.hpp"

namespace kgd {

struct Prediction {
  std::size_t start = 0;
  std::size_t end = 0;  // inclusive
  std::string type;
  double score = 0.0;
  bool operator==(const Prediction&) const = default;
};

/// Flat decoding: every valid span keeps its argmax type, candidates above
/// the threshold are selected greedily by descending score, skipping anything
/// that overlaps an already selected span. Ties break by earlier start, then
/// shorter width, then lexicographic type.
std::vector<Prediction> decode(const Matrix& phi, const SpanIndexSet& spans,
                               std::span<const std::string> type_names,
                               double threshold = 0.5);

struct TypeCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::map<std::string, TypeCounts> per_type;

  nlohmann::json to_json() const;
};

/// Exact (start, end, type) matching, micro-aggregated over the corpus.
/// Undefined precision/recall (zero denominator) is reported as 0.
MetricsReport micro_f1(const std::vector<std::vector<Prediction>>& predictions,
                       const std::vector<std::vector<NerSpan>>& gold);

struct EvalResult {
  MetricsReport metrics;
  std::size_t skipped_invalid = 0;
};

/// Eval-mode forward + decode + micro_f1. A pure function of the model,
/// data, type list, window and threshold; invalid entries are skipped and
/// counted.
EvalResult evaluate(StudentModel& model, const std::vector<DatasetEntry>& data,
                    std::span<const std::string> type_names, std::size_t window,
                    double threshold = 0.5);

}  // namespace kgd
