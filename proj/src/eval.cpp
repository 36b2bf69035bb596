#include "kgd/eval.hpp"

#include <algorithm>
#include <tuple>

namespace kgd {

namespace {

bool spans_overlap(std::size_t a_start, std::size_t a_end, std::size_t b_start,
                   std::size_t b_end) {
  return a_start <= b_end && b_start <= a_end;
}

void finalize(std::size_t tp, std::size_t fp, std::size_t fn, double& precision,
              double& recall, double& f1) {
  precision = tp + fp == 0 ? 0.0
                           : static_cast<double>(tp) / static_cast<double>(tp + fp);
  recall = tp + fn == 0 ? 0.0
                        : static_cast<double>(tp) / static_cast<double>(tp + fn);
  f1 = precision + recall == 0.0 ? 0.0
                                 : 2.0 * precision * recall / (precision + recall);
}

}  // namespace

std::vector<Prediction> decode(const Matrix& phi, const SpanIndexSet& spans,
                               std::span<const std::string> type_names,
                               double threshold) {
  if (threshold <= 0.0 || threshold >= 1.0) {
    throw ConfigError("decode: threshold must lie in (0, 1)");
  }
  if (phi.rows() != spans.spans.size() || phi.cols() != type_names.size()) {
    throw ShapeError("decode: phi is " + shape_str(phi) + ", expected " +
                     std::to_string(spans.spans.size()) + "x" +
                     std::to_string(type_names.size()));
  }

  std::vector<Prediction> candidates;
  for (std::size_t i = 0; i < spans.spans.size(); ++i) {
    if (!spans.valid[i]) continue;
    // argmax type per span; equal scores fall to the lexicographically
    // smaller type name for determinism.
    std::size_t best = 0;
    for (std::size_t b = 1; b < type_names.size(); ++b) {
      const double score = phi.at(i, b);
      if (score > phi.at(i, best) ||
          (score == phi.at(i, best) && type_names[b] < type_names[best])) {
        best = b;
      }
    }
    if (phi.at(i, best) > threshold) {
      candidates.push_back({spans.spans[i].first, spans.spans[i].second,
                            type_names[best], phi.at(i, best)});
    }
  }

  std::sort(candidates.begin(), candidates.end(),
            [](const Prediction& a, const Prediction& b) {
              const std::size_t a_width = a.end - a.start;
              const std::size_t b_width = b.end - b.start;
              return std::tie(b.score, a.start, a_width, a.type) <
                     std::tie(a.score, b.start, b_width, b.type);
            });

  std::vector<Prediction> selected;
  for (const auto& candidate : candidates) {
    const bool blocked = std::any_of(
        selected.begin(), selected.end(), [&](const Prediction& s) {
          return spans_overlap(candidate.start, candidate.end, s.start, s.end);
        });
    if (!blocked) {
      selected.push_back(candidate);
    }
  }
  std::sort(selected.begin(), selected.end(),
            [](const Prediction& a, const Prediction& b) {
              return std::tie(a.start, a.end, a.type) <
                     std::tie(b.start, b.end, b.type);
            });
  return selected;
}

MetricsReport micro_f1(const std::vector<std::vector<Prediction>>& predictions,
                       const std::vector<std::vector<NerSpan>>& gold) {
  if (predictions.size() != gold.size()) {
    throw DataError("micro_f1: " + std::to_string(predictions.size()) +
                    " prediction lists vs " + std::to_string(gold.size()) +
                    " gold lists");
  }
  MetricsReport report;
  for (std::size_t s = 0; s < predictions.size(); ++s) {
    std::map<std::tuple<std::size_t, std::size_t, std::string>, std::size_t> open;
    for (const auto& g : gold[s]) {
      ++open[{g.start, g.end, g.type}];
    }
    for (const auto& p : predictions[s]) {
      auto it = open.find({p.start, p.end, p.type});
      if (it != open.end() && it->second > 0) {
        --it->second;
        ++report.tp;
        ++report.per_type[p.type].tp;
      } else {
        ++report.fp;
        ++report.per_type[p.type].fp;
      }
    }
    for (const auto& [key, count] : open) {
      if (count > 0) {
        report.fn += count;
        report.per_type[std::get<2>(key)].fn += count;
      }
    }
  }
  finalize(report.tp, report.fp, report.fn, report.precision, report.recall,
           report.f1);
  for (auto& [_, counts] : report.per_type) {
    finalize(counts.tp, counts.fp, counts.fn, counts.precision, counts.recall,
             counts.f1);
  }
  return report;
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json per;
  for (const auto& [type, counts] : per_type) {
    per[type] = {{"tp", counts.tp},
                 {"fp", counts.fp},
                 {"fn", counts.fn},
                 {"precision", counts.precision},
                 {"recall", counts.recall},
                 {"f1", counts.f1}};
  }
  return {{"tp", tp},
          {"fp", fp},
          {"fn", fn},
          {"precision", precision},
          {"recall", recall},
          {"f1", f1},
          {"per_type", per}};
}

EvalResult evaluate(StudentModel& model, const std::vector<DatasetEntry>& data,
                    std::span<const std::string> type_names, std::size_t window,
                    double threshold) {
  const auto unique = dedup_preserving_order(type_names);
  EvalResult result;
  std::vector<std::vector<Prediction>> predictions;
  std::vector<std::vector<NerSpan>> gold;
  for (const auto& entry : data) {
    if (entry.tokens.empty() || entry_violation(entry)) {
      ++result.skipped_invalid;
      continue;
    }
    const auto spans = SpanIndexSet::enumerate(entry.tokens.size(), window);
    const Matrix phi = model.score_sentence(entry.tokens, unique, window);
    predictions.push_back(decode(phi, spans, unique, threshold));
    gold.push_back(entry.ner);
  }
  result.metrics = micro_f1(predictions, gold);
  return result;
}

}  // namespace kgd
