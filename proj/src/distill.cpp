#include "kgd/distill.hpp"

namespace kgd {

DistillBatch build_distill_batch(const DatasetEntry& entry,
                                 const SpanIndexSet& spans,
                                 const TeacherEmbedding& teacher) {
  DistillBatch batch;
  for (const auto& kge : entry.kge) {
    const auto position = spans.position_of(kge.start, kge.end);
    if (!position) {
      ++batch.dropped_wide;
      continue;
    }
    const auto row = teacher.row_of(kge.node_id);
    if (!row) {
      ++batch.dropped_unresolved;
      continue;
    }
    batch.pairs.push_back({*position, *row});
  }
  return batch;
}

Var distill_loss(Tape& tape, StudentModel& model, Var span_subset,
                 Var teacher_rows) {
  return tape.mse(model.project_spans(tape, span_subset),
                  model.project_teacher(tape, teacher_rows));
}

Var total_loss(Tape& tape, Var lang, Var dist, double a_bce, double b_dist) {
  if (a_bce < 0.0 || b_dist < 0.0) {
    throw ConfigError("total_loss: loss weights must be non-negative");
  }
  return tape.add(tape.scale(lang, a_bce), tape.scale(dist, b_dist));
}

}  // namespace kgd
