#pragma once

#include <cstddef>
#include <vector>

#include "kgd/autodiff.hpp"
#include "kgd/data.hpp"
#include "kgd/student.hpp"
#include "kgd/teacher.hpp"

namespace kgd {

struct DistillPair {
  std::size_t span_position = 0;  // index into the raw span list
  std::size_t teacher_row = 0;
};

/// Matched (span, node) pairs for one sentence. Annotations that cannot be
/// used — spans wider than the window, node ids missing from the teacher —
/// are dropped and counted, never fatal.
struct DistillBatch {
  std::vector<DistillPair> pairs;
  std::size_t dropped_wide = 0;
  std::size_t dropped_unresolved = 0;
  std::size_t dropped() const { return dropped_wide + dropped_unresolved; }
};

DistillBatch build_distill_batch(const DatasetEntry& entry,
                                 const SpanIndexSet& spans,
                                 const TeacherEmbedding& teacher);

/// MSE between the two projections to the shared width m. Gradients reach the
/// student and both heads; teacher rows enter as a constant, so nothing flows
/// back into the teacher.
Var distill_loss(Tape& tape, StudentModel& model, Var span_subset, Var teacher_rows);

/// L = a_bce * L_lang + b_dist * L_dist. Weights (1, 1) recover the plain sum.
Var total_loss(Tape& tape, Var lang, Var dist, double a_bce, double b_dist);

}  // namespace kgd
