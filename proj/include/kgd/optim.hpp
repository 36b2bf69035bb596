#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "kgd/matrix.hpp"

namespace kgd {

/// Named parameter bag: values, gradient accumulators, and first/second
/// optimizer moments, all shape-locked together. Owned by exactly one
/// training loop at a time; no internal locking.
class ParamStore {
 public:
  Matrix& create(const std::string& name, Matrix init);
  bool has(const std::string& name) const { return slots_.count(name) != 0; }

  Matrix& value(const std::string& name) { return slot(name).value; }
  const Matrix& value(const std::string& name) const { return slot(name).value; }
  Matrix& grad(const std::string& name) { return slot(name).grad; }
  const Matrix& grad(const std::string& name) const { return slot(name).grad; }

  void zero_grad();

  /// Adaptive-moment update with bias correction over every parameter.
  /// Gradients are left intact; call zero_grad() before the next backward.
  void adam_step(double rate, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);

  std::uint64_t step_count() const { return steps_; }
  std::vector<std::string> names() const;
  std::size_t coordinate_count() const;

 private:
  struct Slot {
    Matrix value;
    Matrix grad;
    Matrix moment1;
    Matrix moment2;
  };
  Slot& slot(const std::string& name);
  const Slot& slot(const std::string& name) const;

  std::map<std::string, Slot> slots_;  // ordered: deterministic iteration
  std::uint64_t steps_ = 0;
};

/// Linear warmup from 0 to base_rate over floor(warmup_ratio * total_steps)
/// steps, then cosine decay to exactly 0 at total_steps.
struct ScheduleConfig {
  double base_rate = 1e-3;
  std::uint64_t total_steps = 1;
  double warmup_ratio = 0.1;
};

double lr_at(std::uint64_t step, const ScheduleConfig& cfg);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::size_t coords_checked = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares analytic gradients with central differences on a random sample of
/// parameter coordinates. loss_fn must recompute the loss from the current
/// store values and accumulate gradients into the store on every call; it has
/// to be deterministic (dropout off or seed-pinned). Store gradients are
/// zeroed on entry and left zeroed on exit.
GradCheckReport grad_check(ParamStore& store,
                           const std::function<double()>& loss_fn,
                           double eps = 1e-5, std::size_t max_coords = 200,
                           std::uint64_t seed = 0);

}  // namespace kgd
