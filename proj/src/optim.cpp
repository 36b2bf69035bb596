#include "kgd/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kgd/errors.hpp"
#include "kgd/rng.hpp"

namespace kgd {

Matrix& ParamStore::create(const std::string& name, Matrix init) {
  if (has(name)) {
    throw ConfigError("ParamStore: parameter already exists: " + name);
  }
  if (!init.all_finite()) {
    throw NumericError("ParamStore: non-finite init for " + name);
  }
  Slot slot;
  slot.grad = Matrix(init.rows(), init.cols());
  slot.moment1 = Matrix(init.rows(), init.cols());
  slot.moment2 = Matrix(init.rows(), init.cols());
  slot.value = std::move(init);
  auto [it, _] = slots_.emplace(name, std::move(slot));
  return it->second.value;
}

ParamStore::Slot& ParamStore::slot(const std::string& name) {
  auto it = slots_.find(name);
  if (it == slots_.end()) {
    throw ConfigError("ParamStore: unknown parameter: " + name);
  }
  return it->second;
}

const ParamStore::Slot& ParamStore::slot(const std::string& name) const {
  auto it = slots_.find(name);
  if (it == slots_.end()) {
    throw ConfigError("ParamStore: unknown parameter: " + name);
  }
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, slot] : slots_) {
    slot.grad.fill(0.0);
  }
}

void ParamStore::adam_step(double rate, double beta1, double beta2, double eps) {
  ++steps_;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(steps_));
  for (auto& [_, slot] : slots_) {
    auto value = slot.value.flat();
    auto grad = slot.grad.flat();
    auto m1 = slot.moment1.flat();
    auto m2 = slot.moment2.flat();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m1[i] = beta1 * m1[i] + (1.0 - beta1) * g;
      m2[i] = beta2 * m2[i] + (1.0 - beta2) * g * g;
      const double mhat = m1[i] / bc1;
      const double vhat = m2[i] / bc2;
      value[i] -= rate * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(slots_.size());
  for (const auto& [name, _] : slots_) {
    out.push_back(name);
  }
  return out;
}

std::size_t ParamStore::coordinate_count() const {
  std::size_t n = 0;
  for (const auto& [_, slot] : slots_) {
    n += slot.value.size();
  }
  return n;
}

double lr_at(std::uint64_t step, const ScheduleConfig& cfg) {
  if (cfg.base_rate <= 0.0) {
    throw ConfigError("ScheduleConfig: base_rate must be positive");
  }
  if (cfg.total_steps == 0) {
    throw ConfigError("ScheduleConfig: total_steps must be >= 1");
  }
  if (cfg.warmup_ratio < 0.0 || cfg.warmup_ratio >= 1.0) {
    throw ConfigError("ScheduleConfig: warmup_ratio must lie in [0, 1)");
  }
  if (step > cfg.total_steps) {
    throw ConfigError("lr_at: step exceeds total_steps");
  }
  const auto warmup = static_cast<std::uint64_t>(
      cfg.warmup_ratio * static_cast<double>(cfg.total_steps));
  if (step < warmup) {
    return cfg.base_rate * static_cast<double>(step) / static_cast<double>(warmup);
  }
  const double progress = static_cast<double>(step - warmup) /
                          static_cast<double>(cfg.total_steps - warmup);
  return cfg.base_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

GradCheckReport grad_check(ParamStore& store,
                           const std::function<double()>& loss_fn, double eps,
                           std::size_t max_coords, std::uint64_t seed) {
  if (eps <= 0.0) {
    throw ConfigError("grad_check: eps must be positive");
  }

  store.zero_grad();
  const double base = loss_fn();
  if (!std::isfinite(base)) {
    throw NumericError("grad_check: non-finite loss at base point");
  }
  // Snapshot the analytic gradients before the finite-difference probes
  // overwrite them.
  std::map<std::string, Matrix> analytic;
  for (const auto& name : store.names()) {
    analytic.emplace(name, store.grad(name));
  }

  std::vector<std::pair<std::string, std::size_t>> coords;
  for (const auto& name : store.names()) {
    const std::size_t n = store.value(name).size();
    for (std::size_t i = 0; i < n; ++i) {
      coords.emplace_back(name, i);
    }
  }
  Rng rng(seed);
  if (coords.size() > max_coords) {
    // Partial Fisher-Yates: the first max_coords entries become the sample.
    for (std::size_t i = 0; i < max_coords; ++i) {
      const std::size_t j = i + rng.integer(coords.size() - i);
      std::swap(coords[i], coords[j]);
    }
    coords.resize(max_coords);
  }

  GradCheckReport report;
  for (const auto& [name, index] : coords) {
    double& theta = store.value(name).flat()[index];
    const double saved = theta;
    theta = saved + eps;
    const double plus = loss_fn();
    theta = saved - eps;
    const double minus = loss_fn();
    theta = saved;
    if (!std::isfinite(plus) || !std::isfinite(minus)) {
      throw NumericError("grad_check: non-finite loss while probing " + name);
    }
    const double numeric = (plus - minus) / (2.0 * eps);
    const double a = analytic.at(name).flat()[index];
    const double rel =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
    if (rel >= report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst_param = name;
      report.worst_index = index;
      report.worst_analytic = a;
      report.worst_numeric = numeric;
    }
    ++report.coords_checked;
  }
  store.zero_grad();
  return report;
}

}  // namespace kgd
