#include <cmath>
#include <limits>

#include "doctest.h"
#include "kgd/autodiff.hpp"
#include "kgd/optim.hpp"
#include "kgd/rng.hpp"
#include "support/oracles.hpp"

using namespace kgd;

TEST_CASE("param store enforces shape discipline and exact zeroing") {
  ParamStore store;
  store.create("w", Matrix(2, 3, 1.0));
  CHECK_THROWS_AS(store.create("w", Matrix(2, 3)), ConfigError);
  CHECK_THROWS_AS(store.value("missing"), ConfigError);
  store.grad("w").at(1, 2) = 5.0;
  store.zero_grad();
  for (double v : store.grad("w").flat()) {
    CHECK(v == 0.0);
  }
  CHECK(store.coordinate_count() == 6);
}

TEST_CASE("adam with zero gradients is a no-op on fresh moments") {
  ParamStore store;
  store.create("w", Matrix(2, 2, 1.5));
  store.adam_step(0.1);
  for (double v : store.value("w").flat()) {
    CHECK(v == 1.5);
  }
  CHECK(store.step_count() == 1);
}

TEST_CASE("first adam step with constant gradient moves by about the rate") {
  ParamStore store;
  store.create("w", Matrix(1, 1, 0.0));
  store.grad("w").at(0, 0) = 1.0;
  store.adam_step(0.01);
  // Bias correction makes the first update rate * g/(|g| + eps') ≈ rate.
  CHECK(store.value("w").at(0, 0) == doctest::Approx(-0.01).epsilon(1e-3));
}

TEST_CASE("adam on f(w)=w^2 matches the scalar simulation and decreases |w|") {
  ParamStore store;
  store.create("w", Matrix(1, 1, 1.0));
  kgd::testing::ScalarAdam oracle;
  double oracle_w = 1.0;
  double prev = 1.0;
  for (int step = 0; step < 10; ++step) {
    store.zero_grad();
    const double w = store.value("w").at(0, 0);
    store.grad("w").at(0, 0) = 2.0 * w;
    store.adam_step(0.1);
    oracle_w = oracle.step(oracle_w, 2.0 * oracle_w, 0.1);
    const double now = store.value("w").at(0, 0);
    CHECK(now == doctest::Approx(oracle_w).epsilon(1e-12));
    CHECK(std::abs(now) < std::abs(prev));
    prev = now;
  }
  // Gradients survive the step until explicitly zeroed.
  CHECK(store.grad("w").at(0, 0) != 0.0);
}

TEST_CASE("warmup-cosine schedule endpoints and continuity") {
  ScheduleConfig cfg{1e-3, 1000, 0.1};
  CHECK(lr_at(0, cfg) == 0.0);
  CHECK(lr_at(100, cfg) == doctest::Approx(1e-3).epsilon(1e-15));
  CHECK(lr_at(1000, cfg) == doctest::Approx(0.0).epsilon(1e-12));
  // Continuity at the boundary and non-negativity everywhere.
  CHECK(lr_at(99, cfg) == doctest::Approx(1e-3 * 99.0 / 100.0));
  CHECK(std::abs(lr_at(100, cfg) - lr_at(101, cfg)) < 1e-5 * cfg.base_rate + 1e-8);
  for (std::uint64_t step = 0; step <= 1000; step += 7) {
    CHECK(lr_at(step, cfg) >= 0.0);
    CHECK(lr_at(step, cfg) <= cfg.base_rate);
  }
  CHECK_THROWS_AS(lr_at(1001, cfg), ConfigError);
  CHECK_THROWS_AS(lr_at(0, ScheduleConfig{1e-3, 100, 1.0}), ConfigError);
  // Zero warmup starts directly at the base rate.
  CHECK(lr_at(0, ScheduleConfig{1e-3, 100, 0.0}) == doctest::Approx(1e-3));
}

TEST_CASE("grad_check on sum of squares and on a constant loss") {
  ParamStore store;
  store.create("theta", Matrix(1, 1, 3.0));
  auto quadratic = [&]() {
    Tape tape;
    Var theta = tape.param(store, "theta");
    Var loss = tape.sum_all(tape.mul(theta, theta));
    tape.backward(loss);
    return tape.scalar(loss);
  };
  const auto report = grad_check(store, quadratic, 1e-5, 16, 1);
  CHECK(report.coords_checked == 1);
  CHECK(report.worst_analytic == doctest::Approx(6.0).epsilon(1e-10));
  CHECK(report.max_rel_err < 1e-8);

  auto constant = [&]() {
    Tape tape;
    Var loss = tape.constant(Matrix(1, 1, 5.0));
    tape.backward(loss);
    return tape.scalar(loss);
  };
  CHECK(grad_check(store, constant, 1e-5, 16, 1).max_rel_err == 0.0);
}

TEST_CASE("grad_check flags non-finite losses") {
  ParamStore store;
  store.create("theta", Matrix(1, 1, 1.0));
  auto bad = [&]() { return std::numeric_limits<double>::quiet_NaN(); };
  CHECK_THROWS_AS(grad_check(store, bad, 1e-5, 4, 1), NumericError);
}

TEST_CASE("rng determinism and bounded draws") {
  Rng a(1234);
  Rng b(1234);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform() == b.uniform());
    const auto ai = a.integer(17);
    CHECK(ai == b.integer(17));
    CHECK(ai < 17);
  }
  CHECK(Rng::derive(1, 2) != Rng::derive(1, 3));
  CHECK(Rng::derive(1, 2) == Rng::derive(1, 2));
}
