#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "kgd/distill.hpp"
#include "kgd/eval.hpp"
#include "kgd/trainer.hpp"
#include "support/fixtures.hpp"

using namespace kgd;

namespace {

TeacherEmbedding small_teacher(std::size_t nodes = 10, std::size_t d_prime = 4,
                               std::size_t d_rel = 3, std::uint64_t seed = 5) {
  Rng rng(seed);
  Matrix z(nodes, d_prime), zp(nodes, d_prime), zr(nodes, d_rel);
  for (double& v : z.flat()) v = rng.gauss();
  for (double& v : zp.flat()) v = rng.gauss();
  for (double& v : zr.flat()) v = rng.gauss();
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < nodes; ++i) ids.push_back("G" + std::to_string(i));
  return assemble_teacher(z, zp, zr, std::move(ids));
}

TrainConfig fast_config() {
  TrainConfig config;
  config.hidden_size = 16;
  config.steps = 12;
  config.batch = 2;
  config.max_span_width = 4;
  config.distill_width = 6;
  config.dropout = 0.2;
  config.learning_rate = 1e-3;
  config.seed = 9;
  return config;
}

}  // namespace

TEST_CASE("build_distill_batch: empty, mapped, dropped") {
  const auto teacher = small_teacher();
  const auto spans = SpanIndexSet::enumerate(5, 2);

  DatasetEntry no_kge;
  no_kge.tokens = {"a", "b", "c", "d", "e"};
  CHECK(build_distill_batch(no_kge, spans, teacher).pairs.empty());

  DatasetEntry entry = no_kge;
  entry.ner = {{0, 0, "T"}, {1, 2, "T"}, {3, 3, "T"}};
  entry.kge = {{0, 0, "G7"}, {1, 2, "G2"}, {3, 3, "MISSING"}};
  const auto batch = build_distill_batch(entry, spans, teacher);
  REQUIRE(batch.pairs.size() == 2);
  CHECK(batch.pairs[0].span_position == 0);  // (0,0) is raw position 0
  CHECK(batch.pairs[0].teacher_row == 7);
  CHECK(batch.pairs[1].span_position == 1 * 2 + 1);  // (1,2): start 1, width 2
  CHECK(batch.pairs[1].teacher_row == 2);
  CHECK(batch.dropped_unresolved == 1);
  CHECK(batch.dropped() == 1);

  // A kge span wider than the window cannot index a raw span.
  DatasetEntry wide = no_kge;
  wide.ner = {{0, 3, "T"}};
  wide.kge = {{0, 3, "G1"}};
  const auto dropped = build_distill_batch(wide, SpanIndexSet::enumerate(5, 2),
                                           teacher);
  CHECK(dropped.pairs.empty());
  CHECK(dropped.dropped_wide == 1);
}

TEST_CASE("distill_loss: coinciding projections, hand value, frozen teacher") {
  Vocab vocab;
  vocab.add("x");
  StudentModel model(vocab, {4, 2, 3, 0.0}, 7);
  auto& store = model.params();

  // Zero weights, equal biases: both projections collapse to the same rows.
  store.value("head.span.w").fill(0.0);
  store.value("head.dist.w").fill(0.0);
  store.value("head.span.b") = Matrix::from_rows({{0.5, -0.5}});
  store.value("head.dist.b") = Matrix::from_rows({{0.5, -0.5}});
  {
    Tape tape;
    Var s = tape.constant(Matrix(1, 4, 1.0));
    Var h = tape.constant(Matrix(1, 3, 2.0));
    CHECK(tape.scalar(distill_loss(tape, model, s, h)) == 0.0);
  }
  // C=1, m=2, projections [1,1] vs [0,0] -> mean of {1,1} = 1.
  store.value("head.span.b") = Matrix::from_rows({{1.0, 1.0}});
  store.value("head.dist.b") = Matrix::from_rows({{0.0, 0.0}});
  {
    Tape tape;
    Var s = tape.constant(Matrix(1, 4, 0.0));
    Var h = tape.constant(Matrix(1, 3, 0.0));
    CHECK(tape.scalar(distill_loss(tape, model, s, h)) == 1.0);
  }
  // Gradient w.r.t. teacher rows is identically zero even though
  // perturbing them changes the loss value.
  {
    Rng rng(3);
    for (double& v : store.value("head.span.w").flat()) v = rng.gauss();
    for (double& v : store.value("head.dist.w").flat()) v = rng.gauss();
    Tape tape;
    Var s = tape.input(Matrix(2, 4, 0.3));
    Matrix h_values(2, 3, 0.7);
    Var h = tape.constant(h_values);
    Var loss = distill_loss(tape, model, s, h);
    const double base = tape.scalar(loss);
    tape.backward(loss);
    const Matrix teacher_grad = tape.grad(h);
    for (double v : teacher_grad.flat()) {
      CHECK(v == 0.0);
    }
    // The student side does receive gradient.
    const Matrix student_grad = tape.grad(s);
    bool any = false;
    for (double v : student_grad.flat()) any = any || v != 0.0;
    CHECK(any);
    // Value sensitivity: a perturbed teacher row changes the loss.
    Tape tape2;
    Matrix bumped = h_values;
    bumped.at(0, 0) += 0.25;
    Var loss2 = distill_loss(tape2, model, tape2.input(Matrix(2, 4, 0.3)),
                             tape2.constant(bumped));
    CHECK(tape2.scalar(loss2) != base);
  }
}

TEST_CASE("total_loss weighting") {
  Tape tape;
  Var lang = tape.constant(Matrix(1, 1, 1.0));
  Var dist = tape.constant(Matrix(1, 1, 1.0));
  CHECK(tape.scalar(total_loss(tape, lang, dist, 0.8, 0.2)) ==
        doctest::Approx(1.0).epsilon(1e-15));

  Tape tape2;
  Var l2 = tape2.constant(Matrix(1, 1, 0.7));
  Var d2 = tape2.constant(Matrix(1, 1, 0.9));
  CHECK(tape2.scalar(total_loss(tape2, l2, d2, 0.8, 0.0)) ==
        doctest::Approx(0.56));

  Tape tape3;
  Var l3 = tape3.constant(Matrix(1, 1, 0.3));
  Var d3 = tape3.constant(Matrix(1, 1, 0.7));
  CHECK(tape3.scalar(total_loss(tape3, l3, d3, 1.0, 1.0)) ==
        doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(total_loss(tape3, l3, d3, -0.1, 0.2), ConfigError);
}

TEST_CASE("train config json round trip and validation") {
  TrainConfig config;
  config.hidden_size = 128;
  config.loss_b_dist = 0.3;
  const auto j = config.to_json();
  const auto back = TrainConfig::from_json(j);
  CHECK(back.to_json() == j);
  CHECK(back.loss_a_cls == -1.0);  // stored, never applied

  nlohmann::json bad = j;
  bad["no_such_key"] = 1;
  CHECK_THROWS_AS(TrainConfig::from_json(bad), ConfigError);

  TrainConfig invalid;
  invalid.dropout = 1.0;
  CHECK_THROWS_AS(invalid.validate(), ConfigError);
  invalid = TrainConfig{};
  invalid.schedule = "linear";
  CHECK_THROWS_AS(invalid.validate(), ConfigError);
}

TEST_CASE("train: zero steps produces an initial checkpoint and empty report") {
  auto fixture = kgd::testing::make_corpus_fixture(12, 31);
  const auto teacher = small_teacher(40);
  TrainConfig config = fast_config();
  config.steps = 0;
  const std::string path = "ckpt_steps0.bin";
  const auto outcome = train(fixture.train_entries, teacher, config, path);
  CHECK(outcome.report.rows.empty());
  CHECK(outcome.report.checkpoint_path == path);
  const auto loaded = load_checkpoint(path);
  CHECK(loaded.config.steps == 0);
  std::remove(path.c_str());
}

TEST_CASE("train is bit-reproducible under a fixed seed") {
  auto fixture = kgd::testing::make_corpus_fixture(20, 37);
  const auto teacher = kgd::testing::build_fixture_teacher(fixture.kg, 37, 12, 8);
  TrainConfig config = fast_config();
  config.steps = 20;
  const std::string p1 = "ckpt_repro1.bin";
  const std::string p2 = "ckpt_repro2.bin";
  const auto first = train(fixture.train_entries, teacher, config, p1);
  const auto second = train(fixture.train_entries, teacher, config, p2);
  REQUIRE(first.report.rows.size() == second.report.rows.size());
  for (std::size_t i = 0; i < first.report.rows.size(); ++i) {
    CHECK(first.report.rows[i].loss_total == second.report.rows[i].loss_total);
    CHECK(first.report.rows[i].loss_lang == second.report.rows[i].loss_lang);
    CHECK(first.report.rows[i].loss_dist == second.report.rows[i].loss_dist);
    CHECK(first.report.rows[i].lr == second.report.rows[i].lr);
  }
  for (const auto& name : first.model.params().names()) {
    CHECK(first.model.params().value(name) == second.model.params().value(name));
  }
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("empty-kge batches leave the language gradient unchanged") {
  // One entry without kge annotations: a distilled config and a b_dist=0
  // ablation must produce identical updates.
  DatasetEntry entry;
  entry.tokens = {"alpha", "binds", "beta"};
  entry.ner = {{0, 0, "Gene"}};
  const auto teacher = small_teacher();

  TrainConfig config = fast_config();
  config.steps = 5;
  config.batch = 1;
  config.dropout = 0.0;

  TrainConfig ablation = config;
  ablation.loss_b_dist = 0.0;

  const std::string p1 = "ckpt_kge1.bin";
  const std::string p2 = "ckpt_kge2.bin";
  const auto with = train({entry}, teacher, config, p1);
  const auto without = train({entry}, teacher, ablation, p2);
  for (const auto& name : with.model.params().names()) {
    CHECK(with.model.params().value(name) == without.model.params().value(name));
  }
  CHECK(with.report.rows.back().loss_dist == 0.0);
  std::remove(p1.c_str());
  std::remove(p2.c_str());
}

TEST_CASE("wide and empty entries are excluded with counts") {
  DatasetEntry good;
  good.tokens = {"alpha", "binds", "beta"};
  good.ner = {{0, 0, "Gene"}};
  DatasetEntry wide;
  wide.tokens = {"a", "b", "c", "d", "e", "f"};
  wide.ner = {{0, 5, "Gene"}};  // width 6 > w = 4
  DatasetEntry empty;

  const auto teacher = small_teacher();
  TrainConfig config = fast_config();
  config.steps = 2;
  const std::string path = "ckpt_excl.bin";
  const auto outcome = train({good, wide, empty}, teacher, config, path);
  CHECK(outcome.report.excluded_wide == 1);
  CHECK(outcome.report.excluded_empty == 1);
  std::remove(path.c_str());
}

TEST_CASE("checkpoint round trip, drift warning and dimension rejection") {
  auto fixture = kgd::testing::make_corpus_fixture(10, 41);
  const auto teacher = small_teacher(40);
  TrainConfig config = fast_config();
  config.steps = 3;
  const std::string path = "ckpt_round.bin";
  const auto outcome = train(fixture.train_entries, teacher, config, path);

  const auto loaded = load_checkpoint(path);
  for (const auto& name : outcome.model.params().names()) {
    CHECK(loaded.model.params().value(name) == outcome.model.params().value(name));
  }
  CHECK(loaded.type_names == outcome.report.type_names);
  CHECK(loaded.model.vocab().fingerprint() == outcome.model.vocab().fingerprint());

  TrainConfig expected = config;
  expected.hidden_size = 999;
  CHECK_THROWS_WITH_AS(load_checkpoint(path, &expected),
                       doctest::Contains("999"), ConfigError);

  // Corruption is caught by the checksum.
  {
    FILE* f = std::fopen(path.c_str(), "r+b");
    REQUIRE(f != nullptr);
    std::fseek(f, -9, SEEK_END);
    const char byte = 0x5A;
    std::fwrite(&byte, 1, 1, f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_checkpoint(path), IntegrityError);
  std::remove(path.c_str());
}

TEST_CASE("evaluation after loading is identical across loads") {
  auto fixture = kgd::testing::make_corpus_fixture(30, 43);
  const auto teacher = kgd::testing::build_fixture_teacher(fixture.kg, 43, 12, 8);
  TrainConfig config = fast_config();
  config.steps = 15;
  const std::string path = "ckpt_eval_twice.bin";
  const auto outcome = train(fixture.train_entries, teacher, config, path);

  auto first = load_checkpoint(path);
  auto second = load_checkpoint(path);
  const auto m1 = evaluate(first.model, fixture.heldout_entries,
                           first.type_names, config.max_span_width);
  const auto m2 = evaluate(second.model, fixture.heldout_entries,
                           second.type_names, config.max_span_width);
  CHECK(m1.metrics.to_json() == m2.metrics.to_json());
  std::remove(path.c_str());
}
