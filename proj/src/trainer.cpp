#include "kgd/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "kgd/container.hpp"
#include "kgd/distill.hpp"
#include "kgd/text.hpp"

namespace kgd {

void TrainConfig::validate() const {
  if (max_span_width < 1) throw ConfigError("config: max_span_width must be >= 1");
  if (hidden_size < 1) throw ConfigError("config: hidden_size must be >= 1");
  if (kg_hidden < 1) throw ConfigError("config: kg_hidden must be >= 1");
  if (distill_width < 1) throw ConfigError("config: distill_width must be >= 1");
  if (batch < 1) throw ConfigError("config: batch must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ConfigError("config: dropout must lie in [0, 1)");
  }
  if (warmup_ratio < 0.0 || warmup_ratio >= 1.0) {
    throw ConfigError("config: warmup_ratio must lie in [0, 1)");
  }
  if (loss_a_bce < 0.0 || loss_b_dist < 0.0) {
    throw ConfigError("config: loss weights must be non-negative");
  }
  if (learning_rate <= 0.0) throw ConfigError("config: learning_rate must be positive");
  if (schedule != "cosine") {
    throw ConfigError("config: unknown schedule '" + schedule + "'");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {
      {"max_span_width", max_span_width},
      {"hidden_size", hidden_size},
      {"kg_hidden", kg_hidden},
      {"dropout", dropout},
      {"steps", steps},
      {"batch", batch},
      {"warmup_ratio", warmup_ratio},
      {"schedule", schedule},
      {"loss_a_bce", loss_a_bce},
      {"loss_b_dist", loss_b_dist},
      {"loss_a_cls", loss_a_cls},
      {"distill_width", distill_width},
      {"learning_rate", learning_rate},
      {"seed", seed},
      {"checkpoint_interval", checkpoint_interval},
  };
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  if (!j.is_object()) {
    throw ConfigError("config: expected a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "max_span_width") cfg.max_span_width = value.get<std::size_t>();
    else if (key == "hidden_size") cfg.hidden_size = value.get<std::size_t>();
    else if (key == "kg_hidden") cfg.kg_hidden = value.get<std::size_t>();
    else if (key == "dropout") cfg.dropout = value.get<double>();
    else if (key == "steps") cfg.steps = value.get<std::size_t>();
    else if (key == "batch") cfg.batch = value.get<std::size_t>();
    else if (key == "warmup_ratio") cfg.warmup_ratio = value.get<double>();
    else if (key == "schedule") cfg.schedule = value.get<std::string>();
    else if (key == "loss_a_bce") cfg.loss_a_bce = value.get<double>();
    else if (key == "loss_b_dist") cfg.loss_b_dist = value.get<double>();
    else if (key == "loss_a_cls") cfg.loss_a_cls = value.get<double>();
    else if (key == "distill_width") cfg.distill_width = value.get<std::size_t>();
    else if (key == "learning_rate") cfg.learning_rate = value.get<double>();
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else if (key == "checkpoint_interval")
      cfg.checkpoint_interval = value.get<std::size_t>();
    else
      throw ConfigError("config: unknown key '" + key + "'");
  }
  cfg.validate();
  return cfg;
}

void TrainReport::write_csv(std::ostream& out) const {
  out << "step,lr,loss_lang,loss_dist,loss_total\n";
  out << std::setprecision(17);
  for (const auto& row : rows) {
    out << row.step << ',' << row.lr << ',' << row.loss_lang << ','
        << row.loss_dist << ',' << row.loss_total << '\n';
  }
}

nlohmann::json TrainReport::summary() const {
  nlohmann::json j;
  j["steps"] = rows.size();
  j["wall_seconds"] = wall_seconds;
  j["checkpoint"] = checkpoint_path;
  j["excluded_wide"] = excluded_wide;
  j["excluded_empty"] = excluded_empty;
  j["dropped_kge_pairs"] = dropped_kge_pairs;
  j["type_names"] = type_names;
  if (!rows.empty()) {
    j["first"] = {{"loss_lang", rows.front().loss_lang},
                  {"loss_dist", rows.front().loss_dist},
                  {"loss_total", rows.front().loss_total}};
    j["final"] = {{"loss_lang", rows.back().loss_lang},
                  {"loss_dist", rows.back().loss_dist},
                  {"loss_total", rows.back().loss_total}};
  }
  return j;
}

namespace {

Vocab build_vocab(const std::vector<const DatasetEntry*>& entries,
                  const std::vector<std::string>& type_names) {
  Vocab vocab;
  for (const auto* entry : entries) {
    for (const auto& tok : entry->tokens) {
      vocab.add(tok);
    }
  }
  for (const auto& name : type_names) {
    for (const auto& tok : tokenize_text(name)) {
      vocab.add(tok);
    }
  }
  return vocab;
}

std::string format_batch(const std::vector<std::size_t>& indices) {
  std::string out;
  for (std::size_t i : indices) {
    if (!out.empty()) out += ",";
    out += std::to_string(i);
  }
  return out;
}

}  // namespace

TrainOutcome train(const std::vector<DatasetEntry>& data,
                   const TeacherEmbedding& teacher, const TrainConfig& config,
                   const std::string& checkpoint_path) {
  config.validate();
  const auto start_time = std::chrono::steady_clock::now();

  TrainReport report;
  std::vector<const DatasetEntry*> kept;
  for (const auto& entry : data) {
    if (entry.tokens.empty()) {
      ++report.excluded_empty;
      continue;
    }
    const bool wide = std::any_of(
        entry.ner.begin(), entry.ner.end(), [&](const NerSpan& span) {
          return span.end - span.start + 1 > config.max_span_width;
        });
    if (wide) {
      // Truncating labels corrupts supervision; drop the whole entry instead.
      ++report.excluded_wide;
      continue;
    }
    kept.push_back(&entry);
  }
  if (report.excluded_wide || report.excluded_empty) {
    std::cerr << "train: excluded " << report.excluded_wide
              << " entries with spans wider than " << config.max_span_width
              << " and " << report.excluded_empty << " empty entries\n";
  }
  if (kept.empty()) {
    throw DataError("train: no usable entries in the dataset");
  }

  for (const auto* entry : kept) {
    for (const auto& span : entry->ner) {
      if (std::find(report.type_names.begin(), report.type_names.end(), span.type) ==
          report.type_names.end()) {
        report.type_names.push_back(span.type);
      }
    }
  }
  if (report.type_names.empty()) {
    throw DataError("train: dataset has no entity annotations to learn from");
  }

  StudentDims dims;
  dims.embed_dim = config.hidden_size;
  dims.distill_width = config.distill_width;
  dims.teacher_width = teacher.width();
  dims.dropout = config.dropout;
  StudentModel model(build_vocab(kept, report.type_names), dims,
                     Rng::derive(config.seed, 1));

  ScheduleConfig schedule{config.learning_rate, std::max<std::uint64_t>(config.steps, 1),
                          config.warmup_ratio};
  Rng batch_rng(Rng::derive(config.seed, 2));
  Rng dropout_rng(Rng::derive(config.seed, 3));

  bool checkpoint_saved = false;
  auto save_now = [&]() {
    save_checkpoint(model, config, report.type_names, checkpoint_path);
    report.checkpoint_path = checkpoint_path;
    checkpoint_saved = true;
  };

  for (std::size_t step = 0; step < config.steps; ++step) {
    const double rate = lr_at(step, schedule);

    std::vector<std::size_t> batch_indices(config.batch);
    for (auto& idx : batch_indices) {
      idx = batch_rng.integer(kept.size());
    }

    Tape tape;
    Var type_reps = model.encode_types(tape, report.type_names);

    Var lang_sum{};
    bool first_sentence = true;
    std::size_t masked_total = 0;
    std::vector<Var> distill_parts;
    std::vector<std::size_t> teacher_rows;

    for (std::size_t idx : batch_indices) {
      const DatasetEntry& entry = *kept[idx];
      const auto spans =
          SpanIndexSet::enumerate(entry.tokens.size(), config.max_span_width);
      Var tokens = model.embed_tokens(tape, entry.tokens, true, dropout_rng);
      Var span_reps =
          model.span_representations(tape, tokens, spans, true, dropout_rng);
      Var scores = model.match_scores(tape, span_reps, type_reps);
      const auto labels = build_span_labels(entry, spans, report.type_names);
      Var bce = language_loss(tape, scores, labels);
      masked_total += labels.masked_count;
      lang_sum = first_sentence ? bce : tape.add(lang_sum, bce);
      first_sentence = false;

      if (config.loss_b_dist > 0.0) {
        const auto distill = build_distill_batch(entry, spans, teacher);
        report.dropped_kge_pairs += distill.dropped();
        if (!distill.pairs.empty()) {
          std::vector<std::size_t> positions;
          for (const auto& pair : distill.pairs) {
            positions.push_back(pair.span_position);
            teacher_rows.push_back(pair.teacher_row);
          }
          distill_parts.push_back(tape.gather_rows(span_reps, std::move(positions)));
        }
      }
    }

    Var lang = tape.scale(lang_sum, 1.0 / static_cast<double>(masked_total));

    double dist_value = 0.0;
    Var total;
    if (!distill_parts.empty()) {
      Matrix h_sub(teacher_rows.size(), teacher.width());
      for (std::size_t i = 0; i < teacher_rows.size(); ++i) {
        auto src = teacher.h().row(teacher_rows[i]);
        std::copy(src.begin(), src.end(), h_sub.row(i).begin());
      }
      Var s_sub = tape.vstack(distill_parts);
      Var dist = distill_loss(tape, model, s_sub, tape.constant(std::move(h_sub)));
      dist_value = tape.scalar(dist);
      total = total_loss(tape, lang, dist, config.loss_a_bce, config.loss_b_dist);
    } else {
      total = tape.scale(lang, config.loss_a_bce);
    }

    const double lang_value = tape.scalar(lang);
    const double total_value = tape.scalar(total);
    if (!std::isfinite(total_value)) {
      std::cerr << "train: non-finite loss at step " << step << " (batch "
                << format_batch(batch_indices) << ", lang " << lang_value
                << ", dist " << dist_value << ")\n";
      throw NumericError(
          "train: aborted on non-finite loss at step " + std::to_string(step) +
          "; last checkpoint: " + (checkpoint_saved ? checkpoint_path : "<none>"));
    }

    model.params().zero_grad();
    tape.backward(total);
    model.params().adam_step(rate);

    report.rows.push_back({step, rate, lang_value, dist_value, total_value});
    if (config.checkpoint_interval > 0 &&
        (step + 1) % config.checkpoint_interval == 0) {
      save_now();
    }
  }

  save_now();
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time)
          .count();
  return TrainOutcome{std::move(model), std::move(report)};
}

void save_checkpoint(const StudentModel& model, const TrainConfig& config,
                     const std::vector<std::string>& type_names,
                     const std::string& path) {
  nlohmann::json meta;
  meta["format"] = "kgd-checkpoint";
  meta["version"] = 1;
  meta["dims"] = {{"embed_dim", model.dims().embed_dim},
                  {"distill_width", model.dims().distill_width},
                  {"teacher_width", model.dims().teacher_width},
                  {"dropout", model.dims().dropout}};
  meta["vocab"] = model.vocab().to_json();
  char fp[19];
  std::snprintf(fp, sizeof(fp), "0x%016llx",
                static_cast<unsigned long long>(model.vocab().fingerprint()));
  meta["vocab_fingerprint"] = fp;
  meta["config"] = config.to_json();
  meta["type_names"] = type_names;

  std::vector<std::pair<std::string, const Matrix*>> mats;
  for (const auto& name : model.params().names()) {
    mats.emplace_back(name, &model.params().value(name));
  }
  write_blob_file(path, std::move(meta), mats);
}

Checkpoint load_checkpoint(const std::string& path, const TrainConfig* expected) {
  BlobFile file = read_blob_file(path);
  if (!file.meta.contains("format") ||
      file.meta["format"].get<std::string>() != "kgd-checkpoint") {
    throw DataError("load_checkpoint: '" + path + "' is not a checkpoint");
  }
  Vocab vocab = Vocab::from_json(file.meta.at("vocab"));
  char fp[19];
  std::snprintf(fp, sizeof(fp), "0x%016llx",
                static_cast<unsigned long long>(vocab.fingerprint()));
  if (file.meta.at("vocab_fingerprint").get<std::string>() != fp) {
    throw IntegrityError("load_checkpoint: vocab fingerprint mismatch in " + path);
  }

  TrainConfig config = TrainConfig::from_json(file.meta.at("config"));
  if (expected != nullptr) {
    if (expected->hidden_size != config.hidden_size) {
      throw ConfigError("load_checkpoint: hidden_size mismatch, checkpoint has " +
                        std::to_string(config.hidden_size) + ", run expects " +
                        std::to_string(expected->hidden_size));
    }
    if (expected->max_span_width != config.max_span_width) {
      throw ConfigError("load_checkpoint: max_span_width mismatch, checkpoint has " +
                        std::to_string(config.max_span_width) + ", run expects " +
                        std::to_string(expected->max_span_width));
    }
    if (expected->distill_width != config.distill_width) {
      throw ConfigError("load_checkpoint: distill_width mismatch, checkpoint has " +
                        std::to_string(config.distill_width) + ", run expects " +
                        std::to_string(expected->distill_width));
    }
    const auto stored = config.to_json();
    const auto wanted = expected->to_json();
    for (const auto& [key, value] : wanted.items()) {
      if (stored.at(key) != value) {
        std::cerr << "load_checkpoint: config drift on '" << key << "': checkpoint "
                  << stored.at(key).dump() << ", run " << value.dump() << "\n";
      }
    }
  }

  const auto& dims_json = file.meta.at("dims");
  StudentDims dims;
  dims.embed_dim = dims_json.at("embed_dim").get<std::size_t>();
  dims.distill_width = dims_json.at("distill_width").get<std::size_t>();
  dims.teacher_width = dims_json.at("teacher_width").get<std::size_t>();
  dims.dropout = dims_json.at("dropout").get<double>();

  StudentModel model(std::move(vocab), dims, /*init_seed=*/0);
  auto names = model.params().names();
  for (const auto& name : names) {
    auto it = file.matrices.find(name);
    if (it == file.matrices.end()) {
      throw IntegrityError("load_checkpoint: missing parameter '" + name + "'");
    }
    Matrix& dst = model.params().value(name);
    if (!dst.same_shape(it->second)) {
      throw IntegrityError("load_checkpoint: parameter '" + name + "' is " +
                           shape_str(it->second) + ", expected " + shape_str(dst));
    }
    dst = std::move(it->second);
  }
  if (file.matrices.size() != names.size()) {
    throw IntegrityError("load_checkpoint: checkpoint carries " +
                         std::to_string(file.matrices.size()) +
                         " matrices, model expects " + std::to_string(names.size()));
  }

  std::vector<std::string> type_names =
      file.meta.at("type_names").get<std::vector<std::string>>();
  return Checkpoint{std::move(model), std::move(config), std::move(type_names)};
}

}  // namespace kgd
