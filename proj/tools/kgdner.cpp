// kgdner — span-based NER student distilled from a knowledge-graph teacher.
//
// Subcommands cover the full pipeline: synthetic data generation and
// validation, teacher pretraining (message-passing classifier + TransR),
// teacher assembly, student training, evaluation and a gradient self-check.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "kgd/container.hpp"
#include "kgd/data.hpp"
#include "kgd/distill.hpp"
#include "kgd/errors.hpp"
#include "kgd/eval.hpp"
#include "kgd/gnn.hpp"
#include "kgd/kg.hpp"
#include "kgd/teacher.hpp"
#include "kgd/text.hpp"
#include "kgd/trainer.hpp"
#include "kgd/transr.hpp"

namespace {

using namespace kgd;

char parse_delimiter(const std::string& flag) {
  if (flag.size() != 1) {
    throw ConfigError("--delimiter must be a single character");
  }
  return flag[0];
}

Matrix seeded_table(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Matrix table(rows, cols);
  Rng rng(Rng::derive(seed, 0xF00));
  const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
  for (double& v : table.flat()) v = rng.gauss() * scale;
  return table;
}

Vocab description_vocab(const KnowledgeGraph& kg) {
  Vocab vocab;
  for (const auto& node : kg.nodes()) {
    for (const auto& tok : tokenize_text(node.description)) {
      vocab.add(tok);
    }
  }
  return vocab;
}

int cmd_gen_data(const std::string& rows_path, const std::string& templates_path,
                 const std::string& out_path, std::uint64_t denominator,
                 std::size_t max_span_width, std::uint64_t seed,
                 const std::string& delimiter) {
  const auto rows = read_relation_rows_file(rows_path, parse_delimiter(delimiter));
  const auto templates = TemplateSet::load_file(templates_path);
  const auto sampled = subsample_rows(rows, denominator, Rng::derive(seed, 1));

  std::vector<DatasetEntry> entries;
  std::size_t ambiguous = 0;
  std::size_t wide = 0;
  for (std::size_t i = 0; i < sampled.size(); ++i) {
    auto generated = generate_entry(sampled[i], templates, Rng::derive(seed, 100 + i));
    if (generated.ambiguous) {
      ++ambiguous;
      continue;
    }
    const bool too_wide = std::any_of(
        generated.entry.ner.begin(), generated.entry.ner.end(),
        [&](const NerSpan& s) { return s.end - s.start + 1 > max_span_width; });
    if (too_wide) {
      ++wide;
      continue;
    }
    entries.push_back(std::move(generated.entry));
  }
  write_dataset_file(entries, out_path);
  std::cerr << "gen-data: read " << rows.size() << " rows, sampled "
            << sampled.size() << ", excluded " << ambiguous
            << " ambiguous (repeated surface form) and " << wide
            << " wider than " << max_span_width << "\n";
  std::cout << "wrote " << entries.size() << " entries to " << out_path << "\n";
  return 0;
}

int cmd_check_data(const std::string& in_path) {
  const auto result = read_dataset_lenient_file(in_path);
  for (const auto& error : result.errors) {
    std::cerr << "check-data: " << error << "\n";
  }
  std::cout << "check-data: " << result.entries.size() << " entries, "
            << result.errors.size() << " errors\n";
  return result.errors.empty() ? 0 : 3;
}

int cmd_pretrain_gnn(const std::string& nodes_path, const std::string& edges_path,
                     const std::string& out_path, std::size_t kg_hidden,
                     const GnnConfig& config, const std::string& delimiter) {
  const auto kg =
      KnowledgeGraph::load_files(nodes_path, edges_path, parse_delimiter(delimiter));
  const Vocab vocab = description_vocab(kg);
  const Matrix table = seeded_table(vocab.size(), kg_hidden, config.seed);
  const auto features = encode_descriptions(kg, vocab, table);
  const auto model = pretrain_gnn(features, kg.edges(), config);

  nlohmann::json meta;
  meta["format"] = "kgd-gnn";
  meta["version"] = 1;
  meta["k"] = config.layers;
  meta["feature_dim"] = kg_hidden;
  meta["label_names"] = model.label_names;
  meta["node_ids"] = kg.node_ids();
  meta["vocab"] = vocab.to_json();
  meta["report"] = {{"train_accuracy", model.report.train_accuracy},
                    {"val_accuracy", model.report.val_accuracy},
                    {"train_nodes", model.report.train_nodes},
                    {"val_nodes", model.report.val_nodes}};
  std::vector<std::pair<std::string, const Matrix*>> mats = {
      {"token_table", &table}, {"z", &features.z},
      {"head_w", &model.head_weight}, {"head_b", &model.head_bias}};
  for (std::size_t k = 0; k < model.layer_weights.size(); ++k) {
    mats.emplace_back("layer_" + std::to_string(k), &model.layer_weights[k]);
  }
  write_blob_file(out_path, std::move(meta), mats);
  std::cout << nlohmann::json({{"train_accuracy", model.report.train_accuracy},
                               {"val_accuracy", model.report.val_accuracy},
                               {"out", out_path}})
                   .dump()
            << "\n";
  return 0;
}

int cmd_pretrain_transr(const std::string& nodes_path, const std::string& edges_path,
                        const std::string& out_path, const TransRConfig& config,
                        const std::string& delimiter) {
  const auto kg =
      KnowledgeGraph::load_files(nodes_path, edges_path, parse_delimiter(delimiter));
  const auto result = train_transr(kg, config);

  nlohmann::json meta;
  meta["format"] = "kgd-transr";
  meta["version"] = 1;
  meta["dim"] = config.dim;
  meta["relation_names"] = kg.relation_names();
  meta["node_ids"] = kg.node_ids();
  meta["epoch_mean_loss"] = result.epoch_mean_loss;
  std::vector<std::pair<std::string, const Matrix*>> mats = {
      {"entities", &result.params.entities},
      {"relations", &result.params.relations}};
  for (std::size_t r = 0; r < result.params.projections.size(); ++r) {
    mats.emplace_back("proj_" + std::to_string(r), &result.params.projections[r]);
  }
  write_blob_file(out_path, std::move(meta), mats);
  const double final_loss =
      result.epoch_mean_loss.empty() ? 0.0 : result.epoch_mean_loss.back();
  std::cout << nlohmann::json(
                   {{"epochs", result.epoch_mean_loss.size()},
                    {"final_mean_loss", final_loss},
                    {"out", out_path}})
                   .dump()
            << "\n";
  return 0;
}

int cmd_build_teacher(const std::string& nodes_path, const std::string& edges_path,
                      const std::string& gnn_path, const std::string& transr_path,
                      const std::string& out_path, const std::string& delimiter) {
  const auto kg =
      KnowledgeGraph::load_files(nodes_path, edges_path, parse_delimiter(delimiter));
  const auto gnn = read_blob_file(gnn_path);
  const auto transr = read_blob_file(transr_path);
  if (gnn.meta.value("format", "") != "kgd-gnn") {
    throw DataError("build-teacher: '" + gnn_path + "' is not a pretrained gnn file");
  }
  if (transr.meta.value("format", "") != "kgd-transr") {
    throw DataError("build-teacher: '" + transr_path + "' is not a transr file");
  }
  const auto ids = kg.node_ids();
  if (gnn.meta.at("node_ids").get<std::vector<std::string>>() != ids) {
    throw DataError("build-teacher: gnn file was trained on a different node set");
  }
  if (transr.meta.at("node_ids").get<std::vector<std::string>>() != ids) {
    throw DataError("build-teacher: transr file was trained on a different node set");
  }

  const Matrix& z = gnn.matrices.at("z");
  std::vector<Matrix> weights;
  for (std::size_t k = 0;; ++k) {
    auto it = gnn.matrices.find("layer_" + std::to_string(k));
    if (it == gnn.matrices.end()) break;
    weights.push_back(it->second);
  }
  const Matrix a = neighbor_mean_matrix(kg.node_count(), kg.edges());
  const Matrix z_prop = propagate_features(z, a, weights);
  const Matrix& z_rel = transr.matrices.at("entities");

  const auto teacher = assemble_teacher(z, z_prop, z_rel, ids);
  save_teacher(teacher, out_path);
  std::cout << nlohmann::json({{"nodes", teacher.node_count()},
                               {"d_text", teacher.d_text()},
                               {"d_prop", teacher.d_prop()},
                               {"d_rel", teacher.d_rel()},
                               {"r", teacher.width()},
                               {"out", out_path}})
                   .dump()
            << "\n";
  return 0;
}

int cmd_train(const std::string& data_path, const std::string& teacher_path,
              const std::string& out_path, const std::string& config_path,
              bool unit_loss_weights, bool seed_given, std::uint64_t seed,
              const std::string& report_csv, const std::string& summary_json) {
  TrainConfig config;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      throw DataError("cannot open config: " + config_path);
    }
    nlohmann::json j;
    try {
      in >> j;
    } catch (const std::exception& e) {
      throw ConfigError("config: " + config_path + ": " + e.what());
    }
    config = TrainConfig::from_json(j);
  }
  if (unit_loss_weights) {
    config.loss_a_bce = 1.0;
    config.loss_b_dist = 1.0;
  }
  if (seed_given) {
    config.seed = seed;
  }

  const auto data = read_dataset_file(data_path);
  const auto teacher = load_teacher(teacher_path);
  auto outcome = train(data, teacher, config, out_path);

  if (!report_csv.empty()) {
    std::ofstream out(report_csv);
    if (!out) {
      throw DataError("cannot open report file: " + report_csv);
    }
    outcome.report.write_csv(out);
  }
  const auto summary = outcome.report.summary();
  if (!summary_json.empty()) {
    std::ofstream out(summary_json);
    if (!out) {
      throw DataError("cannot open summary file: " + summary_json);
    }
    out << summary.dump(2) << "\n";
  }
  std::cout << summary.dump() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_path,
             const std::string& types_flag, double threshold) {
  auto checkpoint = load_checkpoint(checkpoint_path);
  auto data = read_dataset_lenient_file(data_path);
  for (const auto& error : data.errors) {
    std::cerr << "eval: skipped: " << error << "\n";
  }
  std::vector<std::string> types = checkpoint.type_names;
  if (!types_flag.empty()) {
    types.clear();
    std::istringstream in(types_flag);
    std::string name;
    while (std::getline(in, name, ',')) {
      const auto cleaned = clean_entity_name(name);
      if (!cleaned.empty()) {
        types.push_back(cleaned);
      }
    }
  }
  if (types.empty()) {
    throw ConfigError("eval: no type names (checkpoint has none, --types empty)");
  }
  const auto result = evaluate(checkpoint.model, data.entries, types,
                               checkpoint.config.max_span_width, threshold);
  if (result.skipped_invalid + data.errors.size() > 0) {
    std::cerr << "eval: skipped " << result.skipped_invalid + data.errors.size()
              << " invalid entries\n";
  }
  std::cout << result.metrics.to_json().dump() << "\n";
  return 0;
}

// Composed-pipeline gradient check at toy sizes: language loss + distillation
// loss through the weighted combination, verified against central differences.
int cmd_grad_check(double eps, std::size_t coords, std::uint64_t seed) {
  DatasetEntry entry;
  entry.tokens = {"alpha", "binds", "beta", "complex", "."};
  entry.ner = {{0, 0, "TypeA"}, {2, 3, "TypeB"}};
  entry.kge = {{0, 0, "n1"}, {2, 3, "n2"}};
  const std::vector<std::string> type_names = {"TypeA", "TypeB", "TypeC"};

  const std::size_t d = 8;
  const std::size_t m = 6;
  const std::size_t r = 10;
  Matrix h(4, r);
  Rng rng(Rng::derive(seed, 0xAB));
  for (double& v : h.flat()) v = rng.gauss() * 0.5;
  std::vector<std::string> node_ids = {"n0", "n1", "n2", "n3"};
  const TeacherEmbedding teacher(std::move(h), 4, 4, 2, node_ids);

  Vocab vocab;
  for (const auto& tok : entry.tokens) vocab.add(tok);
  for (const auto& name : type_names) vocab.add(name);
  StudentModel model(vocab, {d, m, r, 0.0}, Rng::derive(seed, 0xCD));

  const auto spans = SpanIndexSet::enumerate(entry.tokens.size(), 3);
  const auto labels = build_span_labels(entry, spans, type_names);
  const auto distill = build_distill_batch(entry, spans, teacher);
  Matrix h_sub(distill.pairs.size(), teacher.width());
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < distill.pairs.size(); ++i) {
    positions.push_back(distill.pairs[i].span_position);
    auto src = teacher.h().row(distill.pairs[i].teacher_row);
    std::copy(src.begin(), src.end(), h_sub.row(i).begin());
  }

  double worst = 0.0;
  for (const auto& [a_bce, b_dist] : {std::pair{1.0, 1.0}, {0.8, 0.2}}) {
    auto loss_fn = [&]() {
      Tape tape;
      Rng no_dropout(0);
      Var tokens = model.embed_tokens(tape, entry.tokens, false, no_dropout);
      Var span_reps =
          model.span_representations(tape, tokens, spans, false, no_dropout);
      Var scores =
          model.match_scores(tape, span_reps, model.encode_types(tape, type_names));
      Var lang = tape.scale(language_loss(tape, scores, labels),
                            1.0 / static_cast<double>(labels.masked_count));
      Var s_sub = tape.gather_rows(span_reps, positions);
      Var dist = distill_loss(tape, model, s_sub, tape.constant(h_sub));
      Var total = total_loss(tape, lang, dist, a_bce, b_dist);
      tape.backward(total);
      return tape.scalar(total);
    };
    const auto report = grad_check(model.params(), loss_fn, eps, coords, seed);
    std::cerr << "grad-check: weights (" << a_bce << ", " << b_dist
              << "): max relative error " << report.max_rel_err << " over "
              << report.coords_checked << " coordinates (worst: "
              << report.worst_param << "[" << report.worst_index << "])\n";
    worst = std::max(worst, report.max_rel_err);
  }
  std::cout << nlohmann::json({{"max_rel_err", worst},
                               {"eps", eps},
                               {"threshold", 1e-4},
                               {"pass", worst < 1e-4}})
                   .dump()
            << "\n";
  return worst < 1e-4 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kgdner: span-based NER with knowledge-graph feature distillation"};
  app.require_subcommand(1);

  std::string rows_path, templates_path, out_path, in_path, nodes_path, edges_path;
  std::string gnn_path, transr_path, data_path, teacher_path, config_path;
  std::string checkpoint_path, types_flag, report_csv, summary_json;
  std::string delimiter = ",";
  std::uint64_t seed = 1;
  std::uint64_t denominator = 1;
  std::size_t max_span_width = 8;
  std::size_t kg_hidden = 58;
  double threshold = 0.5;
  double eps = 1e-5;
  std::size_t coords = 250;
  bool unit_loss_weights = false;
  GnnConfig gnn_config;
  TransRConfig transr_config;

  auto* gen = app.add_subcommand("gen-data", "generate a JSONL corpus from relation rows");
  gen->add_option("--rows", rows_path, "relation rows file (7-field header)")->required();
  gen->add_option("--templates", templates_path, "relation -> skeleton JSON")->required();
  gen->add_option("--out", out_path, "output JSONL path")->required();
  gen->add_option("--subsample-denominator", denominator, "keep 1 in N rows (default 1)");
  gen->add_option("--max-span-width", max_span_width, "exclude wider gold spans");
  gen->add_option("--seed", seed, "rng seed");
  gen->add_option("--delimiter", delimiter, "field delimiter (default ,)");

  auto* check = app.add_subcommand("check-data", "validate a JSONL corpus");
  check->add_option("--in", in_path, "corpus path")->required();

  auto* pgnn = app.add_subcommand("pretrain-gnn", "pretrain the node classifier");
  pgnn->add_option("--nodes", nodes_path, "nodes file: id,type,description")->required();
  pgnn->add_option("--edges", edges_path, "edges file: head,relation,tail")->required();
  pgnn->add_option("--out", out_path, "output file")->required();
  pgnn->add_option("--kg-hidden", kg_hidden, "feature width d' (default 58)");
  pgnn->add_option("--k", gnn_config.layers, "propagation layers (default 2)");
  pgnn->add_option("--epochs", gnn_config.epochs, "training epochs");
  pgnn->add_option("--lr", gnn_config.learning_rate, "learning rate");
  pgnn->add_option("--val-fraction", gnn_config.val_fraction, "validation share");
  pgnn->add_option("--seed", gnn_config.seed, "rng seed");
  pgnn->add_option("--delimiter", delimiter, "field delimiter (default ,)");

  auto* ptr = app.add_subcommand("pretrain-transr", "train relational embeddings");
  ptr->add_option("--nodes", nodes_path, "nodes file")->required();
  ptr->add_option("--edges", edges_path, "edges file")->required();
  ptr->add_option("--out", out_path, "output file")->required();
  ptr->add_option("--dim", transr_config.dim, "embedding width d'' (default 58)");
  ptr->add_option("--margin", transr_config.margin, "ranking margin");
  ptr->add_option("--epochs", transr_config.epochs, "training epochs");
  ptr->add_option("--negatives", transr_config.negatives_per_positive,
                  "negatives per positive");
  ptr->add_option("--lr", transr_config.learning_rate, "learning rate");
  ptr->add_option("--seed", transr_config.seed, "rng seed");
  ptr->add_option("--delimiter", delimiter, "field delimiter (default ,)");

  auto* bt = app.add_subcommand("build-teacher", "assemble H = [Z, Z', Z'']");
  bt->add_option("--nodes", nodes_path, "nodes file")->required();
  bt->add_option("--edges", edges_path, "edges file")->required();
  bt->add_option("--gnn", gnn_path, "pretrain-gnn output")->required();
  bt->add_option("--transr", transr_path, "pretrain-transr output")->required();
  bt->add_option("--out", out_path, "teacher output file")->required();
  bt->add_option("--delimiter", delimiter, "field delimiter (default ,)");

  auto* tr = app.add_subcommand("train", "train the student");
  tr->add_option("--data", data_path, "training corpus (JSONL)")->required();
  tr->add_option("--teacher", teacher_path, "teacher embedding file")->required();
  tr->add_option("--out", out_path, "checkpoint output path")->required();
  tr->add_option("--config", config_path, "TrainConfig JSON; flags override");
  auto* seed_opt = tr->add_option("--seed", seed, "overrides config seed");
  tr->add_flag("--unit-loss-weights", unit_loss_weights,
               "set both loss weights to 1 (plain sum)");
  tr->add_option("--report-csv", report_csv, "write per-step log here");
  tr->add_option("--summary-json", summary_json, "write run summary here");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  ev->add_option("--checkpoint", checkpoint_path, "checkpoint path")->required();
  ev->add_option("--data", data_path, "evaluation corpus (JSONL)")->required();
  ev->add_option("--types", types_flag,
                 "comma-separated type names (default: checkpoint's)");
  ev->add_option("--threshold", threshold, "decoding threshold in (0,1)");

  auto* gc = app.add_subcommand("grad-check", "verify gradients of the composed loss");
  gc->add_option("--eps", eps, "central-difference step");
  gc->add_option("--coords", coords, "sampled coordinates");
  gc->add_option("--seed", seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) {
      return cmd_gen_data(rows_path, templates_path, out_path, denominator,
                          max_span_width, seed, delimiter);
    }
    if (check->parsed()) {
      return cmd_check_data(in_path);
    }
    if (pgnn->parsed()) {
      return cmd_pretrain_gnn(nodes_path, edges_path, out_path, kg_hidden,
                              gnn_config, delimiter);
    }
    if (ptr->parsed()) {
      return cmd_pretrain_transr(nodes_path, edges_path, out_path, transr_config,
                                 delimiter);
    }
    if (bt->parsed()) {
      return cmd_build_teacher(nodes_path, edges_path, gnn_path, transr_path,
                               out_path, delimiter);
    }
    if (tr->parsed()) {
      return cmd_train(data_path, teacher_path, out_path, config_path,
                       unit_loss_weights, seed_opt->count() > 0, seed, report_csv,
                       summary_json);
    }
    if (ev->parsed()) {
      return cmd_eval(checkpoint_path, data_path, types_flag, threshold);
    }
    if (gc->parsed()) {
      return cmd_grad_check(eps, coords, seed);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: data-validation: " << e.what() << "\n";
    return 3;
  } catch (const IntegrityError& e) {
    std::cerr << "error: integrity: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "error: numeric: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
