/*
 * SPDX-FileCopyrightText: Copyright (c) 2026 The redraft Authors. All rights reserved.
 * SPDX-License-Identifier: Apache-2.0
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// redraft command-line driver.
//
// Exit codes: 0 success, 1 equivalence or assertion failure, 2 usage or IO
// error.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "redraft/bench.hpp"
#include "redraft/decode.hpp"
#include "redraft/distill.hpp"
#include "redraft/gradcheck.hpp"
#include "redraft/markov_model.hpp"
#include "redraft/transformer.hpp"
#include "redraft/weights_io.hpp"

using namespace redraft;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Thrown for bad command-line combinations discovered after parsing.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct GlobalOptions {
  std::string base_weights;
  std::string drafter_weights;
  std::uint64_t seed = 0;
  std::string report;
  std::string csv;
};

std::vector<TokenId> parse_tokens(const std::string& text) {
  std::string cleaned = text;
  for (char& c : cleaned) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(cleaned);
  std::vector<TokenId> out;
  long long value = 0;
  while (in >> value) out.push_back(static_cast<TokenId>(value));
  if (!in.eof()) throw UsageError("cannot parse token list '" + text + "'");
  return out;
}

std::vector<std::vector<TokenId>> read_prompt_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open prompt file " + path);
  std::vector<std::vector<TokenId>> prompts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    prompts.push_back(parse_tokens(line));
  }
  return prompts;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write report " + path);
  out << j.dump(2) << '\n';
}

std::unique_ptr<BaseModel> require_base(const GlobalOptions& g) {
  if (g.base_weights.empty()) throw UsageError("--base-weights is required");
  return load_base_model(g.base_weights);
}

// RnnDrafter keeps a pointer to its parameters, so they live on the heap and
// stay put when a LoadedDrafter is moved.
struct LoadedDrafter {
  std::unique_ptr<DrafterParams> params;
  std::unique_ptr<DraftModel> model;
  std::string id;
};

LoadedDrafter load_or_init_drafter(const GlobalOptions& g, const BaseModel& base, bool mirror) {
  LoadedDrafter d;
  if (mirror) {
    d.model = std::make_unique<MirrorDrafter>(base, MirrorDrafter::Mode::kGreedy);
    d.id = "mirror";
    return d;
  }
  if (g.drafter_weights.empty()) {
    d.params = std::make_unique<DrafterParams>(init_drafter_params(drafter_dims_for(base), g.seed));
    d.id = "untrained(seed=" + std::to_string(g.seed) + ")";
  } else {
    d.params = std::make_unique<DrafterParams>(load_drafter(g.drafter_weights));
    d.id = g.drafter_weights;
  }
  check_drafter_shapes(*d.params, base.token_embeddings());
  d.model = std::make_unique<RnnDrafter>(*d.params, base.token_embeddings());
  return d;
}

void print_tokens(const std::vector<TokenId>& tokens) {
  for (std::size_t i = 0; i < tokens.size(); ++i) std::cout << (i ? " " : "") << tokens[i];
  std::cout << '\n';
}

// ---- init-base -----------------------------------------------------------

struct InitBaseOptions {
  std::string kind = "markov";
  std::string out;
  std::size_t order = 2;
  std::size_t vocab = 32;
  std::size_t d_model = 32;
  std::size_t layers = 2;
  std::size_t heads = 4;
  std::size_t d_ff = 256;
  std::size_t max_seq_len = 512;
  float peak = 5.0f;
};

int run_init_base(const GlobalOptions& g, const InitBaseOptions& o) {
  if (o.kind == "markov") {
    MarkovConfig mc;
    mc.order = o.order;
    mc.vocab_size = o.vocab;
    mc.d_model = o.d_model;
    mc.max_seq_len = o.max_seq_len;
    mc.peak = o.peak;
    mc.seed = g.seed;
    save_base_model(SyntheticMarkovModel(mc), o.out);
  } else {
    ModelConfig cfg;
    cfg.vocab_size = o.vocab;
    cfg.d_model = o.d_model;
    cfg.n_layers = o.layers;
    cfg.n_heads = o.heads;
    cfg.d_ff = o.d_ff;
    cfg.max_seq_len = o.max_seq_len;
    save_base_model(TinyTransformer::random(cfg, g.seed), o.out);
  }
  std::cerr << "wrote " << manifest_path(o.out).string() << '\n';
  return kExitOk;
}

// ---- generate ------------------------------------------------------------

struct GenerateOptions {
  std::string prompt;
  std::string prompt_file;
  std::size_t beam_width = 4;
  std::size_t beam_length = 5;
  std::size_t max_new_tokens = 64;
  std::optional<TokenId> stop_token;
  bool baseline = false;
  bool mirror = false;
};

int run_generate(const GlobalOptions& g, const GenerateOptions& o) {
  std::vector<std::vector<TokenId>> prompts;
  if (!o.prompt_file.empty()) {
    prompts = read_prompt_file(o.prompt_file);
  } else if (!o.prompt.empty()) {
    prompts.push_back(parse_tokens(o.prompt));
  } else {
    throw UsageError("one of --prompt or --prompt-file is required");
  }
  const auto base = require_base(g);
  DecodeConfig cfg;
  cfg.beam_width = o.beam_width;
  cfg.beam_length = o.beam_length;
  cfg.max_new_tokens = o.max_new_tokens;
  cfg.stop_token = o.stop_token;
  cfg.seed = g.seed;

  if (o.baseline) {
    RunReport r;
    r.base_model = g.base_weights;
    r.drafter = "none";
    r.max_new_tokens = cfg.max_new_tokens;
    r.seed = g.seed;
    r.prompts = prompts.size();
    const auto start = std::chrono::steady_clock::now();
    for (const auto& p : prompts) {
      const auto out = autoregressive_generate(*base, p, cfg);
      r.tokens_generated += out.size();
      print_tokens(out);
    }
    r.wall_ms_ar = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    r.steps = r.tokens_generated;
    r.tokens_per_step = r.steps ? 1.0 : 0.0;
    r.equivalence_ok = true;
    write_json(g.report, r.to_json());
    return kExitOk;
  }

  const auto drafter = load_or_init_drafter(g, *base, o.mirror);
  const RunOutputs out = run_generation(*base, *drafter.model, prompts, cfg, g.base_weights, drafter.id);
  for (const auto& tokens : out.speculative) print_tokens(tokens);
  write_json(g.report, out.report.to_json());
  if (!out.report.equivalence_ok) {
    std::cerr << "error: speculative output differs from autoregressive output\n";
    return kExitFailure;
  }
  return kExitOk;
}

// ---- bench ---------------------------------------------------------------

struct BenchOptions {
  std::vector<std::size_t> widths{1, 2, 4, 8};
  std::vector<std::size_t> lengths{2, 4, 5};
  std::size_t prompts = 20;
  std::size_t prompt_length = 16;
  std::size_t repeats = 1;
  std::size_t max_new_tokens = 64;
  bool mirror = false;
};

void check_sweep(const std::vector<std::size_t>& widths, const std::vector<std::size_t>& lengths) {
  if (widths.empty() || lengths.empty()) throw UsageError("--widths and --lengths must be non-empty");
  for (std::size_t v : widths) {
    if (v == 0) throw UsageError("--widths entries must be positive");
  }
  for (std::size_t v : lengths) {
    if (v == 0) throw UsageError("--lengths entries must be positive");
  }
}

int run_bench_cmd(const GlobalOptions& g, const BenchOptions& o) {
  check_sweep(o.widths, o.lengths);
  const auto base = require_base(g);
  const auto drafter = load_or_init_drafter(g, *base, o.mirror);
  const auto prompts = random_prompts(base->config().vocab_size, o.prompts, o.prompt_length, g.seed);
  BenchSpec spec;
  spec.widths = o.widths;
  spec.lengths = o.lengths;
  spec.repeats = o.repeats;
  spec.max_new_tokens = o.max_new_tokens;
  spec.seed = g.seed;
  const auto rows = run_bench(*base, *drafter.model, prompts, spec);
  if (g.csv.empty()) {
    write_bench_csv(std::cout, rows);
  } else {
    std::ofstream out(g.csv);
    if (!out) throw FormatError("cannot write csv " + g.csv);
    write_bench_csv(out, rows);
  }
  bool ok = true;
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    ok = ok && r.equivalence_ok;
    rows_json.push_back({{"beam_width", r.beam_width},
                         {"beam_length", r.beam_length},
                         {"repeat", r.repeat},
                         {"tokens_per_step", r.tokens_per_step},
                         {"speedup", r.speedup},
                         {"equivalence_ok", r.equivalence_ok}});
  }
  write_json(g.report, {{"base_model", g.base_weights},
                        {"drafter", drafter.id},
                        {"seed", g.seed},
                        {"prompts", o.prompts},
                        {"rows", rows_json}});
  if (!ok) {
    std::cerr << "error: at least one sweep cell failed the equivalence check\n";
    return kExitFailure;
  }
  return kExitOk;
}

// ---- distill-data / train-drafter -----------------------------------------

struct DataOptions {
  std::size_t horizon = 5;
  bool ground_truth = false;
  std::size_t corpus_sequences = 500;
  std::size_t corpus_length = 64;
  std::uint64_t corpus_seed = 7;
  float corpus_logit_scale = 2.0f;
  std::string dataset;
};

DistillDataset make_dataset(const BaseModel& base, const DataOptions& o) {
  if (!o.dataset.empty()) {
    auto data = read_dataset(o.dataset, base);
    if (data.horizon != o.horizon) {
      std::cerr << "note: dataset horizon " << data.horizon << " overrides --horizon\n";
    }
    return data;
  }
  CorpusSpec spec;
  spec.vocab_size = base.config().vocab_size;
  spec.sequences = o.corpus_sequences;
  spec.length = o.corpus_length;
  spec.seed = o.corpus_seed;
  spec.logit_scale = o.corpus_logit_scale;
  const auto corpus = synthetic_corpus(spec);
  return o.ground_truth ? ground_truth_dataset(base, corpus, o.horizon)
                        : build_distill_dataset(base, corpus, o.horizon);
}

int run_distill_data(const GlobalOptions& g, const DataOptions& o, const std::string& out) {
  const auto base = require_base(g);
  const auto data = make_dataset(*base, o);
  write_dataset(data, out);
  std::cerr << "wrote " << data.examples.size() << " examples to " << out;
  if (data.skipped) std::cerr << " (" << data.skipped << " positions skipped)";
  std::cerr << '\n';
  write_json(g.report, {{"base_model", g.base_weights},
                        {"kind", o.ground_truth ? "ground-truth" : "distilled"},
                        {"horizon", data.horizon},
                        {"examples", data.examples.size()},
                        {"skipped", data.skipped}});
  return kExitOk;
}

struct TrainOptions {
  std::string out;
  std::size_t epochs = 10;
  float learning_rate = 1e-3f;
  std::size_t batch_size = 32;
  std::size_t mlp_layers = 2;
};

int run_train(const GlobalOptions& g, const DataOptions& d, const TrainOptions& o) {
  const auto base = require_base(g);

  // Refuse to train with a broken gradient.
  const GradCheckResult check =
      finite_difference_check(random_gradcheck_instance(g.seed, d.horizon, 11, 6, 5, o.mlp_layers));
  if (check.max_rel_error >= 1e-4) {
    std::cerr << "error: gradient check failed at " << check.worst_coordinate << " (relative error "
              << check.max_rel_error << ")\n";
    return kExitFailure;
  }

  const auto data = make_dataset(*base, d);
  TrainConfig cfg;
  cfg.horizon = data.horizon;
  cfg.learning_rate = o.learning_rate;
  cfg.epochs = o.epochs;
  cfg.batch_size = o.batch_size;
  cfg.seed = g.seed;
  const auto init = init_drafter_params(drafter_dims_for(*base, o.mlp_layers), g.seed);
  const auto result = train_drafter(data, init, base->token_embeddings(), cfg);
  save_drafter(result.params, data.horizon, o.out);

  if (!g.csv.empty()) {
    std::ofstream csv(g.csv);
    if (!csv) throw FormatError("cannot write csv " + g.csv);
    csv << "epoch,loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) csv << e + 1 << ',' << result.epoch_loss[e] << '\n';
  }
  std::cerr << "loss " << result.initial_loss << " -> "
            << (result.epoch_loss.empty() ? result.initial_loss : result.epoch_loss.back()) << " over "
            << data.examples.size() << " examples; wrote " << manifest_path(o.out).string() << '\n';
  write_json(g.report, {{"base_model", g.base_weights},
                        {"dataset", d.dataset.empty() ? (d.ground_truth ? "ground-truth" : "distilled")
                                                      : d.dataset},
                        {"examples", data.examples.size()},
                        {"horizon", data.horizon},
                        {"optimizer", "adam"},
                        {"learning_rate", cfg.learning_rate},
                        {"beta1", cfg.beta1},
                        {"beta2", cfg.beta2},
                        {"epsilon", cfg.epsilon},
                        {"epochs", cfg.epochs},
                        {"batch_size", cfg.batch_size},
                        {"loss_reduction", "mean over tokens"},
                        {"seed", g.seed},
                        {"gradient_check_rel_error", check.max_rel_error},
                        {"initial_loss", result.initial_loss},
                        {"epoch_loss", result.epoch_loss}});
  return kExitOk;
}

// ---- verify-equivalence ---------------------------------------------------

struct EquivalenceOptions {
  std::size_t prompts = 100;
  std::size_t prompt_length = 16;
  std::size_t max_new_tokens = 24;
  std::vector<std::size_t> widths{1, 2, 4, 8};
  std::vector<std::size_t> lengths{2, 4, 5};
  bool corrupt_verifier = false;
};

int run_verify(const GlobalOptions& g, const EquivalenceOptions& o) {
  check_sweep(o.widths, o.lengths);
  // Without explicit weights the suite runs on a built-in pair of models.
  std::vector<std::unique_ptr<BaseModel>> bases;
  std::vector<LoadedDrafter> drafters;
  std::vector<std::string> names;
  if (!g.base_weights.empty()) {
    bases.push_back(load_base_model(g.base_weights));
    names.push_back(g.base_weights);
  } else {
    ModelConfig cfg;
    bases.push_back(std::make_unique<TinyTransformer>(TinyTransformer::random(cfg, g.seed)));
    names.emplace_back("random-transformer");
    bases.push_back(std::make_unique<SyntheticMarkovModel>(synthetic_markov_model(2, 32, g.seed)));
    names.emplace_back("synthetic-markov");
  }
  std::vector<EquivalenceTarget> targets;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    drafters.push_back(load_or_init_drafter(g, *bases[i], false));
  }
  for (std::size_t i = 0; i < bases.size(); ++i) {
    targets.push_back({names[i], bases[i].get(), drafters[i].model.get()});
  }

  EquivalenceSpec spec;
  spec.prompts = o.prompts;
  spec.prompt_length = o.prompt_length;
  spec.max_new_tokens = o.max_new_tokens;
  spec.widths = o.widths;
  spec.lengths = o.lengths;
  spec.seed = g.seed;
  spec.debug_drop_guaranteed = o.corrupt_verifier;
  if (o.prompts == 0) std::cerr << "warning: --prompts 0, nothing to check\n";
  const auto summary = verify_equivalence(targets, spec);
  std::cout << summary.passed << "/" << summary.total << " cases identical\n";
  nlohmann::json report = {{"total", summary.total}, {"passed", summary.passed}, {"seed", g.seed}};
  if (summary.first_failure) {
    report["first_failure"] = summary.first_failure->describe();
    std::cout << "FIRST FAILURE: " << summary.first_failure->describe() << '\n';
  }
  write_json(g.report, report);
  return summary.ok() ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"redraft: speculative decoding with a recurrent draft model"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--base-weights", g.base_weights, "Base model weight prefix (manifest + .bin)");
  app.add_option("--drafter-weights", g.drafter_weights, "Drafter weight prefix");
  app.add_option("--seed", g.seed, "Seed for initialisation, prompts and shuffling");
  app.add_option("--report", g.report, "Write a JSON report to this path");
  app.add_option("--csv", g.csv, "Write CSV output (bench rows or loss curve) to this path");

  InitBaseOptions init;
  auto* init_cmd = app.add_subcommand("init-base", "Create a base model with seeded random weights");
  init_cmd->add_option("--kind", init.kind, "markov or transformer")
      ->check(CLI::IsMember({"markov", "transformer"}));
  init_cmd->add_option("--out", init.out, "Output weight prefix")->required();
  init_cmd->add_option("--order", init.order, "Markov order (1 or 2)");
  init_cmd->add_option("--vocab", init.vocab, "Vocabulary size");
  init_cmd->add_option("--d-model", init.d_model, "Hidden width");
  init_cmd->add_option("--layers", init.layers, "Transformer layers");
  init_cmd->add_option("--heads", init.heads, "Attention heads");
  init_cmd->add_option("--d-ff", init.d_ff, "Feed-forward width");
  init_cmd->add_option("--max-seq-len", init.max_seq_len, "Context capacity");
  init_cmd->add_option("--peak", init.peak, "Markov top-1 logit gap");

  GenerateOptions gen;
  auto* gen_cmd = app.add_subcommand("generate", "Generate tokens for one or more prompts");
  gen_cmd->add_option("--prompt", gen.prompt, "Prompt token ids, comma or space separated");
  gen_cmd->add_option("--prompt-file", gen.prompt_file, "File with one prompt per line");
  gen_cmd->add_option("--beam-width", gen.beam_width)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--beam-length", gen.beam_length)->check(CLI::PositiveNumber);
  gen_cmd->add_option("--max-new-tokens", gen.max_new_tokens);
  gen_cmd->add_option("--stop-token", gen.stop_token);
  gen_cmd->add_flag("--baseline", gen.baseline, "Plain autoregressive greedy decoding");
  gen_cmd->add_flag("--mirror-drafter", gen.mirror, "Draft with the base model's own greedy choices");

  BenchOptions bench;
  auto* bench_cmd = app.add_subcommand("bench", "Sweep beam width and length");
  bench_cmd->add_option("--widths", bench.widths)->delimiter(',');
  bench_cmd->add_option("--lengths", bench.lengths)->delimiter(',');
  bench_cmd->add_option("--prompts", bench.prompts, "Number of seeded random prompts");
  bench_cmd->add_option("--prompt-length", bench.prompt_length);
  bench_cmd->add_option("--repeats", bench.repeats)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--max-new-tokens", bench.max_new_tokens);
  bench_cmd->add_flag("--mirror-drafter", bench.mirror);

  DataOptions data;
  auto add_data_options = [&data](CLI::App* cmd) {
    cmd->add_option("--horizon", data.horizon, "Teacher tokens per example (T)")->check(CLI::PositiveNumber);
    cmd->add_flag("--ground-truth", data.ground_truth, "Use corpus continuations instead of base rollouts");
    cmd->add_option("--corpus-sequences", data.corpus_sequences);
    cmd->add_option("--corpus-length", data.corpus_length);
    cmd->add_option("--corpus-seed", data.corpus_seed);
    cmd->add_option("--corpus-logit-scale", data.corpus_logit_scale);
  };

  std::string dataset_out;
  auto* distill_cmd = app.add_subcommand("distill-data", "Write a distillation dataset file");
  add_data_options(distill_cmd);
  distill_cmd->add_option("--out", dataset_out, "Dataset file")->required();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train-drafter", "Train a drafter and write its weights");
  add_data_options(train_cmd);
  train_cmd->add_option("--dataset", data.dataset, "Read examples from a dataset file");
  train_cmd->add_option("--out", train.out, "Output drafter weight prefix")->required();
  train_cmd->add_option("--epochs", train.epochs);
  train_cmd->add_option("--lr", train.learning_rate);
  train_cmd->add_option("--batch-size", train.batch_size)->check(CLI::PositiveNumber);
  train_cmd->add_option("--mlp-layers", train.mlp_layers);

  EquivalenceOptions eq;
  auto* eq_cmd = app.add_subcommand("verify-equivalence", "Check speculative output against greedy decoding");
  eq_cmd->add_option("--prompts", eq.prompts);
  eq_cmd->add_option("--prompt-length", eq.prompt_length);
  eq_cmd->add_option("--max-new-tokens", eq.max_new_tokens);
  eq_cmd->add_option("--widths", eq.widths)->delimiter(',');
  eq_cmd->add_option("--lengths", eq.lengths)->delimiter(',');
  eq_cmd->add_flag("--corrupt-verifier", eq.corrupt_verifier, "Test hook: drop the guaranteed token")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*init_cmd) return run_init_base(g, init);
    if (*gen_cmd) return run_generate(g, gen);
    if (*bench_cmd) return run_bench_cmd(g, bench);
    if (*distill_cmd) return run_distill_data(g, data, dataset_out);
    if (*train_cmd) return run_train(g, data, train);
    if (*eq_cmd) return run_verify(g, eq);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    // Contract and training failures are assertion failures; everything else
    // traces back to bad input files or flags.
    const bool assertion = dynamic_cast<const ContractError*>(&e) || dynamic_cast<const TrainingError*>(&e);
    return assertion ? kExitFailure : kExitUsage;
  }
  return kExitUsage;
}
