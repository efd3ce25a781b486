// Copyright 2026 The STBIR Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stbir/stbir.hpp"

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::vector<std::string> overrides;
};

stbir::RunConfig resolve_config(const GlobalOptions& g) {
  stbir::RunConfig cfg;
  if (!g.config_path.empty()) cfg = stbir::load_config(g.config_path);
  std::vector<std::string> errors;
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      errors.push_back("--set expects key=value, got '" + kv + "'");
      continue;
    }
    try {
      stbir::set_config_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    } catch (const stbir::Error& e) {
      errors.emplace_back(e.what());
    }
  }
  if (g.seed) cfg.apply_seed(*g.seed);
  if (!g.out_dir.empty()) cfg.output_dir = g.out_dir;
  for (auto& e : stbir::validation_errors(cfg)) errors.push_back(std::move(e));
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw stbir::ConfigError(msg);
  }
  return cfg;
}

void emit(const stbir::Table& table, const std::filesystem::path& path, bool to_file) {
  stbir::write_csv(std::cout, table);
  if (to_file) {
    std::filesystem::create_directories(path.parent_path());
    stbir::write_table(path, table);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sketch + text composite-query image retrieval: training, evaluation and ablations"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Key-value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Global seed (overrides the config)");
  app.add_option("--out", g.out_dir, "Output directory (overrides output.dir)");
  app.add_option("--set", g.overrides, "Override a config key, e.g. --set mcfa.order=IST")->take_all();

  auto* synth = app.add_subcommand("synth", "Write a synthetic tri-modal manifest");
  std::string synth_output;
  synth->add_option("-o,--output", synth_output, "Manifest path (default <out>/manifest.jsonl)");

  auto* train = app.add_subcommand("train", "Run the staged training pipeline");
  std::string train_manifest;
  bool verbose = false;
  train->add_option("--manifest", train_manifest, "Train/test manifest (default: synthesize)");
  train->add_flag("-v,--verbose", verbose, "Progress on stderr");

  auto* eval = app.add_subcommand("eval", "Recall@1/5/10 of a checkpoint on a manifest's test split");
  std::string eval_ckpt, eval_manifest, eval_mask = "all";
  eval->add_option("--checkpoint", eval_ckpt)->required()->check(CLI::ExistingFile);
  eval->add_option("--manifest", eval_manifest)->required()->check(CLI::ExistingFile);
  eval->add_option("--mask", eval_mask, "sketch-only | text-only | fused | all");

  auto* ablate = app.add_subcommand("ablate", "Stage-order and module ablation sweeps");
  std::string sweep = "both";
  std::string ablate_manifest;
  ablate->add_option("--sweep", sweep, "order | modules | both")->check(CLI::IsMember({"order", "modules", "both"}));
  ablate->add_option("--manifest", ablate_manifest, "Train/test manifest (default: synthesize)");
  ablate->add_flag("-v,--verbose", verbose, "Progress on stderr");

  auto* retrieve = app.add_subcommand("retrieve", "Rank a manifest's images for one sketch + text query");
  std::string ret_ckpt, ret_manifest, ret_sketch, ret_text;
  std::size_t ret_k = 10;
  retrieve->add_option("--checkpoint", ret_ckpt)->required()->check(CLI::ExistingFile);
  retrieve->add_option("--manifest", ret_manifest, "Gallery manifest")->required()->check(CLI::ExistingFile);
  retrieve->add_option("--sketch", ret_sketch, "Comma-separated sketch view")->required();
  retrieve->add_option("--text", ret_text, "Comma-separated text view")->required();
  retrieve->add_option("-k", ret_k, "Number of results");

  auto* exp = app.add_subcommand("export-embeddings", "Write embeddings in the binary embedding format");
  std::string exp_ckpt, exp_manifest, exp_modality = "image", exp_split = "all", exp_output;
  exp->add_option("--checkpoint", exp_ckpt)->required()->check(CLI::ExistingFile);
  exp->add_option("--manifest", exp_manifest)->required()->check(CLI::ExistingFile);
  exp->add_option("--modality", exp_modality, "sketch | text | image | fused")
      ->check(CLI::IsMember({"sketch", "text", "image", "fused"}));
  exp->add_option("--split", exp_split, "train | test | all")->check(CLI::IsMember({"train", "test", "all"}));
  exp->add_option("-o,--output", exp_output, "Output file (default <out>/embeddings_<modality>.bin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // help and version exit 0; every other command-line mistake is a usage error
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    const bool out_given = !g.out_dir.empty();
    if (synth->parsed()) {
      const auto cfg = resolve_config(g);
      const std::filesystem::path path =
          synth_output.empty() ? std::filesystem::path(cfg.output_dir) / "manifest.jsonl" : std::filesystem::path(synth_output);
      const auto table = stbir::cmd_synth(cfg, path);
      std::cout << "wrote " << table.size() << " samples to " << path.string() << '\n';
    } else if (train->parsed()) {
      auto cfg = resolve_config(g);
      if (!train_manifest.empty()) cfg.manifest = train_manifest;
      const auto outcome = stbir::cmd_train(cfg, verbose);
      stbir::write_csv(std::cout, stbir::stage_table(outcome.result.report));
      std::cout << "final checkpoint: " << outcome.checkpoints.back().string() << '\n';
    } else if (eval->parsed()) {
      std::vector<stbir::QueryMask> masks;
      if (eval_mask == "all") {
        masks = {stbir::QueryMask::sketch_only, stbir::QueryMask::text_only, stbir::QueryMask::fused};
      } else {
        masks = {stbir::query_mask_from_string(eval_mask)};
      }
      emit(stbir::cmd_eval(eval_ckpt, eval_manifest, masks), std::filesystem::path(g.out_dir) / "eval.csv",
           out_given);
    } else if (ablate->parsed()) {
      auto cfg = resolve_config(g);
      if (!ablate_manifest.empty()) cfg.manifest = ablate_manifest;
      const std::filesystem::path dir = cfg.output_dir;
      if (sweep == "order" || sweep == "both") {
        emit(stbir::cmd_ablate(cfg, stbir::Sweep::order, verbose), dir / "ablate_order.csv", true);
      }
      if (sweep == "modules" || sweep == "both") {
        if (sweep == "both") std::cout << '\n';
        emit(stbir::cmd_ablate(cfg, stbir::Sweep::modules, verbose), dir / "ablate_modules.csv", true);
      }
    } else if (retrieve->parsed()) {
      const auto sketch = stbir::parse_vector(ret_sketch);
      const auto text = stbir::parse_vector(ret_text);
      stbir::write_csv(std::cout, stbir::cmd_retrieve(ret_ckpt, ret_manifest, sketch, text, ret_k));
    } else if (exp->parsed()) {
      const std::filesystem::path path =
          exp_output.empty() ? std::filesystem::path(g.out_dir.empty() ? "out" : g.out_dir) /
                                   ("embeddings_" + exp_modality + ".bin")
                             : std::filesystem::path(exp_output);
      const auto set = stbir::cmd_export_embeddings(exp_ckpt, exp_manifest, exp_modality,
                                                    stbir::split_filter_from_string(exp_split), path);
      std::cout << "wrote " << set.ids.size() << " x " << set.embeddings.cols() << " embeddings to "
                << path.string() << '\n';
    }
  } catch (const stbir::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
