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

#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "stbir/config.hpp"
#include "stbir/datamodel.hpp"
#include "stbir/evaluation.hpp"
#include "stbir/mcfa.hpp"
#include "stbir/model.hpp"
#include "stbir/report.hpp"
#include "stbir/retrieval.hpp"

namespace stbir {

struct DataSplit {
  DatasetTable train;
  DatasetTable test;
  std::vector<std::string> warnings;
};

/// Manifest splits as recorded in the file, or a fresh synthetic table split by seed.
inline DataSplit load_data(const RunConfig& cfg) {
  DataSplit out;
  if (!cfg.manifest.empty()) {
    const DatasetTable table = load_manifest(cfg.manifest);
    out.train = select_split(table, Split::train);
    out.test = select_split(table, Split::test);
    if (out.train.size() < 2) throw DataError("manifest has fewer than 2 train samples");
  } else {
    auto s = split(synthesize_dataset(cfg.synth), cfg.test_fraction, cfg.seed);
    out.train = std::move(s.train);
    out.test = std::move(s.test);
    out.warnings = std::move(s.warnings);
  }
  for (int c : missing_train_categories(out.train)) {
    out.warnings.push_back("category " + std::to_string(c) + " has no train samples");
  }
  return out;
}

// ---------------------------------------------------------------------------
// synth

/// Synthesizes, splits and writes a manifest. Returns the written table.
inline DatasetTable cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_path) {
  validate(cfg);
  auto s = split(synthesize_dataset(cfg.synth), cfg.test_fraction, cfg.seed);
  for (const auto& w : s.warnings) std::cerr << "warning: " << w << '\n';
  DatasetTable table = merge(s.train, s.test);
  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  write_file_atomically(out_path, [&](std::ostream& out) { write_manifest(out, table); });
  return table;
}

// ---------------------------------------------------------------------------
// train

struct TrainOutcome {
  PipelineResult result;
  std::vector<std::filesystem::path> checkpoints;  // per stage, then final
};

inline Table epoch_table(const TrainReport& report) {
  Table t{{"stage", "active", "epoch", "aaml", "infonce", "triplet", "total"}, {}};
  for (const auto& s : report.stages) {
    for (const auto& e : s.epochs) {
      t.rows.push_back({std::to_string(e.stage + 1), e.active, std::to_string(e.epoch), format_real(e.aaml),
                        format_real(e.infonce), format_real(e.triplet), format_real(e.total)});
    }
  }
  return t;
}

inline Table stage_table(const TrainReport& report) {
  Table t{{"stage", "active", "sketch_checksum", "text_checksum", "image_checksum", "R@1", "R@5", "R@10"}, {}};
  for (const auto& s : report.stages) {
    std::vector<std::string> row{std::to_string(s.stage + 1), s.active, to_hex(s.checksums[0]),
                                 to_hex(s.checksums[1]), to_hex(s.checksums[2])};
    for (double v : s.eval ? std::vector<double>{s.eval->r1, s.eval->r5, s.eval->r10} : std::vector<double>{}) {
      row.push_back(format_recall(v));
    }
    while (row.size() < t.header.size()) row.emplace_back("");
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Table timing_table(const TrainReport& report) {
  Table t{{"stage", "epoch", "elapsed_seconds"}, {}};
  for (const auto& s : report.stages) {
    for (const auto& e : s.epochs) {
      t.rows.push_back({std::to_string(e.stage + 1), std::to_string(e.epoch), format_real(e.elapsed_seconds)});
    }
  }
  return t;
}

/// Trains per the config and writes checkpoints and reports into cfg.output_dir:
///   stage<k>_<modality>.ckpt, final.ckpt, epochs.csv, stages.csv, timing.csv, config.resolved
/// Everything except timing.csv is a deterministic function of the config.
inline TrainOutcome cmd_train(const RunConfig& cfg, bool verbose = false) {
  validate(cfg);
  const DataSplit data = load_data(cfg);
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << '\n';

  StepObserver observer;
  if (verbose) {
    observer = [](const StepEvent& e) {
      if (e.step % 64 == 0) {
        std::cerr << "stage " << e.stage + 1 << " epoch " << e.epoch << " step " << e.step << " t=" << e.t
                  << " loss=" << e.total << '\n';
      }
    };
  }
  TrainOutcome outcome{train(data.train, data.test.empty() ? nullptr : &data.test, cfg.train, observer), {}};

  const std::filesystem::path dir = cfg.output_dir;
  std::filesystem::create_directories(dir);
  const auto& report = outcome.result.report;
  for (std::size_t i = 0; i < report.stages.size(); ++i) {
    const auto path = dir / ("stage" + std::to_string(report.stages[i].stage + 1) + "_" + report.stages[i].active + ".ckpt");
    save_checkpoint(path, outcome.result.stage_snapshots[i]);
    outcome.checkpoints.push_back(path);
  }
  save_checkpoint(dir / "final.ckpt", outcome.result.model);
  outcome.checkpoints.push_back(dir / "final.ckpt");
  write_table(dir / "epochs.csv", epoch_table(report));
  write_table(dir / "stages.csv", stage_table(report));
  write_table(dir / "timing.csv", timing_table(report));
  write_file_atomically(dir / "config.resolved", [&](std::ostream& out) { out << write_config(cfg); });
  return outcome;
}

// ---------------------------------------------------------------------------
// eval

/// Recall table over the manifest's test split (all records if it has none).
inline Table cmd_eval(const std::filesystem::path& checkpoint, const std::string& manifest,
                      const std::vector<QueryMask>& masks) {
  const Model model = load_checkpoint(checkpoint);
  const DatasetTable table = load_manifest(manifest);
  DatasetTable eval = select_split(table, Split::test);
  if (eval.empty()) eval = table;
  if (eval.dims != model.view_dims()) throw ShapeError("manifest view dims do not match the checkpoint");
  Table t{{"query", "R@1", "R@5", "R@10"}, {}};
  for (QueryMask mask : masks) {
    const RecallRow r = evaluate(model, eval, mask);
    t.rows.push_back({to_string(mask), format_recall(r.r1), format_recall(r.r5), format_recall(r.r10)});
  }
  return t;
}

// ---------------------------------------------------------------------------
// ablate

enum class Sweep { order, modules };

inline std::string arrow_order(const std::string& order) {
  std::string out;
  for (char c : order) {
    if (!out.empty()) out += "->";
    out += c;
  }
  return out;
}

namespace detail {

inline std::vector<std::string> recall_cells(const PipelineResult& r, const DataSplit& data, const TrainConfig& cfg) {
  const QueryMask mask = cfg.use_sketch && cfg.use_text ? QueryMask::fused
                         : cfg.use_sketch               ? QueryMask::sketch_only
                                                        : QueryMask::text_only;
  std::vector<std::string> cells;
  for (const DatasetTable* table : {&data.test, &data.train}) {
    if (table->empty()) {
      cells.insert(cells.end(), 3, "");
      continue;
    }
    const RecallRow row = evaluate(r.model, *table, mask);
    cells.push_back(format_recall(row.r1));
    cells.push_back(format_recall(row.r5));
    cells.push_back(format_recall(row.r10));
  }
  return cells;
}

inline const std::vector<std::string> kRecallColumns{"test_R@1",  "test_R@5",  "test_R@10",
                                                     "train_R@1", "train_R@5", "train_R@10"};

}  // namespace detail

/// Trains every stage order (or every module ablation) and tabulates recall on both splits.
inline Table cmd_ablate(const RunConfig& cfg, Sweep sweep, bool verbose = false) {
  validate(cfg);
  const DataSplit data = load_data(cfg);
  const DatasetTable* eval = data.test.empty() ? nullptr : &data.test;
  auto log = [&](const std::string& what) {
    if (verbose) std::cerr << "ablate: " << what << '\n';
  };

  if (sweep == Sweep::order) {
    Table t{{"order"}, {}};
    t.header.insert(t.header.end(), detail::kRecallColumns.begin(), detail::kRecallColumns.end());
    for (const auto& order : all_stage_orders()) {
      log(order);
      TrainConfig c = cfg.train;
      c.order = order;
      c.staged = true;
      const auto r = train(data.train, eval, c);
      std::vector<std::string> row{arrow_order(order)};
      const auto cells = detail::recall_cells(r, data, c);
      row.insert(row.end(), cells.begin(), cells.end());
      t.rows.push_back(std::move(row));
    }
    return t;
  }

  struct Variant {
    bool text, sketch, staged, ckfso, cldre;
  };
  const std::vector<Variant> variants{
      {false, true, true, true, true},  {true, false, true, true, true},  {true, true, false, true, true},
      {true, true, true, false, true},  {true, true, true, true, false},  {true, true, true, true, true},
  };
  Table t{{"text", "sketch", "mcfa", "ckfso", "cldre"}, {}};
  t.header.insert(t.header.end(), detail::kRecallColumns.begin(), detail::kRecallColumns.end());
  auto flag = [](bool b) { return std::string(b ? "1" : "0"); };
  for (const auto& v : variants) {
    TrainConfig c = cfg.train;
    c.use_text = v.text;
    c.use_sketch = v.sketch;
    c.staged = v.staged;
    c.ckfso_enabled = v.ckfso;
    c.cldre_enabled = v.cldre;
    log("text=" + flag(v.text) + " sketch=" + flag(v.sketch) + " mcfa=" + flag(v.staged) +
        " ckfso=" + flag(v.ckfso) + " cldre=" + flag(v.cldre));
    const auto r = train(data.train, eval, c);
    std::vector<std::string> row{flag(v.text), flag(v.sketch), flag(v.staged), flag(v.ckfso), flag(v.cldre)};
    const auto cells = detail::recall_cells(r, data, c);
    row.insert(row.end(), cells.begin(), cells.end());
    t.rows.push_back(std::move(row));
  }
  return t;
}

// ---------------------------------------------------------------------------
// retrieve / export-embeddings

/// Parses "v1,v2,..." into numbers; anything else is a usage error.
inline std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string v = detail::trim(item);
    if (v.empty()) throw ConfigError("malformed vector '" + text + "': empty entry");
    try {
      out.push_back(detail::parse_real(v));
    } catch (const ConfigError&) {
      throw ConfigError("malformed vector '" + text + "': '" + v + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError("malformed vector: no entries");
  return out;
}

/// Ranks every manifest record's image against one composite query.
inline Table cmd_retrieve(const std::filesystem::path& checkpoint, const std::string& gallery_manifest,
                          const std::vector<double>& sketch, const std::vector<double>& text, std::size_t k) {
  const Model model = load_checkpoint(checkpoint);
  const DatasetTable gallery_table = load_manifest(gallery_manifest);
  const ViewDims dims = model.view_dims();
  if (gallery_table.dims != dims) throw ShapeError("gallery manifest view dims do not match the checkpoint");
  if (sketch.size() != dims.sketch) {
    throw ShapeError("sketch vector has " + std::to_string(sketch.size()) + " entries, encoder expects " +
                     std::to_string(dims.sketch));
  }
  if (text.size() != dims.text) {
    throw ShapeError("text vector has " + std::to_string(text.size()) + " entries, encoder expects " +
                     std::to_string(dims.text));
  }
  const GalleryIndex gallery = build_gallery(model, gallery_table);
  const Matrix query = fuse(encode(model, Modality::sketch, Matrix::from_rows({sketch})),
                            encode(model, Modality::text, Matrix::from_rows({text})));
  const RetrievalResult result = top_k(score(query, gallery), gallery.ids(), k);
  Table t{{"rank", "instance_id", "score"}, {}};
  for (std::size_t r = 0; r < k; ++r) {
    t.rows.push_back({std::to_string(r + 1), std::to_string(result.ids[0][r]), format_real(result.scores[0][r])});
  }
  return t;
}

enum class SplitFilter { train, test, all };

inline SplitFilter split_filter_from_string(const std::string& s) {
  if (s == "train") return SplitFilter::train;
  if (s == "test") return SplitFilter::test;
  if (s == "all") return SplitFilter::all;
  throw ConfigError("split must be train, test or all");
}

/// Writes embeddings for `kind` ("sketch", "text", "image" or "fused") of the selected records.
inline EmbeddingSet cmd_export_embeddings(const std::filesystem::path& checkpoint, const std::string& manifest,
                                          const std::string& kind, SplitFilter filter,
                                          const std::filesystem::path& out_path) {
  const Model model = load_checkpoint(checkpoint);
  DatasetTable table = load_manifest(manifest);
  if (filter != SplitFilter::all) table = select_split(table, filter == SplitFilter::train ? Split::train : Split::test);
  if (table.empty()) throw DataError("no records selected for export");
  if (table.dims != model.view_dims()) throw ShapeError("manifest view dims do not match the checkpoint");

  EmbeddingSet set;
  set.ids = instance_ids(table);
  if (kind == "fused") {
    set.embeddings = query_embeddings(model, table, QueryMask::fused);
  } else {
    const Modality m = modality_from_string(kind);
    const ViewKind view = m == Modality::sketch ? ViewKind::sketch : m == Modality::text ? ViewKind::text : ViewKind::image;
    set.embeddings = encode(model, m, view_matrix(table, view));
  }
  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  write_file_atomically(out_path, [&](std::ostream& out) { write_embeddings(out, set.embeddings, set.ids); }, true);
  return set;
}

}  // namespace stbir
