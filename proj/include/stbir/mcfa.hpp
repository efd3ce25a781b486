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

#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "stbir/ckfso.hpp"
#include "stbir/cldre.hpp"
#include "stbir/datamodel.hpp"
#include "stbir/encoders.hpp"
#include "stbir/evaluation.hpp"
#include "stbir/losses.hpp"
#include "stbir/model.hpp"

namespace stbir {

// ---------------------------------------------------------------------------
// AdamW

struct OptimizerConfig {
  double learning_rate = 2e-5;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("optimizer.learning_rate must be > 0");
    if (!(weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be >= 0");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("optimizer.beta1 must lie in (0, 1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("optimizer.beta2 must lie in (0, 1)");
    if (!(eps > 0.0)) throw ConfigError("optimizer.eps must be > 0");
  }
};

/// One AdamW update. `step` is the 1-based step number used for bias correction.
/// Weight decay is decoupled: p <- p - lr * wd * p, independent of the gradient.
inline void adamw_step(std::span<double> params, std::span<const double> grads, std::span<double> first_moment,
                       std::span<double> second_moment, std::int64_t step, const OptimizerConfig& cfg) {
  if (grads.size() != params.size() || first_moment.size() != params.size() ||
      second_moment.size() != params.size()) {
    throw ShapeError("adamw_step: parameter, gradient and moment sizes differ");
  }
  if (step < 1) throw RangeError("adamw_step: step must be >= 1");
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    first_moment[i] = cfg.beta1 * first_moment[i] + (1.0 - cfg.beta1) * g;
    second_moment[i] = cfg.beta2 * second_moment[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = first_moment[i] / bias1;
    const double v_hat = second_moment[i] / bias2;
    params[i] -= cfg.learning_rate * cfg.weight_decay * params[i];
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

/// Steps a trainable encoder. Frozen encoders are left untouched, step count included.
inline void apply_adamw(Encoder& enc, const EncoderParams& grads, const OptimizerConfig& cfg) {
  if (!enc.trainable) return;
  ++enc.step_count;
  adamw_step(enc.params.w1.values(), grads.w1.values(), enc.first_moment.w1.values(),
             enc.second_moment.w1.values(), enc.step_count, cfg);
  adamw_step(enc.params.b1.values(), grads.b1.values(), enc.first_moment.b1.values(),
             enc.second_moment.b1.values(), enc.step_count, cfg);
  adamw_step(enc.params.w2.values(), grads.w2.values(), enc.first_moment.w2.values(),
             enc.second_moment.w2.values(), enc.step_count, cfg);
  adamw_step(enc.params.b2.values(), grads.b2.values(), enc.first_moment.b2.values(),
             enc.second_moment.b2.values(), enc.step_count, cfg);
}

/// Steps a center bank and re-projects its rows onto the unit sphere.
inline void apply_adamw(CenterBank& bank, const Matrix& grads, const OptimizerConfig& cfg) {
  ++bank.step_count;
  adamw_step(bank.centers.values(), grads.values(), bank.first_moment.values(), bank.second_moment.values(),
             bank.step_count, cfg);
  normalize_centers(bank);
}

// ---------------------------------------------------------------------------
// Stage plans

/// One alignment stage: only `active` trains, and only its features get noise and the margin loss.
struct StageSpec {
  Modality active = Modality::sketch;
  int epochs = 16;

  Modality cldre_target() const noexcept { return active; }
  Modality ckfso_target() const noexcept { return active; }

  friend bool operator==(const StageSpec&, const StageSpec&) = default;
};

struct StagePlan {
  std::vector<StageSpec> stages;

  std::string order() const {
    std::string out;
    for (const auto& s : stages) out += modality_letter(s.active);
    return out;
  }
};

/// `order` is a permutation of "SIT", e.g. "SIT" trains sketch, then image, then text.
inline StagePlan build_plan(const std::string& order, int epochs_per_stage) {
  if (epochs_per_stage < 1) throw ConfigError("epochs_per_stage must be >= 1");
  if (order.size() != 3) throw ConfigError("stage order must have 3 letters, got '" + order + "'");
  StagePlan plan;
  std::set<char> seen;
  for (char c : order) {
    Modality m{};
    switch (c) {
      case 'S': m = Modality::sketch; break;
      case 'I': m = Modality::image; break;
      case 'T': m = Modality::text; break;
      default: throw ConfigError("stage order '" + order + "' has unknown letter '" + std::string(1, c) + "'");
    }
    if (!seen.insert(c).second) throw ConfigError("stage order '" + order + "' repeats '" + std::string(1, c) + "'");
    plan.stages.push_back({m, epochs_per_stage});
  }
  return plan;
}

/// All six stage orders, in the listing order of the ordering study.
inline const std::array<std::string, 6>& all_stage_orders() {
  static const std::array<std::string, 6> orders{"IST", "ITS", "TSI", "TIS", "STI", "SIT"};
  return orders;
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
  std::size_t hidden_dim = 128;
  std::size_t embed_dim = 64;
  bool shared_bank = true;

  AamlConfig aaml;
  LossWeights weights;
  ContrastiveConfig contrastive;
  OptimizerConfig optimizer;

  double cldre_alpha = 0.2;
  bool cldre_enabled = true;
  bool ckfso_enabled = true;

  std::string order = "SIT";
  int epochs_per_stage = 16;
  bool staged = true;  // false: joint training of every encoder at once

  std::size_t batch_size = 32;
  bool use_sketch = true;
  bool use_text = true;
  std::uint64_t seed = 0;

  void validate() const {
    aaml.validate();
    weights.validate();
    contrastive.validate();
    optimizer.validate();
    if (!(cldre_alpha >= 0.0)) throw ConfigError("cldre.alpha must be >= 0");
    if (batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
    if (!use_sketch && !use_text) throw ConfigError("at least one query modality must be enabled");
    if (hidden_dim < 1 || embed_dim < 1) throw ConfigError("encoder dims must be >= 1");
    build_plan(order, epochs_per_stage);
  }
};

struct EpochRecord {
  std::size_t stage = 0;
  std::string active;  // modality name, or "joint"
  int epoch = 0;       // 1-based within the stage
  double aaml = 0.0;
  double infonce = 0.0;
  double triplet = 0.0;
  double total = 0.0;
  double elapsed_seconds = 0.0;  // wall clock; excluded from deterministic reports
};

struct StageReport {
  std::size_t stage = 0;
  std::string active;
  std::vector<EpochRecord> epochs;
  std::array<std::uint64_t, 3> checksums{};  // per modality, after the stage
  std::optional<RecallRow> eval;             // fused-query recall on the held-out split
};

struct TrainReport {
  std::vector<StageReport> stages;
};

/// Per-batch hook for observers (tests, progress output).
struct StepEvent {
  std::size_t stage = 0;
  int epoch = 0;
  std::int64_t step = 0;
  double t = 0.0;
  double total = 0.0;
};
using StepObserver = std::function<void(const StepEvent&)>;

struct StepLosses {
  double aaml = 0.0;
  double infonce = 0.0;
  double triplet = 0.0;
  double total = 0.0;
};

/// Modalities that train (and receive noise + margin loss) in one step.
using ActiveSet = std::array<bool, 3>;

/// One optimization step on a batch. Features of active modalities are noised at
/// progress t; the composite query is the sum of the enabled query modalities.
inline StepLosses train_step(Model& model, const DatasetTable& train, const Batch& batch, const ActiveSet& active,
                             double t, Rng& noise_rng, const TrainConfig& cfg) {
  const DatasetTable rows{[&] {
                            std::vector<TriModalSample> s;
                            s.reserve(batch.size());
                            for (std::size_t i : batch) s.push_back(train.samples[i]);
                            return s;
                          }(),
                          train.num_categories, train.dims};
  const std::vector<int> labels = categories(rows);
  const std::array<Matrix, 3> views{view_matrix(rows, ViewKind::sketch), view_matrix(rows, ViewKind::text),
                                    view_matrix(rows, ViewKind::image)};
  const std::array<bool, 3> in_use{cfg.use_sketch, cfg.use_text, true};

  std::array<Matrix, 3> feats;
  for (Modality m : kModalities) {
    const auto k = index_of(m);
    if (!in_use[k]) continue;
    feats[k] = encode(model.encoder(m), views[k]);
    if (active[k] && cfg.cldre_enabled) feats[k] = inject(feats[k], {t, cfg.cldre_alpha}, noise_rng);
  }

  StepLosses losses;
  std::array<Matrix, 3> grads;
  for (Modality m : kModalities) {
    const auto k = index_of(m);
    if (in_use[k]) grads[k] = Matrix(feats[k].rows(), feats[k].cols());
  }
  std::vector<Matrix> bank_grads;
  for (const auto& bank : model.banks) bank_grads.emplace_back(bank.centers.rows(), bank.centers.cols());
  std::vector<bool> bank_touched(model.banks.size(), false);

  if (cfg.ckfso_enabled) {
    std::size_t targets = 0;
    for (Modality m : kModalities) targets += active[index_of(m)] && in_use[index_of(m)];
    for (Modality m : kModalities) {
      const auto k = index_of(m);
      if (!active[k] || !in_use[k]) continue;
      const double share = 1.0 / static_cast<double>(targets);
      const auto r = aaml_loss(feats[k], labels, model.bank_for(m), cfg.aaml);
      losses.aaml += share * r.loss;
      add_scaled(grads[k], r.grad_features, share * cfg.weights.lambda1);
      const std::size_t b = model.shared_bank() ? 0 : k;
      add_scaled(bank_grads[b], r.grad_centers, share * cfg.weights.lambda1);
      bank_touched[b] = true;
    }
  }

  const std::size_t ks = index_of(Modality::sketch), kt = index_of(Modality::text), ki = index_of(Modality::image);
  const Matrix composite = cfg.use_sketch && cfg.use_text ? fuse(feats[ks], feats[kt])
                           : cfg.use_sketch               ? feats[ks]
                                                          : feats[kt];
  const PairLoss nce = info_nce(composite, feats[ki], cfg.contrastive.temperature);
  const PairLoss trip = triplet(composite, feats[ki], cfg.contrastive.triplet_margin);
  losses.infonce = nce.loss;
  losses.triplet = trip.loss;
  losses.total = total_loss(losses.aaml, losses.infonce, losses.triplet, cfg.weights);

  Matrix grad_query = nce.grad_queries;
  for (double& v : grad_query.values()) v *= cfg.weights.lambda2;
  add_scaled(grad_query, trip.grad_queries, cfg.weights.lambda3);
  add_scaled(grads[ki], nce.grad_gallery, cfg.weights.lambda2);
  add_scaled(grads[ki], trip.grad_gallery, cfg.weights.lambda3);
  if (cfg.use_sketch) add_scaled(grads[ks], grad_query, 1.0);
  if (cfg.use_text) add_scaled(grads[kt], grad_query, 1.0);

  for (Modality m : kModalities) {
    const auto k = index_of(m);
    if (!active[k] || !in_use[k]) continue;
    Encoder& enc = model.encoder(m);
    apply_adamw(enc, backward(enc, views[k], grads[k]).params, cfg.optimizer);
  }
  for (std::size_t b = 0; b < model.banks.size(); ++b) {
    if (bank_touched[b]) apply_adamw(model.banks[b], bank_grads[b], cfg.optimizer);
  }
  return losses;
}

namespace detail {

inline std::array<std::uint64_t, 3> encoder_checksums(const Model& model) {
  return {checksum(model.encoder(Modality::sketch)), checksum(model.encoder(Modality::text)),
          checksum(model.encoder(Modality::image))};
}

/// Shared epoch loop for staged and joint runs.
inline StageReport run_epochs(Model& model, const DatasetTable& train, const DatasetTable* eval,
                              const ActiveSet& active, int epochs, std::size_t stage_index, const std::string& label,
                              const TrainConfig& cfg, const StepObserver& observer) {
  if (train.size() < 2) throw DataError("training split needs at least 2 samples");
  const std::uint64_t batch_seed = mix_seed(cfg.seed, 2000 + stage_index);
  Rng noise_rng(mix_seed(cfg.seed, 1000 + stage_index));

  const auto batches_per_epoch = static_cast<std::int64_t>(make_batches(train, cfg.batch_size, batch_seed, 0).size());
  const std::int64_t total_steps = std::max<std::int64_t>(1, batches_per_epoch * epochs - 1);

  StageReport report;
  report.stage = stage_index;
  report.active = label;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const auto batches = make_batches(train, cfg.batch_size, batch_seed, static_cast<std::uint64_t>(epoch));
    EpochRecord rec;
    rec.stage = stage_index;
    rec.active = label;
    rec.epoch = epoch + 1;
    for (const auto& batch : batches) {
      const double t = progress(std::min(step, total_steps), total_steps);
      const StepLosses l = train_step(model, train, batch, active, t, noise_rng, cfg);
      if (!std::isfinite(l.total)) throw NumericError("non-finite training loss");
      rec.aaml += l.aaml;
      rec.infonce += l.infonce;
      rec.triplet += l.triplet;
      rec.total += l.total;
      if (observer) observer({stage_index, epoch + 1, step, t, l.total});
      ++step;
    }
    const auto n = static_cast<double>(batches.size());
    rec.aaml /= n;
    rec.infonce /= n;
    rec.triplet /= n;
    rec.total /= n;
    rec.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    report.epochs.push_back(rec);
  }
  report.checksums = encoder_checksums(model);
  if (eval != nullptr && !eval->empty()) {
    report.eval = evaluate(model, *eval, cfg.use_sketch && cfg.use_text ? QueryMask::fused
                                         : cfg.use_sketch               ? QueryMask::sketch_only
                                                                        : QueryMask::text_only);
  }
  return report;
}

}  // namespace detail

/// Runs one alignment stage. The active encoder must be the only trainable one;
/// the other encoders are verified bit-identical afterwards.
inline StageReport run_stage(const StageSpec& stage, std::size_t stage_index, const DatasetTable& train,
                             const DatasetTable* eval, Model& model, const TrainConfig& cfg,
                             const StepObserver& observer = {}) {
  for (Modality m : kModalities) {
    const bool should_train = m == stage.active;
    if (model.encoder(m).trainable != should_train) {
      throw StateError(std::string("stage ") + to_string(stage.active) + ": encoder " + to_string(m) +
                       (should_train ? " is frozen" : " is trainable"));
    }
  }
  const auto before = detail::encoder_checksums(model);
  ActiveSet active{};
  active[index_of(stage.active)] = true;
  StageReport report =
      detail::run_epochs(model, train, eval, active, stage.epochs, stage_index, to_string(stage.active), cfg, observer);
  for (Modality m : kModalities) {
    if (m != stage.active && report.checksums[index_of(m)] != before[index_of(m)]) {
      throw StateError(std::string("frozen encoder ") + to_string(m) + " changed during stage");
    }
  }
  return report;
}

struct PipelineResult {
  Model model;
  TrainReport report;
  std::vector<Model> stage_snapshots;  // model after each stage
};

inline Model init_model_for(const DatasetTable& train, const TrainConfig& cfg) {
  return init_model({train.dims, cfg.hidden_dim, cfg.embed_dim, static_cast<std::size_t>(train.num_categories),
                     cfg.shared_bank},
                    cfg.seed);
}

/// Trains the stages of `plan` in order. Stages whose modality is disabled as a
/// query input are skipped.
inline PipelineResult run_pipeline(const StagePlan& plan, const DatasetTable& train, const DatasetTable* eval,
                                   const TrainConfig& cfg, const StepObserver& observer = {}) {
  cfg.validate();
  PipelineResult result{init_model_for(train, cfg), {}, {}};
  for (std::size_t s = 0; s < plan.stages.size(); ++s) {
    const auto& stage = plan.stages[s];
    if ((stage.active == Modality::sketch && !cfg.use_sketch) || (stage.active == Modality::text && !cfg.use_text)) {
      continue;
    }
    for (Modality m : kModalities) set_trainable(result.model.encoder(m), m == stage.active);
    result.report.stages.push_back(run_stage(stage, s, train, eval, result.model, cfg, observer));
    result.stage_snapshots.push_back(result.model);
  }
  for (Modality m : kModalities) set_trainable(result.model.encoder(m), false);
  return result;
}

/// Baseline without staging: every encoder trains at once for the combined epoch
/// budget, with noise and the margin loss on all modalities.
inline PipelineResult run_joint(const DatasetTable& train, const DatasetTable* eval, const TrainConfig& cfg,
                                const StepObserver& observer = {}) {
  cfg.validate();
  PipelineResult result{init_model_for(train, cfg), {}, {}};
  ActiveSet active{cfg.use_sketch, cfg.use_text, true};
  for (Modality m : kModalities) set_trainable(result.model.encoder(m), active[index_of(m)]);
  const int epochs = cfg.epochs_per_stage * static_cast<int>(build_plan(cfg.order, cfg.epochs_per_stage).stages.size());
  result.report.stages.push_back(detail::run_epochs(result.model, train, eval, active, epochs, 0, "joint", cfg, observer));
  result.stage_snapshots.push_back(result.model);
  for (Modality m : kModalities) set_trainable(result.model.encoder(m), false);
  return result;
}

inline PipelineResult train(const DatasetTable& train, const DatasetTable* eval, const TrainConfig& cfg,
                            const StepObserver& observer = {}) {
  if (!cfg.staged) return run_joint(train, eval, cfg, observer);
  return run_pipeline(build_plan(cfg.order, cfg.epochs_per_stage), train, eval, cfg, observer);
}

}  // namespace stbir
