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

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stbir/datamodel.hpp"
#include "stbir/error.hpp"
#include "stbir/mcfa.hpp"

namespace stbir {

/// Everything a command needs: data source, model/training settings, output location.
struct RunConfig {
  std::string manifest;  // empty: synthesize from `synth`
  double test_fraction = 0.5;
  SynthConfig synth;
  TrainConfig train;
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  /// Propagates the global seed into the generator and the trainer.
  void apply_seed(std::uint64_t s) {
    seed = s;
    synth.seed = s;
    train.seed = s;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_real(const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("'" + v + "' is not a number");
  }
  if (used != v.size()) throw ConfigError("'" + v + "' is not a number");
  return out;
}

template <typename Int>
Int parse_int(const std::string& v) {
  Int out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("'" + v + "' is not an integer");
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("'" + v + "' is not a boolean");
}

/// Shortest text that parses back to exactly `v`.
inline std::string fmt_real(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct KeyBinding {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define STBIR_REAL(field) \
  KeyBinding{[](RunConfig& c, const std::string& v) { c.field = parse_real(v); }, \
             [](const RunConfig& c) { return fmt_real(c.field); }}
#define STBIR_INT(type, field) \
  KeyBinding{[](RunConfig& c, const std::string& v) { c.field = parse_int<type>(v); }, \
             [](const RunConfig& c) { return std::to_string(c.field); }}
#define STBIR_BOOL(field) \
  KeyBinding{[](RunConfig& c, const std::string& v) { c.field = parse_bool(v); }, \
             [](const RunConfig& c) { return std::string(c.field ? "true" : "false"); }}
#define STBIR_STRING(field) \
  KeyBinding{[](RunConfig& c, const std::string& v) { c.field = v; }, \
             [](const RunConfig& c) { return c.field; }}

inline const std::map<std::string, KeyBinding>& key_bindings() {
  static const std::map<std::string, KeyBinding> keys{
      {"seed", KeyBinding{[](RunConfig& c, const std::string& v) { c.apply_seed(parse_int<std::uint64_t>(v)); },
                          [](const RunConfig& c) { return std::to_string(c.seed); }}},
      {"output.dir", STBIR_STRING(output_dir)},
      {"data.manifest", STBIR_STRING(manifest)},
      {"data.test_fraction", STBIR_REAL(test_fraction)},
      {"synth.num_categories", STBIR_INT(int, synth.num_categories)},
      {"synth.instances_per_category", STBIR_INT(int, synth.instances_per_category)},
      {"synth.latent_struct_dim", STBIR_INT(std::size_t, synth.latent_struct_dim)},
      {"synth.latent_app_dim", STBIR_INT(std::size_t, synth.latent_app_dim)},
      {"synth.sketch_dim", STBIR_INT(std::size_t, synth.view_dims.sketch)},
      {"synth.text_dim", STBIR_INT(std::size_t, synth.view_dims.text)},
      {"synth.image_dim", STBIR_INT(std::size_t, synth.view_dims.image)},
      {"synth.intra_class_spread", STBIR_REAL(synth.intra_class_spread)},
      {"synth.view_noise_std", STBIR_REAL(synth.view_noise_std)},
      {"encoder.hidden_dim", STBIR_INT(std::size_t, train.hidden_dim)},
      {"encoder.embed_dim", STBIR_INT(std::size_t, train.embed_dim)},
      {"cldre.alpha", STBIR_REAL(train.cldre_alpha)},
      {"cldre.enabled", STBIR_BOOL(train.cldre_enabled)},
      {"ckfso.s", STBIR_REAL(train.aaml.s)},
      {"ckfso.m", STBIR_REAL(train.aaml.m)},
      {"ckfso.enabled", STBIR_BOOL(train.ckfso_enabled)},
      {"ckfso.shared_bank", STBIR_BOOL(train.shared_bank)},
      {"loss.lambda1", STBIR_REAL(train.weights.lambda1)},
      {"loss.lambda2", STBIR_REAL(train.weights.lambda2)},
      {"loss.lambda3", STBIR_REAL(train.weights.lambda3)},
      {"loss.temperature", STBIR_REAL(train.contrastive.temperature)},
      {"loss.triplet_margin", STBIR_REAL(train.contrastive.triplet_margin)},
      {"mcfa.order", STBIR_STRING(train.order)},
      {"mcfa.epochs_per_stage", STBIR_INT(int, train.epochs_per_stage)},
      {"mcfa.staged", STBIR_BOOL(train.staged)},
      {"optimizer.learning_rate", STBIR_REAL(train.optimizer.learning_rate)},
      {"optimizer.weight_decay", STBIR_REAL(train.optimizer.weight_decay)},
      {"optimizer.beta1", STBIR_REAL(train.optimizer.beta1)},
      {"optimizer.beta2", STBIR_REAL(train.optimizer.beta2)},
      {"optimizer.eps", STBIR_REAL(train.optimizer.eps)},
      {"train.batch_size", STBIR_INT(std::size_t, train.batch_size)},
      {"input.sketch", STBIR_BOOL(train.use_sketch)},
      {"input.text", STBIR_BOOL(train.use_text)},
  };
  return keys;
}

#undef STBIR_REAL
#undef STBIR_INT
#undef STBIR_BOOL
#undef STBIR_STRING

}  // namespace detail

/// Every validation failure, not just the first.
inline std::vector<std::string> validation_errors(const RunConfig& cfg) {
  std::vector<std::string> errors;
  auto check = [&](const std::function<void()>& fn) {
    try {
      fn();
    } catch (const Error& e) {
      errors.emplace_back(e.what());
    }
  };
  check([&] {
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) {
      throw ConfigError("data.test_fraction must lie in (0, 1)");
    }
  });
  if (cfg.manifest.empty()) {
    check([&] { cfg.synth.validate(); });
    check([&] {
      if (cfg.synth.num_categories < 2) throw ConfigError("synth.num_categories must be >= 2");
    });
  }
  const auto& t = cfg.train;
  check([&] { t.aaml.validate(); });
  check([&] { t.weights.validate(); });
  check([&] { t.contrastive.validate(); });
  check([&] { t.optimizer.validate(); });
  check([&] { build_plan(t.order, t.epochs_per_stage); });
  check([&] {
    if (!(t.cldre_alpha >= 0.0)) throw ConfigError("cldre.alpha must be >= 0");
  });
  check([&] {
    if (t.batch_size < 2) throw ConfigError("train.batch_size must be >= 2");
  });
  check([&] {
    if (t.hidden_dim < 1 || t.embed_dim < 1) throw ConfigError("encoder dims must be >= 1");
  });
  check([&] {
    if (!t.use_sketch && !t.use_text) throw ConfigError("input.sketch and input.text cannot both be off");
  });
  check([&] {
    if (cfg.output_dir.empty()) throw ConfigError("output.dir must not be empty");
  });
  return errors;
}

inline void validate(const RunConfig& cfg) {
  const auto errors = validation_errors(cfg);
  if (errors.empty()) return;
  std::string msg = "invalid configuration:";
  for (const auto& e : errors) msg += "\n  " + e;
  throw ConfigError(msg);
}

/// Applies `key = value` lines on top of `base`. '#' starts a comment.
/// Unknown keys and malformed values are all reported in one ConfigError.
inline RunConfig parse_config(std::istream& in, RunConfig base = {}) {
  const auto& keys = detail::key_bindings();
  std::vector<std::string> errors;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(line) + ": expected 'key = value'");
      continue;
    }
    const std::string key = detail::trim(text.substr(0, eq));
    const std::string value = detail::trim(text.substr(eq + 1));
    const auto it = keys.find(key);
    if (it == keys.end()) {
      errors.push_back("line " + std::to_string(line) + ": unknown key '" + key + "'");
      continue;
    }
    try {
      it->second.set(base, value);
    } catch (const Error& e) {
      errors.push_back("line " + std::to_string(line) + ": " + key + ": " + e.what());
    }
  }
  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  return parse_config(in, std::move(base));
}

/// Sets one dotted key, e.g. from a command-line override.
inline void set_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& keys = detail::key_bindings();
  const auto it = keys.find(key);
  if (it == keys.end()) throw ConfigError("unknown key '" + key + "'");
  it->second.set(cfg, value);
}

/// Canonical text form; parse_config(write_config(c)) reproduces c.
inline std::string write_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& [key, binding] : detail::key_bindings()) out += key + " = " + binding.get(cfg) + "\n";
  return out;
}

}  // namespace stbir
