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

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "stbir/error.hpp"
#include "stbir/matrix.hpp"
#include "stbir/random.hpp"

namespace stbir {

enum class Split { train, test };

inline const char* to_string(Split s) { return s == Split::train ? "train" : "test"; }

struct ViewDims {
  std::size_t sketch = 0;
  std::size_t text = 0;
  std::size_t image = 0;

  friend bool operator==(const ViewDims&, const ViewDims&) = default;
};

/// One (sketch, text, image) triplet with its category label.
struct TriModalSample {
  std::int64_t instance_id = 0;
  std::vector<double> sketch_view;
  std::vector<double> text_view;
  std::vector<double> image_view;
  int category = 0;
  Split split = Split::train;

  friend bool operator==(const TriModalSample&, const TriModalSample&) = default;
};

struct DatasetTable {
  std::vector<TriModalSample> samples;
  int num_categories = 0;
  ViewDims dims;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }

  friend bool operator==(const DatasetTable&, const DatasetTable&) = default;
};

/// Checks every table invariant except train-split category coverage.
inline void validate(const DatasetTable& table) {
  if (table.empty()) throw SchemaError("dataset is empty");
  std::set<std::int64_t> ids;
  for (const auto& s : table.samples) {
    if (s.category < 0 || s.category >= table.num_categories) {
      throw SchemaError("instance " + std::to_string(s.instance_id) + ": category " +
                        std::to_string(s.category) + " outside [0, " +
                        std::to_string(table.num_categories) + ")");
    }
    if (s.sketch_view.size() != table.dims.sketch || s.text_view.size() != table.dims.text ||
        s.image_view.size() != table.dims.image) {
      throw SchemaError("instance " + std::to_string(s.instance_id) + ": view dims differ from table dims");
    }
    if (!ids.insert(s.instance_id).second) {
      throw SchemaError("duplicate instance_id " + std::to_string(s.instance_id));
    }
  }
}

/// Categories in [0, C) with no train-split sample.
inline std::vector<int> missing_train_categories(const DatasetTable& table) {
  std::vector<bool> seen(static_cast<std::size_t>(table.num_categories), false);
  for (const auto& s : table.samples) {
    if (s.split == Split::train) seen[static_cast<std::size_t>(s.category)] = true;
  }
  std::vector<int> missing;
  for (int c = 0; c < table.num_categories; ++c) {
    if (!seen[static_cast<std::size_t>(c)]) missing.push_back(c);
  }
  return missing;
}

/// Samples whose split matches; categories and dims carried over.
inline DatasetTable select_split(const DatasetTable& table, Split which) {
  DatasetTable out{{}, table.num_categories, table.dims};
  for (const auto& s : table.samples) {
    if (s.split == which) out.samples.push_back(s);
  }
  return out;
}

enum class ViewKind { sketch, text, image };

inline Matrix view_matrix(const DatasetTable& table, ViewKind kind) {
  const std::size_t dim = kind == ViewKind::sketch ? table.dims.sketch
                          : kind == ViewKind::text ? table.dims.text
                                                   : table.dims.image;
  Matrix out(table.size(), dim);
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& s = table.samples[i];
    const auto& v = kind == ViewKind::sketch ? s.sketch_view
                    : kind == ViewKind::text ? s.text_view
                                             : s.image_view;
    std::copy(v.begin(), v.end(), out.row(i).begin());
  }
  return out;
}

inline std::vector<int> categories(const DatasetTable& table) {
  std::vector<int> out;
  out.reserve(table.size());
  for (const auto& s : table.samples) out.push_back(s.category);
  return out;
}

inline std::vector<std::int64_t> instance_ids(const DatasetTable& table) {
  std::vector<std::int64_t> out;
  out.reserve(table.size());
  for (const auto& s : table.samples) out.push_back(s.instance_id);
  return out;
}

// ---------------------------------------------------------------------------
// Manifest: JSON Lines, one sample per line.
//   {"instance_id":0,"category":3,"split":"train","sketch":[...],"text":[...],"image":[...]}
// Blank lines are skipped. Dims come from the first record; C = max(category) + 1.

namespace detail {

inline std::vector<double> parse_view(const nlohmann::json& record, const char* key, std::size_t line) {
  auto it = record.find(key);
  if (it == record.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  if (!it->is_array()) throw ParseError(line, std::string("field '") + key + "' is not an array");
  std::vector<double> out;
  out.reserve(it->size());
  for (const auto& v : *it) {
    if (!v.is_number()) throw ParseError(line, std::string("field '") + key + "' has a non-numeric entry");
    out.push_back(v.get<double>());
  }
  if (out.empty()) throw SchemaError("line " + std::to_string(line) + ": empty '" + key + "' view");
  return out;
}

}  // namespace detail

inline DatasetTable parse_manifest(std::istream& in) {
  DatasetTable table;
  std::string text;
  std::size_t line = 0;
  int max_category = -1;
  bool first = true;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line, std::string("malformed record: ") + e.what());
    }
    if (!record.is_object()) throw ParseError(line, "record is not an object");

    TriModalSample s;
    try {
      s.instance_id = record.at("instance_id").get<std::int64_t>();
      s.category = record.at("category").get<int>();
      const auto split = record.at("split").get<std::string>();
      if (split == "train") {
        s.split = Split::train;
      } else if (split == "test") {
        s.split = Split::test;
      } else {
        throw ParseError(line, "split must be 'train' or 'test', got '" + split + "'");
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(line, e.what());
    }
    s.sketch_view = detail::parse_view(record, "sketch", line);
    s.text_view = detail::parse_view(record, "text", line);
    s.image_view = detail::parse_view(record, "image", line);

    if (s.category < 0) {
      throw SchemaError("line " + std::to_string(line) + ": negative category " + std::to_string(s.category));
    }
    if (first) {
      table.dims = {s.sketch_view.size(), s.text_view.size(), s.image_view.size()};
      first = false;
    } else if (s.sketch_view.size() != table.dims.sketch || s.text_view.size() != table.dims.text ||
               s.image_view.size() != table.dims.image) {
      throw SchemaError("line " + std::to_string(line) + ": view dims differ from first record");
    }
    max_category = std::max(max_category, s.category);
    table.samples.push_back(std::move(s));
  }
  table.num_categories = max_category + 1;
  validate(table);
  return table;
}

inline DatasetTable load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path + "'");
  return parse_manifest(in);
}

inline void write_manifest(std::ostream& out, const DatasetTable& table) {
  for (const auto& s : table.samples) {
    nlohmann::json record = {
        {"instance_id", s.instance_id}, {"category", s.category}, {"split", to_string(s.split)},
        {"sketch", s.sketch_view},      {"text", s.text_view},    {"image", s.image_view},
    };
    out << record.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Synthetic generator. Each category owns a latent prototype split into a
// structure block and an appearance block. Sketches see only structure, text
// only appearance, images both.

struct SynthConfig {
  int num_categories = 64;
  int instances_per_category = 8;
  std::size_t latent_struct_dim = 8;
  std::size_t latent_app_dim = 8;
  ViewDims view_dims{32, 32, 32};
  double intra_class_spread = 0.3;
  double view_noise_std = 0.05;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_categories < 1 || instances_per_category < 1) throw ConfigError("synth counts must be >= 1");
    if (latent_struct_dim < 1 || latent_app_dim < 1) throw ConfigError("synth latent dims must be >= 1");
    if (view_dims.sketch < 1 || view_dims.text < 1 || view_dims.image < 1) {
      throw ConfigError("synth view dims must be >= 1");
    }
    if (!(intra_class_spread > 0.0)) throw ConfigError("synth spread must be > 0");
    if (!(view_noise_std >= 0.0)) throw ConfigError("synth noise must be >= 0");
  }
};

/// Fixed random linear maps from the latent space to each view.
struct LatentLifts {
  Matrix sketch;
  Matrix text;
  Matrix image;
};

inline LatentLifts make_lifts(const SynthConfig& cfg, Rng& rng) {
  const std::size_t latent = cfg.latent_struct_dim + cfg.latent_app_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(latent));
  auto lift = [&](std::size_t out_dim) {
    Matrix m(out_dim, latent);
    for (double& v : m.values()) v = scale * rng.normal();
    return m;
  };
  LatentLifts lifts;
  lifts.sketch = lift(cfg.view_dims.sketch);
  lifts.text = lift(cfg.view_dims.text);
  lifts.image = lift(cfg.view_dims.image);
  return lifts;
}

/// Renders one latent code into the three views. `keep_struct`/`keep_app` mask the blocks.
inline std::vector<double> render_view(const Matrix& lift, std::span<const double> latent, std::size_t struct_dim,
                                       bool keep_struct, bool keep_app, double noise_std, Rng& rng) {
  std::vector<double> out(lift.rows(), 0.0);
  for (std::size_t r = 0; r < lift.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t k = 0; k < latent.size(); ++k) {
      const bool is_struct = k < struct_dim;
      if ((is_struct && keep_struct) || (!is_struct && keep_app)) acc += lift(r, k) * latent[k];
    }
    out[r] = acc;
  }
  if (noise_std > 0.0) {
    for (double& v : out) v += noise_std * rng.normal();
  }
  return out;
}

inline DatasetTable synthesize_dataset(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const LatentLifts lifts = make_lifts(cfg, rng);
  const std::size_t latent = cfg.latent_struct_dim + cfg.latent_app_dim;

  Matrix prototypes(static_cast<std::size_t>(cfg.num_categories), latent);
  for (double& v : prototypes.values()) v = rng.normal();

  DatasetTable table;
  table.num_categories = cfg.num_categories;
  table.dims = cfg.view_dims;
  table.samples.reserve(static_cast<std::size_t>(cfg.num_categories * cfg.instances_per_category));
  std::vector<double> z(latent);
  std::int64_t next_id = 0;
  for (int c = 0; c < cfg.num_categories; ++c) {
    auto proto = prototypes.row(static_cast<std::size_t>(c));
    for (int k = 0; k < cfg.instances_per_category; ++k) {
      for (std::size_t j = 0; j < latent; ++j) z[j] = proto[j] + cfg.intra_class_spread * rng.normal();
      TriModalSample s;
      s.instance_id = next_id++;
      s.category = c;
      s.split = Split::train;
      s.sketch_view = render_view(lifts.sketch, z, cfg.latent_struct_dim, true, false, cfg.view_noise_std, rng);
      s.text_view = render_view(lifts.text, z, cfg.latent_struct_dim, false, true, cfg.view_noise_std, rng);
      s.image_view = render_view(lifts.image, z, cfg.latent_struct_dim, true, true, cfg.view_noise_std, rng);
      table.samples.push_back(std::move(s));
    }
  }
  return table;
}

// ---------------------------------------------------------------------------

struct SplitResult {
  DatasetTable train;
  DatasetTable test;
  std::vector<std::string> warnings;
};

/// Stratified split: per category, round(count * test_fraction) samples go to test.
/// Input order is preserved inside each output table.
inline SplitResult split(const DatasetTable& table, double test_fraction, std::uint64_t seed) {
  if (table.empty()) throw SchemaError("cannot split an empty dataset");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");

  std::map<int, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < table.size(); ++i) by_category[table.samples[i].category].push_back(i);

  Rng rng(mix_seed(seed, 0x5b11));
  std::vector<bool> is_test(table.size(), false);
  SplitResult result;
  for (auto& [category, members] : by_category) {
    rng.shuffle(std::span<std::size_t>(members));
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(members.size()) * test_fraction));
    for (std::size_t k = 0; k < n_test; ++k) is_test[members[k]] = true;
    if (n_test == members.size()) {
      result.warnings.push_back("category " + std::to_string(category) + " has no train samples after split");
    }
  }

  result.train = {{}, table.num_categories, table.dims};
  result.test = {{}, table.num_categories, table.dims};
  for (std::size_t i = 0; i < table.size(); ++i) {
    TriModalSample s = table.samples[i];
    s.split = is_test[i] ? Split::test : Split::train;
    (is_test[i] ? result.test : result.train).samples.push_back(std::move(s));
  }
  return result;
}

/// Concatenates train and test back into one table (train first).
inline DatasetTable merge(const DatasetTable& train, const DatasetTable& test) {
  DatasetTable out = train;
  out.samples.insert(out.samples.end(), test.samples.begin(), test.samples.end());
  return out;
}

using Batch = std::vector<std::size_t>;

/// Shuffled mini-batches over [0, num_samples). Trailing batches of size < 2 are dropped.
inline std::vector<Batch> make_batches(std::size_t num_samples, std::size_t batch_size, std::uint64_t seed,
                                       std::uint64_t epoch) {
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  std::vector<std::size_t> order(num_samples);
  for (std::size_t i = 0; i < num_samples; ++i) order[i] = i;
  Rng rng(mix_seed(seed, epoch));
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < num_samples; start += batch_size) {
    const std::size_t end = std::min(num_samples, start + batch_size);
    if (end - start < 2) break;
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

inline std::vector<Batch> make_batches(const DatasetTable& table, std::size_t batch_size, std::uint64_t seed,
                                       std::uint64_t epoch) {
  return make_batches(table.size(), batch_size, seed, epoch);
}

}  // namespace stbir
