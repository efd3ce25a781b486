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
#include <bit>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "stbir/error.hpp"
#include "stbir/matrix.hpp"

namespace stbir {

/// Composite query: element-wise sum of sketch and text features.
inline Matrix fuse(const Matrix& sketch, const Matrix& text) {
  require_same_shape(sketch, text, "fuse");
  Matrix out = sketch;
  add_scaled(out, text, 1.0);
  return out;
}

/// Unit-normalized gallery embeddings with their instance ids.
class GalleryIndex {
 public:
  GalleryIndex(const Matrix& embeddings, std::vector<std::int64_t> ids) : ids_(std::move(ids)) {
    if (embeddings.rows() != ids_.size()) throw ShapeError("gallery ids and rows differ in count");
    if (std::set<std::int64_t>(ids_.begin(), ids_.end()).size() != ids_.size()) {
      throw DataError("gallery ids must be unique");
    }
    std::vector<double> norms;
    embeddings_ = normalize_rows(embeddings, norms, "gallery");
  }

  const Matrix& embeddings() const noexcept { return embeddings_; }
  const std::vector<std::int64_t>& ids() const noexcept { return ids_; }
  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return embeddings_.cols(); }

 private:
  Matrix embeddings_;
  std::vector<std::int64_t> ids_;
};

/// N x G cosine similarities.
inline Matrix score(const Matrix& queries, const GalleryIndex& index) {
  if (queries.cols() != index.dim()) {
    throw ShapeError("query dim " + std::to_string(queries.cols()) + " != gallery dim " +
                     std::to_string(index.dim()));
  }
  std::vector<double> norms;
  const Matrix qhat = normalize_rows(queries, norms, "score(queries)");
  Matrix out(queries.rows(), index.size());
  for (std::size_t i = 0; i < qhat.rows(); ++i) {
    for (std::size_t j = 0; j < index.size(); ++j) {
      out(i, j) = std::clamp(dot(qhat.row(i), index.embeddings().row(j)), -1.0, 1.0);
    }
  }
  return out;
}

struct RetrievalResult {
  std::vector<std::vector<std::int64_t>> ids;  // per query, best first
  std::vector<std::vector<double>> scores;
  std::vector<std::int64_t> gallery_ids;
};

/// Top-k gallery entries per query. Equal scores rank the lower gallery position first.
inline RetrievalResult top_k(const Matrix& scores, std::span<const std::int64_t> gallery_ids, std::size_t k) {
  const std::size_t g = scores.cols();
  if (gallery_ids.size() != g) throw ShapeError("gallery id count does not match score columns");
  if (k < 1 || k > g) throw RangeError("k=" + std::to_string(k) + " outside [1, " + std::to_string(g) + "]");

  RetrievalResult result;
  result.gallery_ids.assign(gallery_ids.begin(), gallery_ids.end());
  std::vector<std::size_t> order(g);
  for (std::size_t q = 0; q < scores.rows(); ++q) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto row = scores.row(q);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                      [&](std::size_t a, std::size_t b) { return row[a] > row[b] || (row[a] == row[b] && a < b); });
    std::vector<std::int64_t> ids(k);
    std::vector<double> top(k);
    for (std::size_t r = 0; r < k; ++r) {
      ids[r] = gallery_ids[order[r]];
      top[r] = row[order[r]];
    }
    result.ids.push_back(std::move(ids));
    result.scores.push_back(std::move(top));
  }
  return result;
}

/// Overload with gallery ids equal to column positions.
inline RetrievalResult top_k(const Matrix& scores, std::size_t k) {
  std::vector<std::int64_t> ids(scores.cols());
  std::iota(ids.begin(), ids.end(), std::int64_t{0});
  return top_k(scores, ids, k);
}

/// Fraction of queries whose ground-truth id is among their first k results.
inline double recall_at_k(const RetrievalResult& results, std::span<const std::int64_t> truth, std::size_t k) {
  if (truth.size() != results.ids.size()) throw ShapeError("one ground-truth id per query required");
  if (results.ids.empty()) throw DataError("no queries");
  const std::set<std::int64_t> gallery(results.gallery_ids.begin(), results.gallery_ids.end());
  std::size_t hits = 0;
  for (std::size_t q = 0; q < truth.size(); ++q) {
    if (!gallery.contains(truth[q])) {
      throw DataError("ground-truth id " + std::to_string(truth[q]) + " is not in the gallery");
    }
    const auto& ranked = results.ids[q];
    if (k < 1 || k > ranked.size()) throw RangeError("k exceeds the retrieved depth");
    if (std::find(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(k), truth[q]) !=
        ranked.begin() + static_cast<std::ptrdiff_t>(k)) {
      ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------
// Embedding files: one JSON header line
//   {"format":"stbir-embeddings","dim":d,"count":n,"dtype":"float32-le","ids":[...]}
// followed by n*d little-endian IEEE-754 float32 values, row-major.

struct EmbeddingSet {
  Matrix embeddings;
  std::vector<std::int64_t> ids;
};

inline void write_embeddings(std::ostream& out, const Matrix& embeddings, std::span<const std::int64_t> ids) {
  if (embeddings.rows() != ids.size()) throw ShapeError("embedding rows and ids differ in count");
  nlohmann::json header = {{"format", "stbir-embeddings"},
                           {"dim", embeddings.cols()},
                           {"count", embeddings.rows()},
                           {"dtype", "float32-le"},
                           {"ids", std::vector<std::int64_t>(ids.begin(), ids.end())}};
  out << header.dump() << '\n';
  for (double v : embeddings.values()) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const char bytes[4] = {static_cast<char>(bits & 0xFF), static_cast<char>((bits >> 8) & 0xFF),
                           static_cast<char>((bits >> 16) & 0xFF), static_cast<char>((bits >> 24) & 0xFF)};
    out.write(bytes, 4);
  }
  if (!out) throw IoError("failed writing embeddings");
}

inline EmbeddingSet read_embeddings(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing embedding header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(1, std::string("malformed embedding header: ") + e.what());
  }
  EmbeddingSet set;
  std::size_t dim = 0, count = 0;
  try {
    if (header.at("format").get<std::string>() != "stbir-embeddings") throw ParseError(1, "unknown format tag");
    if (header.at("dtype").get<std::string>() != "float32-le") throw ParseError(1, "unsupported dtype");
    dim = header.at("dim").get<std::size_t>();
    count = header.at("count").get<std::size_t>();
    set.ids = header.at("ids").get<std::vector<std::int64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, e.what());
  }
  if (set.ids.size() != count) throw SchemaError("embedding id list length != count");
  set.embeddings = Matrix(count, dim);
  for (double& v : set.embeddings.values()) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) throw SchemaError("embedding payload truncated");
    const std::uint32_t bits = std::uint32_t{bytes[0]} | (std::uint32_t{bytes[1]} << 8) |
                               (std::uint32_t{bytes[2]} << 16) | (std::uint32_t{bytes[3]} << 24);
    v = static_cast<double>(std::bit_cast<float>(bits));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw SchemaError("trailing bytes after embedding payload");
  return set;
}

}  // namespace stbir
