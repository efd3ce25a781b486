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
#include <array>
#include <string>

#include "stbir/datamodel.hpp"
#include "stbir/model.hpp"
#include "stbir/retrieval.hpp"

namespace stbir {

enum class QueryMask { sketch_only, text_only, fused };

inline const char* to_string(QueryMask m) {
  switch (m) {
    case QueryMask::sketch_only: return "sketch-only";
    case QueryMask::text_only: return "text-only";
    case QueryMask::fused: return "fused";
  }
  return "?";
}

inline QueryMask query_mask_from_string(const std::string& s) {
  if (s == "sketch-only" || s == "sketch") return QueryMask::sketch_only;
  if (s == "text-only" || s == "text") return QueryMask::text_only;
  if (s == "fused") return QueryMask::fused;
  throw ConfigError("unknown query mask '" + s + "' (expected sketch-only, text-only or fused)");
}

inline constexpr std::array<std::size_t, 3> kRecallDepths{1, 5, 10};

struct RecallRow {
  double r1 = 0.0;
  double r5 = 0.0;
  double r10 = 0.0;

  friend bool operator==(const RecallRow&, const RecallRow&) = default;
};

/// Query embeddings for a table under a mask. No noise is injected here.
inline Matrix query_embeddings(const Model& model, const DatasetTable& table, QueryMask mask) {
  switch (mask) {
    case QueryMask::sketch_only: return encode(model, Modality::sketch, view_matrix(table, ViewKind::sketch));
    case QueryMask::text_only: return encode(model, Modality::text, view_matrix(table, ViewKind::text));
    case QueryMask::fused:
      return fuse(encode(model, Modality::sketch, view_matrix(table, ViewKind::sketch)),
                  encode(model, Modality::text, view_matrix(table, ViewKind::text)));
  }
  throw ConfigError("bad query mask");
}

inline GalleryIndex build_gallery(const Model& model, const DatasetTable& table) {
  return GalleryIndex(encode(model, Modality::image, view_matrix(table, ViewKind::image)), instance_ids(table));
}

/// R@1/5/10 with each sample's image as the ground truth for its own query.
/// Depths larger than the gallery are clamped to the gallery size.
inline RecallRow evaluate(const Model& model, const DatasetTable& table, QueryMask mask) {
  if (table.empty()) throw DataError("evaluation table is empty");
  if (table.dims != model.view_dims()) throw ShapeError("evaluation data dims do not match the checkpoint");
  const GalleryIndex gallery = build_gallery(model, table);
  const Matrix scores = score(query_embeddings(model, table, mask), gallery);
  const std::size_t depth = std::min<std::size_t>(kRecallDepths.back(), gallery.size());
  const RetrievalResult result = top_k(scores, gallery.ids(), depth);
  const auto truth = instance_ids(table);
  auto at = [&](std::size_t k) { return recall_at_k(result, truth, std::min(k, depth)); };
  return {at(1), at(5), at(10)};
}

}  // namespace stbir
