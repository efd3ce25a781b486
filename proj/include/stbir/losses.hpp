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
#include <cmath>
#include <vector>

#include "stbir/error.hpp"
#include "stbir/matrix.hpp"

namespace stbir {

struct LossWeights {
  double lambda1 = 0.1;  // AAML
  double lambda2 = 0.8;  // InfoNCE
  double lambda3 = 0.8;  // triplet

  void validate() const {
    if (!(lambda1 >= 0.0 && lambda2 >= 0.0 && lambda3 >= 0.0)) throw ConfigError("loss weights must be >= 0");
  }
};

struct ContrastiveConfig {
  double temperature = 0.07;
  double triplet_margin = 0.2;

  void validate() const {
    if (!(temperature > 0.0)) throw ConfigError("loss.temperature must be > 0");
    if (!(triplet_margin > 0.0)) throw ConfigError("loss.triplet_margin must be > 0");
  }
};

/// Loss value plus gradients w.r.t. the query and gallery rows.
struct PairLoss {
  double loss = 0.0;
  Matrix grad_queries;
  Matrix grad_gallery;
};

namespace detail {

struct CosineTable {
  Matrix qhat;
  Matrix ghat;
  std::vector<double> qnorm;
  std::vector<double> gnorm;
  Matrix cos;  // N x N
};

inline CosineTable cosine_table(const Matrix& queries, const Matrix& gallery, const char* what) {
  require_same_shape(queries, gallery, what);
  if (queries.rows() < 2) throw ConfigError(std::string(what) + " needs a batch of at least 2");
  CosineTable t;
  t.qhat = normalize_rows(queries, t.qnorm, what);
  t.ghat = normalize_rows(gallery, t.gnorm, what);
  const std::size_t n = queries.rows();
  t.cos = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) t.cos(i, j) = dot(t.qhat.row(i), t.ghat.row(j));
  }
  return t;
}

/// Chains dL/dcos(i, j) back to the raw query and gallery rows.
inline void backprop_cosines(const CosineTable& t, const Matrix& dcos, PairLoss& out) {
  const std::size_t n = t.cos.rows();
  const std::size_t d = t.qhat.cols();
  out.grad_queries = Matrix(n, d);
  out.grad_gallery = Matrix(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto qi = t.qhat.row(i);
    auto gq = out.grad_queries.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const double g = dcos(i, j);
      if (g == 0.0) continue;
      const double c = t.cos(i, j);
      auto gj = t.ghat.row(j);
      auto gg = out.grad_gallery.row(j);
      for (std::size_t k = 0; k < d; ++k) {
        gq[k] += g * (gj[k] - c * qi[k]) / t.qnorm[i];
        gg[k] += g * (qi[k] - c * gj[k]) / t.gnorm[j];
      }
    }
  }
}

}  // namespace detail

/// Symmetric InfoNCE over cosine similarities / temperature: the mean of the
/// query->gallery and gallery->query cross-entropies, row i matching row i.
inline PairLoss info_nce(const Matrix& queries, const Matrix& gallery, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("temperature must be > 0");
  const auto t = detail::cosine_table(queries, gallery, "info_nce");
  const std::size_t n = t.cos.rows();
  const double inv_tau = 1.0 / temperature;

  Matrix logits(n, n);
  for (std::size_t k = 0; k < logits.size(); ++k) logits.values()[k] = t.cos.values()[k] * inv_tau;

  // Softmax over rows (query -> gallery) and over columns (gallery -> query).
  Matrix p_row(n, n), p_col(n, n);
  double loss_row = 0.0, loss_col = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double zmax = logits(i, 0);
    for (std::size_t j = 1; j < n; ++j) zmax = std::max(zmax, logits(i, j));
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(logits(i, j) - zmax);
    const double lse = zmax + std::log(sum);
    loss_row += lse - logits(i, i);
    for (std::size_t j = 0; j < n; ++j) p_row(i, j) = std::exp(logits(i, j) - lse);
  }
  for (std::size_t j = 0; j < n; ++j) {
    double zmax = logits(0, j);
    for (std::size_t i = 1; i < n; ++i) zmax = std::max(zmax, logits(i, j));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += std::exp(logits(i, j) - zmax);
    const double lse = zmax + std::log(sum);
    loss_col += lse - logits(j, j);
    for (std::size_t i = 0; i < n; ++i) p_col(i, j) = std::exp(logits(i, j) - lse);
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  PairLoss out;
  out.loss = 0.5 * (loss_row + loss_col) * inv_n;

  Matrix dcos(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double delta = i == j ? 1.0 : 0.0;
      dcos(i, j) = 0.5 * inv_n * inv_tau * ((p_row(i, j) - delta) + (p_col(i, j) - delta));
    }
  }
  detail::backprop_cosines(t, dcos, out);
  return out;
}

/// Hardest-negative triplet hinge on cosine distance 1 - cos, averaged over queries.
/// Ties in the negative search go to the lower index; the hinge kink gets subgradient 0.
inline PairLoss triplet(const Matrix& queries, const Matrix& gallery, double margin) {
  if (!(margin > 0.0)) throw ConfigError("triplet margin must be > 0");
  const auto t = detail::cosine_table(queries, gallery, "triplet");
  const std::size_t n = t.cos.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  PairLoss out;
  Matrix dcos(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t hardest = i == 0 ? 1 : 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i && t.cos(i, j) > t.cos(i, hardest)) hardest = j;
    }
    const double d_pos = 1.0 - t.cos(i, i);
    const double d_neg = 1.0 - t.cos(i, hardest);
    const double hinge = d_pos - d_neg + margin;
    if (hinge > 0.0) {
      out.loss += hinge * inv_n;
      dcos(i, i) -= inv_n;
      dcos(i, hardest) += inv_n;
    }
  }
  detail::backprop_cosines(t, dcos, out);
  return out;
}

inline double total_loss(double l_aaml, double l_infonce, double l_triplet, const LossWeights& w) {
  if (!std::isfinite(l_aaml) || !std::isfinite(l_infonce) || !std::isfinite(l_triplet)) {
    throw NumericError("non-finite loss component");
  }
  return w.lambda1 * l_aaml + w.lambda2 * l_infonce + w.lambda3 * l_triplet;
}

}  // namespace stbir
