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
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "stbir/error.hpp"
#include "stbir/matrix.hpp"
#include "stbir/random.hpp"

namespace stbir {

/// Learnable class centers (one unit-norm row per category) with optimizer moments.
struct CenterBank {
  Matrix centers;  // C x d
  Matrix first_moment;
  Matrix second_moment;
  std::int64_t step_count = 0;

  std::size_t num_classes() const noexcept { return centers.rows(); }
  std::size_t dim() const noexcept { return centers.cols(); }
};

struct AamlConfig {
  double s = 32.0;
  double m = 0.15;

  void validate() const {
    if (!(s > 0.0)) throw ConfigError("ckfso.s must be > 0");
    if (!(m >= 0.0 && m < std::numbers::pi)) throw ConfigError("ckfso.m must lie in [0, pi)");
  }
};

inline constexpr double kCosineClamp = 1e-7;

inline void normalize_centers(CenterBank& bank) {
  for (std::size_t r = 0; r < bank.centers.rows(); ++r) {
    auto row = bank.centers.row(r);
    const double n = norm(row);
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw DegenerateInputError("center " + std::to_string(r) + " has zero norm");
    }
    for (double& v : row) v /= n;
  }
}

/// Random unit-norm centers.
inline CenterBank init_center_bank(std::size_t num_classes, std::size_t dim, std::uint64_t seed) {
  if (num_classes < 2) throw ConfigError("center bank needs at least 2 classes");
  if (dim < 1) throw ConfigError("center dim must be >= 1");
  CenterBank bank{Matrix(num_classes, dim), Matrix(num_classes, dim), Matrix(num_classes, dim), 0};
  Rng rng(seed);
  for (double& v : bank.centers.values()) v = rng.normal();
  normalize_centers(bank);
  return bank;
}

namespace detail {

/// Raw cosine between every feature row and every center row.
inline Matrix raw_cosines(const Matrix& xhat, const Matrix& what) {
  Matrix c(xhat.rows(), what.rows());
  for (std::size_t i = 0; i < xhat.rows(); ++i) {
    for (std::size_t j = 0; j < what.rows(); ++j) c(i, j) = dot(xhat.row(i), what.row(j));
  }
  return c;
}

inline double clamp_cosine(double c) { return std::clamp(c, -1.0 + kCosineClamp, 1.0 - kCosineClamp); }

}  // namespace detail

/// N x C matrix of angles between feature rows and centers.
inline Matrix angles(const Matrix& features, const CenterBank& bank) {
  if (features.cols() != bank.dim()) throw ShapeError("feature dim does not match center dim");
  std::vector<double> fn, cn;
  const Matrix xhat = normalize_rows(features, fn, "angles(features)");
  const Matrix what = normalize_rows(bank.centers, cn, "angles(centers)");
  Matrix theta = detail::raw_cosines(xhat, what);
  for (double& v : theta.values()) v = std::acos(detail::clamp_cosine(v));
  return theta;
}

struct AamlResult {
  double loss = 0.0;
  Matrix grad_features;  // N x d
  Matrix grad_centers;   // C x d
};

/// Additive angular margin loss, averaged over the batch.
///
/// The ground-truth logit is s * cos(theta + m); others are s * cos(theta). When
/// theta + m would pass pi (cos theta <= cos(pi - m)) the target logit falls back to
/// s * (cos theta - m * sin m). Gradients flow through the row normalizations of
/// both features and centers.
inline AamlResult aaml_loss(const Matrix& features, std::span<const int> labels, const CenterBank& bank,
                            const AamlConfig& cfg) {
  cfg.validate();
  const std::size_t n = features.rows();
  const std::size_t classes = bank.num_classes();
  const std::size_t d = features.cols();
  if (n < 1) throw ShapeError("aaml_loss needs at least one sample");
  if (labels.size() != n) throw ShapeError("labels size does not match feature rows");
  if (d != bank.dim()) throw ShapeError("feature dim does not match center dim");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw IndexError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
    }
  }

  std::vector<double> fnorm, cnorm;
  const Matrix xhat = normalize_rows(features, fnorm, "aaml_loss(features)");
  const Matrix what = normalize_rows(bank.centers, cnorm, "aaml_loss(centers)");
  const Matrix raw = detail::raw_cosines(xhat, what);

  const double cos_m = std::cos(cfg.m);
  const double sin_m = std::sin(cfg.m);
  const double threshold = std::cos(std::numbers::pi - cfg.m);

  AamlResult result{0.0, Matrix(n, d), Matrix(classes, d)};
  std::vector<double> logits(classes), dcos(classes);
  const double inv_n = 1.0 / static_cast<double>(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    double target_slope = 1.0;
    for (std::size_t j = 0; j < classes; ++j) {
      const double c = std::clamp(raw(i, j), -1.0, 1.0);
      if (j != y) {
        logits[j] = cfg.s * c;
      } else if (c > threshold) {
        logits[j] = cfg.s * (c * cos_m - std::sqrt(1.0 - c * c) * sin_m);
        // d/dc cos(acos(c) + m); the clamp keeps it finite as c -> 1.
        const double cc = detail::clamp_cosine(c);
        target_slope = cos_m + cc * sin_m / std::sqrt(1.0 - cc * cc);
      } else {
        logits[j] = cfg.s * (c - cfg.m * sin_m);
      }
    }
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - zmax);
    const double lse = zmax + std::log(sum);
    result.loss += (lse - logits[y]) * inv_n;

    for (std::size_t j = 0; j < classes; ++j) {
      const double p = std::exp(logits[j] - lse);
      const double dz = p - (j == y ? 1.0 : 0.0);
      dcos[j] = inv_n * cfg.s * dz * (j == y ? target_slope : 1.0);
    }

    // d cos / d x = (w^ - cos x^) / |x|;  d cos / d w = (x^ - cos w^) / |w|
    auto gx = result.grad_features.row(i);
    auto xi = xhat.row(i);
    for (std::size_t j = 0; j < classes; ++j) {
      const double g = dcos[j];
      if (g == 0.0) continue;
      const double c = raw(i, j);
      auto wj = what.row(j);
      auto gw = result.grad_centers.row(j);
      for (std::size_t k = 0; k < d; ++k) {
        gx[k] += g * (wj[k] - c * xi[k]) / fnorm[i];
        gw[k] += g * (xi[k] - c * wj[k]) / cnorm[j];
      }
    }
  }
  return result;
}

}  // namespace stbir
