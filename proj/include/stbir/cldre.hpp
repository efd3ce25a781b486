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

#include "stbir/error.hpp"
#include "stbir/matrix.hpp"
#include "stbir/random.hpp"

namespace stbir {

/// Curriculum noise schedule: perturbation scale grows as t * alpha.
struct CurriculumState {
  double t = 0.0;      // normalized progress in [0, 1]
  double alpha = 0.2;  // target noise intensity

  void validate() const {
    if (!(t >= 0.0 && t <= 1.0)) throw RangeError("curriculum progress t must lie in [0, 1]");
    if (!(alpha >= 0.0)) throw RangeError("curriculum alpha must be >= 0");
  }
};

inline double progress(std::int64_t step, std::int64_t total_steps) {
  if (total_steps < 1) throw RangeError("total_steps must be >= 1");
  if (step < 0 || step > total_steps) {
    throw RangeError("step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
  }
  return static_cast<double>(step) / static_cast<double>(total_steps);
}

/// f + t * alpha * eps, eps ~ N(0, 1) per entry. Returns f unchanged (no draws) when t * alpha == 0.
inline Matrix inject(const Matrix& features, const CurriculumState& state, Rng& rng) {
  state.validate();
  Matrix out = features;
  const double scale = state.t * state.alpha;
  if (scale == 0.0) return out;
  for (double& v : out.values()) v += scale * rng.normal();
  return out;
}

}  // namespace stbir
