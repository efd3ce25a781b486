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

#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "oracles.hpp"
#include "stbir/cldre.hpp"

namespace stbir {
namespace {

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a.values()[i]) != std::bit_cast<std::uint64_t>(b.values()[i])) return false;
  }
  return true;
}

TEST(Progress, Endpoints) {
  EXPECT_EQ(progress(0, 100), 0.0);
  EXPECT_EQ(progress(100, 100), 1.0);
  EXPECT_EQ(progress(25, 100), 0.25);
}

TEST(Progress, MonotoneAndRangeChecked) {
  double last = -1.0;
  for (int s = 0; s <= 37; ++s) {
    const double t = progress(s, 37);
    EXPECT_GE(t, last);
    last = t;
  }
  EXPECT_THROW(progress(101, 100), RangeError);
  EXPECT_THROW(progress(-1, 100), RangeError);
  EXPECT_THROW(progress(0, 0), RangeError);
}

TEST(Inject, IdentityAtCurriculumStart) {
  Rng data(1);
  Matrix f = oracle::random_matrix(8, 16, data);
  f(0, 0) = -0.0;
  Rng noise(2);
  for (double alpha : {0.0, 0.5, 3.0}) EXPECT_TRUE(bitwise_equal(inject(f, {0.0, alpha}, noise), f));
}

TEST(Inject, IdentityWithZeroAlpha) {
  Rng data(1), noise(2);
  const Matrix f = oracle::random_matrix(8, 16, data);
  EXPECT_TRUE(bitwise_equal(inject(f, {1.0, 0.0}, noise), f));
}

TEST(Inject, DeterministicGivenStream) {
  Rng data(3);
  const Matrix f = oracle::random_matrix(4, 4, data);
  Rng a(9), b(9), c(10);
  EXPECT_EQ(inject(f, {0.5, 0.3}, a), inject(f, {0.5, 0.3}, b));
  EXPECT_NE(inject(f, {0.5, 0.3}, a), inject(f, {0.5, 0.3}, c));
}

TEST(Inject, PerturbationStdMatchesTargetIntensity) {
  Rng data(4), noise(5);
  const Matrix f = oracle::random_matrix(100, 100, data);
  const Matrix g = inject(f, {1.0, 0.5}, noise);
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double d = g.values()[i] - f.values()[i];
    sum += d;
    sq += d * d;
  }
  const double n = static_cast<double>(f.size());
  const double std_dev = std::sqrt(sq / n - (sum / n) * (sum / n));
  EXPECT_NEAR(std_dev, 0.5, 0.025);
}

TEST(Inject, ExpectedSquaredPerturbationGrowsWithProgress) {
  Rng data(6);
  const Matrix f = oracle::random_matrix(100, 200, data);
  const double alpha = 0.4;
  double previous = -1.0;
  for (double t : {0.25, 0.5, 0.75, 1.0}) {
    Rng noise(7);
    const Matrix g = inject(f, {t, alpha}, noise);
    double sq = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) sq += std::pow(g.values()[i] - f.values()[i], 2);
    const double expected = t * t * alpha * alpha * static_cast<double>(f.size());
    EXPECT_NEAR(sq / expected, 1.0, 0.05);
    EXPECT_GT(sq, previous);
    previous = sq;
  }
}

TEST(Inject, RejectsInvalidState) {
  Rng noise(1);
  EXPECT_THROW(inject(Matrix(1, 1), {1.5, 0.1}, noise), RangeError);
  EXPECT_THROW(inject(Matrix(1, 1), {0.5, -0.1}, noise), RangeError);
}

}  // namespace
}  // namespace stbir
