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

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "stbir/datamodel.hpp"

namespace stbir {
namespace {

std::string record(std::int64_t id, int category, const std::string& split, const std::string& sketch = "[1,2]",
                   const std::string& text = "[3]", const std::string& image = "[4,5,6]") {
  return R"({"instance_id":)" + std::to_string(id) + R"(,"category":)" + std::to_string(category) +
         R"(,"split":")" + split + R"(","sketch":)" + sketch + R"(,"text":)" + text + R"(,"image":)" + image + "}\n";
}

TEST(Manifest, ParsesValidRecords) {
  std::istringstream in(record(10, 0, "train") + record(11, 2, "test") + "\n" + record(12, 1, "train"));
  const DatasetTable t = parse_manifest(in);
  ASSERT_EQ(t.size(), 3u);
  EXPECT_EQ(t.num_categories, 3);
  EXPECT_EQ(t.dims, (ViewDims{2, 1, 3}));
  EXPECT_EQ(t.samples[1].split, Split::test);
  EXPECT_EQ(t.samples[2].image_view, (std::vector<double>{4, 5, 6}));
}

TEST(Manifest, RejectsNegativeCategory) {
  std::istringstream in(record(0, -1, "train"));
  EXPECT_THROW(parse_manifest(in), SchemaError);
}

TEST(Manifest, RejectsInconsistentSketchDims) {
  std::istringstream in(record(0, 0, "train") + record(1, 0, "train", "[1,2,3]"));
  EXPECT_THROW(parse_manifest(in), SchemaError);
}

TEST(Manifest, MalformedRecordReportsLine) {
  std::istringstream in(record(0, 0, "train") + "{\"instance_id\": 1, oops\n");
  try {
    parse_manifest(in);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Manifest, RejectsDuplicateIdsAndBadSplit) {
  std::istringstream dup(record(0, 0, "train") + record(0, 1, "train"));
  EXPECT_THROW(parse_manifest(dup), SchemaError);
  std::istringstream bad(record(0, 0, "validation"));
  EXPECT_THROW(parse_manifest(bad), ParseError);
}

TEST(Manifest, RoundTripsSyntheticTable) {
  SynthConfig cfg;
  cfg.num_categories = 4;
  cfg.instances_per_category = 3;
  const DatasetTable t = split(synthesize_dataset(cfg), 0.34, 1).train;
  std::stringstream io;
  write_manifest(io, t);
  EXPECT_EQ(parse_manifest(io), t);
}

TEST(Synth, DeterministicGivenSeed) {
  SynthConfig cfg;
  cfg.seed = 7;
  EXPECT_EQ(synthesize_dataset(cfg), synthesize_dataset(cfg));
  SynthConfig other = cfg;
  other.seed = 8;
  EXPECT_NE(synthesize_dataset(cfg), synthesize_dataset(other));
}

TEST(Synth, DefaultSizeAndLabels) {
  const DatasetTable t = synthesize_dataset(SynthConfig{});
  EXPECT_EQ(t.size(), 512u);
  EXPECT_EQ(t.num_categories, 64);
  EXPECT_EQ(t.dims, (ViewDims{32, 32, 32}));
  EXPECT_NO_THROW(validate(t));
}

TEST(Synth, SketchIgnoresAppearanceAndTextIgnoresStructure) {
  SynthConfig cfg;
  cfg.view_noise_std = 0.0;
  Rng rng(3);
  const LatentLifts lifts = make_lifts(cfg, rng);
  std::vector<double> a(16), b(16), c(16);
  for (std::size_t k = 0; k < 16; ++k) a[k] = rng.normal();
  b = a;
  c = a;
  for (std::size_t k = 8; k < 16; ++k) b[k] += 1.0 + rng.normal();  // appearance differs
  for (std::size_t k = 0; k < 8; ++k) c[k] -= 1.0 + rng.normal();   // structure differs

  auto sketch = [&](const std::vector<double>& z) { return render_view(lifts.sketch, z, 8, true, false, 0.0, rng); };
  auto text = [&](const std::vector<double>& z) { return render_view(lifts.text, z, 8, false, true, 0.0, rng); };
  auto image = [&](const std::vector<double>& z) { return render_view(lifts.image, z, 8, true, true, 0.0, rng); };
  EXPECT_EQ(sketch(a), sketch(b));
  EXPECT_NE(sketch(a), sketch(c));
  EXPECT_EQ(text(a), text(c));
  EXPECT_NE(text(a), text(b));
  EXPECT_NE(image(a), image(b));
  EXPECT_NE(image(a), image(c));
}

TEST(Synth, RejectsBadConfig) {
  SynthConfig cfg;
  cfg.intra_class_spread = 0.0;
  EXPECT_THROW(synthesize_dataset(cfg), ConfigError);
  cfg = {};
  cfg.latent_app_dim = 0;
  EXPECT_THROW(synthesize_dataset(cfg), ConfigError);
}

TEST(Split, HalfOfDefaultIsBalanced) {
  const auto s = split(synthesize_dataset(SynthConfig{}), 0.5, 0);
  EXPECT_EQ(s.train.size(), 256u);
  EXPECT_EQ(s.test.size(), 256u);
  EXPECT_TRUE(s.warnings.empty());
}

TEST(Split, DeterministicDisjointAndComplete) {
  SynthConfig cfg;
  cfg.num_categories = 9;
  cfg.instances_per_category = 7;
  cfg.seed = 11;
  const DatasetTable table = synthesize_dataset(cfg);
  const auto a = split(table, 0.3, 5);
  const auto b = split(table, 0.3, 5);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.test, b.test);

  std::set<std::int64_t> train_ids, test_ids, all_ids;
  for (const auto& s : a.train.samples) train_ids.insert(s.instance_id);
  for (const auto& s : a.test.samples) test_ids.insert(s.instance_id);
  for (const auto& s : table.samples) all_ids.insert(s.instance_id);
  std::vector<std::int64_t> overlap;
  std::set_intersection(train_ids.begin(), train_ids.end(), test_ids.begin(), test_ids.end(),
                        std::back_inserter(overlap));
  EXPECT_TRUE(overlap.empty());
  std::set<std::int64_t> joined = train_ids;
  joined.insert(test_ids.begin(), test_ids.end());
  EXPECT_EQ(joined, all_ids);
  for (const auto& s : a.test.samples) EXPECT_EQ(s.split, Split::test);
}

TEST(Split, StratifiedWithinOneSample) {
  SynthConfig cfg;
  cfg.num_categories = 10;
  cfg.instances_per_category = 9;
  const auto s = split(synthesize_dataset(cfg), 0.35, 2);
  std::map<int, int> test_count;
  for (const auto& x : s.test.samples) ++test_count[x.category];
  for (int c = 0; c < 10; ++c) EXPECT_LE(std::abs(test_count[c] - 0.35 * 9), 1.0);
}

TEST(Split, WarnsWhenCategoryLosesAllTrainSamples) {
  SynthConfig cfg;
  cfg.num_categories = 3;
  cfg.instances_per_category = 1;
  const auto s = split(synthesize_dataset(cfg), 0.6, 0);
  EXPECT_EQ(s.warnings.size(), 3u);
  EXPECT_EQ(s.test.size(), 3u);
}

TEST(Batches, SizesForHundredSamples) {
  const auto batches = make_batches(100, 32, 1, 0);
  ASSERT_EQ(batches.size(), 4u);
  EXPECT_EQ(batches[0].size(), 32u);
  EXPECT_EQ(batches[1].size(), 32u);
  EXPECT_EQ(batches[2].size(), 32u);
  EXPECT_EQ(batches[3].size(), 4u);
}

TEST(Batches, DropsSingletonTail) {
  const auto batches = make_batches(65, 32, 1, 0);
  EXPECT_EQ(batches.size(), 2u);
}

TEST(Batches, DeterministicPerEpochAndUnique) {
  EXPECT_EQ(make_batches(100, 32, 9, 3), make_batches(100, 32, 9, 3));
  EXPECT_NE(make_batches(100, 32, 9, 0), make_batches(100, 32, 9, 1));
  std::set<std::size_t> seen;
  for (const auto& b : make_batches(100, 32, 9, 3)) seen.insert(b.begin(), b.end());
  EXPECT_EQ(seen.size(), 100u);
}

TEST(Batches, RejectsBatchSizeBelowTwo) { EXPECT_THROW(make_batches(10, 1, 0, 0), ConfigError); }

}  // namespace
}  // namespace stbir
