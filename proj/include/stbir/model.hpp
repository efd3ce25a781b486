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
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stbir/binary_io.hpp"
#include "stbir/ckfso.hpp"
#include "stbir/datamodel.hpp"
#include "stbir/encoders.hpp"

namespace stbir {

/// Three modality encoders plus the class-center bank(s) they are trained against.
struct Model {
  std::array<Encoder, 3> encoders;  // indexed by Modality
  std::vector<CenterBank> banks;    // one shared bank, or one per modality

  Encoder& encoder(Modality m) { return encoders[index_of(m)]; }
  const Encoder& encoder(Modality m) const { return encoders[index_of(m)]; }

  bool shared_bank() const noexcept { return banks.size() == 1; }
  CenterBank& bank_for(Modality m) { return shared_bank() ? banks.front() : banks[index_of(m)]; }
  const CenterBank& bank_for(Modality m) const { return shared_bank() ? banks.front() : banks[index_of(m)]; }

  std::size_t embed_dim() const noexcept { return encoders[0].embed_dim(); }
  ViewDims view_dims() const noexcept {
    return {encoders[0].input_dim(), encoders[1].input_dim(), encoders[2].input_dim()};
  }
};

struct ModelShape {
  ViewDims views;
  std::size_t hidden_dim = 128;
  std::size_t embed_dim = 64;
  std::size_t num_classes = 0;
  bool shared_bank = true;
};

inline Model init_model(const ModelShape& shape, std::uint64_t seed) {
  Model model;
  const std::array<std::size_t, 3> inputs{shape.views.sketch, shape.views.text, shape.views.image};
  for (Modality m : kModalities) {
    model.encoder(m) =
        init_encoder(m, inputs[index_of(m)], shape.hidden_dim, shape.embed_dim, mix_seed(seed, 100 + index_of(m)));
  }
  const std::size_t bank_count = shape.shared_bank ? 1 : 3;
  for (std::size_t b = 0; b < bank_count; ++b) {
    model.banks.push_back(init_center_bank(shape.num_classes, shape.embed_dim, mix_seed(seed, 200 + b)));
  }
  return model;
}

inline Matrix encode(const Model& model, Modality m, const Matrix& views) { return encode(model.encoder(m), views); }

/// Digest over every encoder and center parameter.
inline std::uint64_t checksum(const Model& model) {
  ParamDigest digest;
  for (const auto& enc : model.encoders) {
    EncoderParams::for_each_block(enc.params, [&](const Matrix& m) { digest.update(m.values()); });
  }
  for (const auto& bank : model.banks) digest.update(bank.centers.values());
  return digest.value();
}

// ---------------------------------------------------------------------------
// Checkpoint layout
//
//   line 1: JSON descriptor
//     {"format":"stbir-checkpoint","version":1,"dtype":"float64-le",
//      "encoders":[{"modality","input_dim","hidden_dim","embed_dim","step_count","trainable"} x3],
//      "center_banks":[{"rows","cols","step_count"} ...]}
//   payload, row-major little-endian float64:
//     for each encoder in order sketch, text, image: W1, b1, W2, b2
//     for each center bank: centers
//
// Optimizer moments are not stored.

inline void write_checkpoint(std::ostream& out, const Model& model) {
  nlohmann::json header = {{"format", "stbir-checkpoint"}, {"version", 1}, {"dtype", "float64-le"}};
  auto encoders = nlohmann::json::array();
  for (const auto& enc : model.encoders) {
    encoders.push_back({{"modality", to_string(enc.modality)},
                        {"input_dim", enc.input_dim()},
                        {"hidden_dim", enc.hidden_dim()},
                        {"embed_dim", enc.embed_dim()},
                        {"step_count", enc.step_count},
                        {"trainable", enc.trainable}});
  }
  header["encoders"] = encoders;
  auto banks = nlohmann::json::array();
  for (const auto& bank : model.banks) {
    banks.push_back({{"rows", bank.centers.rows()}, {"cols", bank.centers.cols()}, {"step_count", bank.step_count}});
  }
  header["center_banks"] = banks;
  out << header.dump() << '\n';
  for (const auto& enc : model.encoders) {
    EncoderParams::for_each_block(enc.params, [&](const Matrix& m) { write_f64_le(out, m.values()); });
  }
  for (const auto& bank : model.banks) write_f64_le(out, bank.centers.values());
  if (!out) throw IoError("failed writing checkpoint");
}

inline Model read_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing checkpoint header");
  Model model;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.at("format").get<std::string>() != "stbir-checkpoint") throw ParseError(1, "not a checkpoint");
    if (header.at("version").get<int>() != 1) throw ParseError(1, "unsupported checkpoint version");
    if (header.at("dtype").get<std::string>() != "float64-le") throw ParseError(1, "unsupported dtype");
    const auto& encoders = header.at("encoders");
    if (!encoders.is_array() || encoders.size() != 3) throw SchemaError("checkpoint must hold 3 encoders");
    for (Modality m : kModalities) {
      const auto& e = encoders[index_of(m)];
      if (modality_from_string(e.at("modality").get<std::string>()) != m) {
        throw SchemaError("checkpoint encoders out of order");
      }
      auto& enc = model.encoder(m);
      enc.modality = m;
      const auto in_dim = e.at("input_dim").get<std::size_t>();
      const auto hidden = e.at("hidden_dim").get<std::size_t>();
      const auto embed = e.at("embed_dim").get<std::size_t>();
      enc.params = EncoderParams::zeros(in_dim, hidden, embed);
      enc.first_moment = EncoderParams::zeros(in_dim, hidden, embed);
      enc.second_moment = EncoderParams::zeros(in_dim, hidden, embed);
      enc.step_count = e.at("step_count").get<std::int64_t>();
      enc.trainable = e.at("trainable").get<bool>();
    }
    const auto& banks = header.at("center_banks");
    if (!banks.is_array() || (banks.size() != 1 && banks.size() != 3)) {
      throw SchemaError("checkpoint must hold 1 or 3 center banks");
    }
    for (const auto& b : banks) {
      const auto rows = b.at("rows").get<std::size_t>();
      const auto cols = b.at("cols").get<std::size_t>();
      model.banks.push_back({Matrix(rows, cols), Matrix(rows, cols), Matrix(rows, cols),
                             b.at("step_count").get<std::int64_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, e.what());
  }
  const std::size_t embed = model.encoders[0].embed_dim();
  for (const auto& enc : model.encoders) {
    if (enc.embed_dim() != embed) throw SchemaError("encoders disagree on embedding dim");
  }
  for (const auto& bank : model.banks) {
    if (bank.dim() != embed) throw SchemaError("center bank dim != embedding dim");
  }
  for (auto& enc : model.encoders) {
    EncoderParams::for_each_block(enc.params, [&](Matrix& m) { read_f64_le(in, m.values()); });
  }
  for (auto& bank : model.banks) read_f64_le(in, bank.centers.values());
  if (in.peek() != std::char_traits<char>::eof()) throw SchemaError("trailing bytes after checkpoint payload");
  return model;
}

inline void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  write_file_atomically(path, [&](std::ostream& out) { write_checkpoint(out, model); }, true);
}

inline Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  return read_checkpoint(in);
}

}  // namespace stbir
