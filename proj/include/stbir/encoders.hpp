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
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>

#include "stbir/error.hpp"
#include "stbir/matrix.hpp"
#include "stbir/random.hpp"

namespace stbir {

enum class Modality { sketch = 0, text = 1, image = 2 };

inline constexpr std::array<Modality, 3> kModalities{Modality::sketch, Modality::text, Modality::image};

inline const char* to_string(Modality m) {
  switch (m) {
    case Modality::sketch: return "sketch";
    case Modality::text: return "text";
    case Modality::image: return "image";
  }
  return "?";
}

inline Modality modality_from_string(const std::string& s) {
  if (s == "sketch") return Modality::sketch;
  if (s == "text") return Modality::text;
  if (s == "image") return Modality::image;
  throw ConfigError("unknown modality '" + s + "'");
}

inline char modality_letter(Modality m) {
  return m == Modality::sketch ? 'S' : m == Modality::text ? 'T' : 'I';
}

inline std::size_t index_of(Modality m) { return static_cast<std::size_t>(m); }

/// Parameters of x -> W2 * tanh(W1 * x + b1) + b2. Biases are stored as 1-row matrices.
struct EncoderParams {
  Matrix w1;  // hidden x input
  Matrix b1;  // 1 x hidden
  Matrix w2;  // embed x hidden
  Matrix b2;  // 1 x embed

  static EncoderParams zeros(std::size_t input_dim, std::size_t hidden_dim, std::size_t embed_dim) {
    return {Matrix(hidden_dim, input_dim), Matrix(1, hidden_dim), Matrix(embed_dim, hidden_dim),
            Matrix(1, embed_dim)};
  }

  /// Visits blocks in serialization order: W1, b1, W2, b2.
  template <typename Self, typename Fn>
  static void for_each_block(Self& self, Fn&& fn) {
    fn(self.w1);
    fn(self.b1);
    fn(self.w2);
    fn(self.b2);
  }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

struct Encoder {
  Modality modality = Modality::sketch;
  EncoderParams params;
  EncoderParams first_moment;
  EncoderParams second_moment;
  std::int64_t step_count = 0;
  bool trainable = true;

  std::size_t input_dim() const noexcept { return params.w1.cols(); }
  std::size_t hidden_dim() const noexcept { return params.w1.rows(); }
  std::size_t embed_dim() const noexcept { return params.w2.rows(); }
};

/// Glorot-uniform weights, zero biases, zero optimizer moments.
inline Encoder init_encoder(Modality modality, std::size_t input_dim, std::size_t hidden_dim, std::size_t embed_dim,
                            std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1 || embed_dim < 1) throw ConfigError("encoder dims must be >= 1");
  Encoder enc;
  enc.modality = modality;
  enc.params = EncoderParams::zeros(input_dim, hidden_dim, embed_dim);
  enc.first_moment = EncoderParams::zeros(input_dim, hidden_dim, embed_dim);
  enc.second_moment = EncoderParams::zeros(input_dim, hidden_dim, embed_dim);

  Rng rng(seed);
  auto glorot = [&rng](Matrix& w) {
    const double a = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double& v : w.values()) v = rng.uniform(-a, a);
  };
  glorot(enc.params.w1);
  glorot(enc.params.w2);
  return enc;
}

namespace detail {

inline Matrix hidden_activations(const EncoderParams& p, const Matrix& views) {
  const std::size_t n = views.rows();
  const std::size_t hidden = p.w1.rows();
  Matrix h(n, hidden);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = views.row(i);
    auto out = h.row(i);
    for (std::size_t k = 0; k < hidden; ++k) out[k] = std::tanh(dot(p.w1.row(k), x) + p.b1(0, k));
  }
  return h;
}

inline void check_views(const Encoder& enc, const Matrix& views) {
  if (views.cols() != enc.input_dim()) {
    throw ShapeError(std::string(to_string(enc.modality)) + " encoder expects input dim " +
                     std::to_string(enc.input_dim()) + ", got " + std::to_string(views.cols()));
  }
}

}  // namespace detail

/// Per-row embedding; no normalization is applied.
inline Matrix encode(const Encoder& enc, const Matrix& views) {
  detail::check_views(enc, views);
  const Matrix h = detail::hidden_activations(enc.params, views);
  const std::size_t embed = enc.embed_dim();
  Matrix out(views.rows(), embed);
  for (std::size_t i = 0; i < views.rows(); ++i) {
    auto hi = h.row(i);
    auto oi = out.row(i);
    for (std::size_t j = 0; j < embed; ++j) oi[j] = dot(enc.params.w2.row(j), hi) + enc.params.b2(0, j);
  }
  return out;
}

struct EncoderGrads {
  EncoderParams params;
  Matrix input;  // N x input_dim
};

/// Gradients of <upstream, encode(enc, views)> w.r.t. parameters and inputs, summed over rows.
inline EncoderGrads backward(const Encoder& enc, const Matrix& views, const Matrix& upstream) {
  detail::check_views(enc, views);
  if (upstream.rows() != views.rows() || upstream.cols() != enc.embed_dim()) {
    throw ShapeError("upstream gradient must be " + std::to_string(views.rows()) + "x" +
                     std::to_string(enc.embed_dim()) + ", got " + shape_string(upstream));
  }
  const auto& p = enc.params;
  const std::size_t hidden = enc.hidden_dim();
  const std::size_t embed = enc.embed_dim();
  const std::size_t in_dim = enc.input_dim();
  const Matrix h = detail::hidden_activations(p, views);

  EncoderGrads g{EncoderParams::zeros(in_dim, hidden, embed), Matrix(views.rows(), in_dim)};
  std::vector<double> pre(hidden);
  for (std::size_t n = 0; n < views.rows(); ++n) {
    auto up = upstream.row(n);
    auto hn = h.row(n);
    for (std::size_t j = 0; j < embed; ++j) {
      const double u = up[j];
      if (u == 0.0) continue;
      g.params.b2(0, j) += u;
      auto gw2 = g.params.w2.row(j);
      for (std::size_t k = 0; k < hidden; ++k) gw2[k] += u * hn[k];
    }
    // dL/d(pre-activation) = (W2^T up) * (1 - h^2)
    for (std::size_t k = 0; k < hidden; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < embed; ++j) acc += p.w2(j, k) * up[j];
      pre[k] = acc * (1.0 - hn[k] * hn[k]);
    }
    auto x = views.row(n);
    auto gx = g.input.row(n);
    for (std::size_t k = 0; k < hidden; ++k) {
      const double d = pre[k];
      if (d == 0.0) continue;
      g.params.b1(0, k) += d;
      auto gw1 = g.params.w1.row(k);
      auto w1 = p.w1.row(k);
      for (std::size_t c = 0; c < in_dim; ++c) {
        gw1[c] += d * x[c];
        gx[c] += d * w1[c];
      }
    }
  }
  return g;
}

inline void set_trainable(Encoder& enc, bool flag) { enc.trainable = flag; }

/// FNV-1a over the little-endian bytes of a sequence of doubles.
class ParamDigest {
 public:
  void update(std::span<const double> values) {
    for (double v : values) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int b = 0; b < 8; ++b) {
        state_ ^= (bits >> (8 * b)) & 0xFFu;
        state_ *= 0x100000001B3ULL;
      }
    }
  }
  std::uint64_t value() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xCBF29CE484222325ULL;
};

inline std::string to_hex(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[static_cast<std::size_t>(i)] = kDigits[v & 0xF];
  return out;
}

/// Digest over all parameter bytes (W1, b1, W2, b2). Moments and step count are excluded.
inline std::uint64_t checksum(const Encoder& enc) {
  ParamDigest digest;
  EncoderParams::for_each_block(enc.params, [&](const Matrix& m) { digest.update(m.values()); });
  return digest.value();
}

}  // namespace stbir
