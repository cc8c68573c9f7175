// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "promptmil/autodiff/graph.hpp"
#include "promptmil/autodiff/tensor.hpp"

namespace promptmil::encoders {

std::uint64_t fnv1a64(std::string_view bytes);

/// Frozen stand-in for a pretrained text tower.
///
/// One single-head self-attention block with a residual, a tanh feed-forward
/// layer, mean pooling over positions, an output linear map and l2
/// normalization. There are no positional encodings, so the pooled output is
/// invariant to permuting the input sequence. All weights come from a
/// SplitMix64 stream (Box-Muller normals scaled by 1/sqrt(d)) and enter graphs
/// only as constants: no gradient can reach them.
class ToyTextEncoder {
 public:
  static constexpr std::size_t kDefaultVocab = 4096;

  ToyTextEncoder(std::size_t dim, std::uint64_t seed, std::size_t vocab = kDefaultVocab);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t vocab() const noexcept { return vocab_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Whitespace tokens -> FNV-1a-64 mod vocab -> rows of the frozen table.
  /// Throws ValidationError for text without tokens.
  Tensor embed_tokens(const std::string& text) const;

  /// Encodes [prefix; tokens] into a 1 x d unit row. `prefix` is the
  /// learnable context (M x d) or empty for M = 0.
  Var encode(Graph& graph, std::optional<Var> prefix, const Tensor& tokens) const;

  /// SHA-256 over the serialized weights (little-endian f64, fixed order).
  std::string digest() const;

 private:
  std::size_t dim_;
  std::size_t vocab_;
  std::uint64_t seed_;
  Tensor table_;
  // Stored transposed (d x d) so x * W^T is a plain matmul.
  Tensor query_t_;
  Tensor key_t_;
  Tensor value_t_;
  Tensor hidden_t_;
  Tensor output_t_;
};

}  // namespace promptmil::encoders
