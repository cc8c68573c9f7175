// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/encoders/text_encoder.hpp"

#include <cmath>
#include <sstream>

#include "promptmil/common/digest.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/common/rng.hpp"

namespace promptmil::encoders {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

Tensor normal_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale) {
  Tensor t(rows, cols);
  for (double& v : t.data()) v = scale * rng.normal();
  return t;
}

}  // namespace

ToyTextEncoder::ToyTextEncoder(std::size_t dim, std::uint64_t seed, std::size_t vocab)
    : dim_(dim), vocab_(vocab), seed_(seed) {
  if (dim == 0 || vocab == 0) throw ValidationError("text encoder: dim and vocab must be positive");
  Rng rng(seed);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
  table_ = normal_matrix(rng, vocab, dim, scale);
  query_t_ = normal_matrix(rng, dim, dim, scale);
  key_t_ = normal_matrix(rng, dim, dim, scale);
  value_t_ = normal_matrix(rng, dim, dim, scale);
  hidden_t_ = normal_matrix(rng, dim, dim, scale);
  output_t_ = normal_matrix(rng, dim, dim, scale);
}

Tensor ToyTextEncoder::embed_tokens(const std::string& text) const {
  std::istringstream words(text);
  std::vector<std::size_t> ids;
  for (std::string w; words >> w;) ids.push_back(fnv1a64(w) % vocab_);
  if (ids.empty()) throw ValidationError("text encoder: text has no tokens");
  Tensor tokens(ids.size(), dim_);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto src = table_.row_span(ids[i]);
    std::copy(src.begin(), src.end(), tokens.row_span(i).begin());
  }
  return tokens;
}

Var ToyTextEncoder::encode(Graph& graph, std::optional<Var> prefix, const Tensor& tokens) const {
  if (tokens.cols() != dim_ || tokens.rows() == 0) {
    throw ShapeError("text encoder: tokens " + tokens.shape_string() + " for width " + std::to_string(dim_));
  }
  Var seq = graph.constant(tokens);
  if (prefix) {
    if (prefix->cols() != dim_) {
      throw ShapeError("text encoder: context " + prefix->value().shape_string() + " for width " +
                       std::to_string(dim_));
    }
    const Var parts[] = {*prefix, seq};
    seq = ad::concat_rows(parts);
  }
  const Var q = ad::matmul(seq, graph.constant(query_t_));
  const Var k = ad::matmul(seq, graph.constant(key_t_));
  const Var v = ad::matmul(seq, graph.constant(value_t_));
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dim_));
  const Var attn = ad::row_softmax(ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt));
  const Var mixed = ad::add(seq, ad::matmul(attn, v));
  const Var hidden = ad::tanh(ad::matmul(mixed, graph.constant(hidden_t_)));
  const Var pooled = ad::mean_rows(hidden);
  return ad::l2_normalize_rows(ad::matmul(pooled, graph.constant(output_t_)));
}

std::string ToyTextEncoder::digest() const {
  Sha256 sha;
  sha.update_u64(dim_);
  sha.update_u64(vocab_);
  for (const Tensor* t : {&table_, &query_t_, &key_t_, &value_t_, &hidden_t_, &output_t_}) {
    sha.update(t->data());
  }
  return sha.hex();
}

}  // namespace promptmil::encoders
