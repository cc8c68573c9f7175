// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include "promptmil/autodiff/tensor.hpp"

namespace promptmil::io {

// PBAG v1, little-endian:
//   0  char[4] "PBAG"
//   4  u32 version = 1
//   8  u32 dim
//  12  u32 n_patches (>= 1)
//  16  u32 label
//  20  f32 time
//  24  u8  event
//  25  u8[3] zero padding
//  28  f32[n_patches * dim] row-major payload
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kBagHeaderBytes = 28;
// PEB1 v1: "PEB1", u32 version, u32 dim, u64 count, then f32[count * dim].
inline constexpr std::size_t kEmbeddingHeaderBytes = 20;

/// One slide: its patch features and slide-level metadata.
struct Bag {
  Tensor features;  // n x d
  std::uint32_t label = 0;
  double time = 0.0;  // stored as f32
  bool event = false;
};

std::uint64_t bag_file_size(std::size_t n_patches, std::size_t dim);
std::uint64_t embedding_file_size(std::size_t count, std::size_t dim);

/// Writes atomically (temporary file, then rename). Values are narrowed to f32.
void write_bag(const std::filesystem::path& path, const Bag& bag);
/// Validates magic, version and exact length before touching the payload.
/// When `expected_dim` is set a different dim is rejected.
Bag read_bag(const std::filesystem::path& path, std::optional<std::size_t> expected_dim = {});

void write_embeddings(const std::filesystem::path& path, const Tensor& rows);
Tensor read_embeddings(const std::filesystem::path& path,
                       std::optional<std::size_t> expected_dim = {});

/// Atomic text write used for JSON/CSV outputs.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

}  // namespace promptmil::io
