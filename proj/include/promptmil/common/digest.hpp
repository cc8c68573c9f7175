// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace promptmil {

/// Incremental SHA-256 over little-endian encodings of the fed values.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::span<const std::uint8_t> bytes);
  void update(std::span<const double> values);
  void update(const std::string& text);
  void update_u64(std::uint64_t value);

  /// Lowercase hex digest. The hasher cannot be reused afterwards.
  std::string hex();

 private:
  void* ctx_;
};

}  // namespace promptmil
