// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/common/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstdio>

#include "promptmil/common/error.hpp"

namespace promptmil {

namespace {
EVP_MD_CTX* as_ctx(void* p) { return static_cast<EVP_MD_CTX*>(p); }
}  // namespace

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  if (ctx_ == nullptr || EVP_DigestInit_ex(as_ctx(ctx_), EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest init failed");
  }
}

Sha256::~Sha256() { EVP_MD_CTX_free(as_ctx(ctx_)); }

void Sha256::update(std::span<const std::uint8_t> bytes) {
  EVP_DigestUpdate(as_ctx(ctx_), bytes.data(), bytes.size());
}

void Sha256::update(std::span<const double> values) {
  std::array<std::uint8_t, 8> buf{};
  for (double v : values) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b) buf[b] = static_cast<std::uint8_t>(bits >> (8 * b));
    update(buf);
  }
}

void Sha256::update(const std::string& text) {
  update_u64(text.size());
  EVP_DigestUpdate(as_ctx(ctx_), text.data(), text.size());
}

void Sha256::update_u64(std::uint64_t value) {
  std::array<std::uint8_t, 8> buf{};
  for (int b = 0; b < 8; ++b) buf[b] = static_cast<std::uint8_t>(value >> (8 * b));
  update(buf);
}

std::string Sha256::hex() {
  std::array<unsigned char, EVP_MAX_MD_SIZE> out{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(as_ctx(ctx_), out.data(), &len);
  std::string hex;
  hex.reserve(2 * len);
  char pair[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(pair, sizeof(pair), "%02x", out[i]);
    hex += pair;
  }
  return hex;
}

}  // namespace promptmil
