// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/io/binary_format.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "promptmil/common/error.hpp"

namespace promptmil::io {

namespace {

using Bytes = std::vector<std::uint8_t>;

void put_u32(Bytes& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_u64(Bytes& out, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

void put_f32(Bytes& out, double v) { put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); }

std::uint32_t get_u32(const Bytes& in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[at + b]) << (8 * b);
  return v;
}

std::uint64_t get_u64(const Bytes& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(in[at + b]) << (8 * b);
  return v;
}

double get_f32(const Bytes& in, std::size_t at) {
  return static_cast<double>(std::bit_cast<float>(get_u32(in, at)));
}

Bytes slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path.string(), 0, "cannot open file");
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spill(const std::filesystem::path& path, const Bytes& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ValidationError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void check_magic(const std::filesystem::path& path, const Bytes& bytes, const char* magic,
                 std::size_t header) {
  if (bytes.size() < header) {
    throw FormatError(path.string(), bytes.size(),
                      "truncated header: expected at least " + std::to_string(header) +
                          " bytes, got " + std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), magic, 4) != 0) {
    throw FormatError(path.string(), 0, std::string("bad magic, expected ") + magic);
  }
  const std::uint32_t version = get_u32(bytes, 4);
  if (version != kFormatVersion) {
    throw FormatError(path.string(), 4, "unsupported version " + std::to_string(version));
  }
}

void check_length(const std::filesystem::path& path, const Bytes& bytes, std::uint64_t expected) {
  if (bytes.size() != expected) {
    throw FormatError(path.string(), std::min<std::uint64_t>(bytes.size(), expected),
                      "length mismatch: expected " + std::to_string(expected) + " bytes, got " +
                          std::to_string(bytes.size()));
  }
}

void check_dim(const std::filesystem::path& path, std::size_t dim, std::optional<std::size_t> expected) {
  if (dim == 0) throw FormatError(path.string(), 8, "dim must be positive");
  if (expected && *expected != dim) {
    throw FormatError(path.string(), 8,
                      "dim " + std::to_string(dim) + " does not match expected " + std::to_string(*expected));
  }
}

}  // namespace

std::uint64_t bag_file_size(std::size_t n_patches, std::size_t dim) {
  return kBagHeaderBytes + 4ULL * n_patches * dim;
}

std::uint64_t embedding_file_size(std::size_t count, std::size_t dim) {
  return kEmbeddingHeaderBytes + 4ULL * count * dim;
}

void write_bag(const std::filesystem::path& path, const Bag& bag) {
  const Tensor& f = bag.features;
  if (f.rows() == 0 || f.cols() == 0) throw ValidationError("write_bag: bag must have n >= 1 and dim >= 1");
  Bytes out;
  out.reserve(bag_file_size(f.rows(), f.cols()));
  out.insert(out.end(), {'P', 'B', 'A', 'G'});
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(f.cols()));
  put_u32(out, static_cast<std::uint32_t>(f.rows()));
  put_u32(out, bag.label);
  put_f32(out, bag.time);
  out.push_back(bag.event ? 1 : 0);
  out.insert(out.end(), 3, 0);
  for (double v : f.data()) put_f32(out, v);
  spill(path, out);
}

Bag read_bag(const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
  const Bytes bytes = slurp(path);
  check_magic(path, bytes, "PBAG", kBagHeaderBytes);
  const std::size_t dim = get_u32(bytes, 8);
  const std::size_t n = get_u32(bytes, 12);
  check_dim(path, dim, expected_dim);
  if (n == 0) throw FormatError(path.string(), 12, "bag has no patches");
  check_length(path, bytes, bag_file_size(n, dim));
  const std::uint8_t event = bytes[24];
  if (event > 1) throw FormatError(path.string(), 24, "event flag must be 0 or 1");

  Bag bag;
  bag.label = get_u32(bytes, 16);
  bag.time = get_f32(bytes, 20);
  bag.event = event == 1;
  bag.features = Tensor(n, dim);
  for (std::size_t i = 0; i < n * dim; ++i) bag.features[i] = get_f32(bytes, kBagHeaderBytes + 4 * i);
  if (!bag.features.all_finite()) throw FormatError(path.string(), kBagHeaderBytes, "non-finite feature value");
  return bag;
}

void write_embeddings(const std::filesystem::path& path, const Tensor& rows) {
  if (rows.rows() == 0 || rows.cols() == 0) throw ValidationError("write_embeddings: need count >= 1 and dim >= 1");
  Bytes out;
  out.reserve(embedding_file_size(rows.rows(), rows.cols()));
  out.insert(out.end(), {'P', 'E', 'B', '1'});
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(rows.cols()));
  put_u64(out, rows.rows());
  for (double v : rows.data()) put_f32(out, v);
  spill(path, out);
}

Tensor read_embeddings(const std::filesystem::path& path, std::optional<std::size_t> expected_dim) {
  const Bytes bytes = slurp(path);
  check_magic(path, bytes, "PEB1", kEmbeddingHeaderBytes);
  const std::size_t dim = get_u32(bytes, 8);
  const std::uint64_t count = get_u64(bytes, 12);
  check_dim(path, dim, expected_dim);
  if (count == 0) throw FormatError(path.string(), 12, "embedding file has no rows");
  if (count > (bytes.size() / 4) / dim + 1) {
    throw FormatError(path.string(), 12, "row count " + std::to_string(count) + " exceeds file size");
  }
  check_length(path, bytes, embedding_file_size(count, dim));
  Tensor rows(count, dim);
  for (std::size_t i = 0; i < count * dim; ++i) rows[i] = get_f32(bytes, kEmbeddingHeaderBytes + 4 * i);
  if (!rows.all_finite()) throw FormatError(path.string(), kEmbeddingHeaderBytes, "non-finite value");
  return rows;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  spill(path, Bytes(text.begin(), text.end()));
}

}  // namespace promptmil::io
