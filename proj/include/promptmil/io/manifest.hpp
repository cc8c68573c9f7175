// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace promptmil::io {

enum class Split { kTrainPool, kTest };

const char* split_name(Split split);
Split parse_split(const std::string& name);

struct ManifestEntry {
  std::string id;
  std::string bag;  // relative to the manifest directory
  std::size_t label = 0;
  std::optional<double> time;
  std::optional<bool> event;
  Split split = Split::kTrainPool;
  /// Ground-truth key-pattern patch rows, present only for planted data.
  std::vector<std::size_t> key_patches;
};

struct SlideExampleRef {
  std::string id;
  std::size_t label = 0;
  /// Standalone bag file; when empty, `id` names a train-pool entry.
  std::string bag;
};

struct ClassPrompt {
  std::string task;
  std::string slide_description;
  std::string patch_description;
};

struct StaticTextPaths {
  std::string task;
  std::string slide_description;
  std::string patch_description;
};

struct Manifest {
  int schema_version = 1;
  std::string dataset;
  std::size_t dim = 0;
  /// "classification" or "survival".
  std::string task = "classification";
  std::vector<std::string> classes;
  std::vector<ManifestEntry> entries;

  std::string patch_bank;
  std::vector<std::size_t> patch_tags;
  std::vector<SlideExampleRef> slide_examples;

  std::vector<ClassPrompt> prompts;
  std::optional<StaticTextPaths> static_text;

  /// Directory all relative paths resolve against. Not serialized.
  std::filesystem::path base_dir;

  std::size_t num_classes() const { return classes.size(); }
  bool is_survival() const { return task == "survival"; }
  std::filesystem::path resolve(const std::string& relative) const { return base_dir / relative; }
  std::vector<std::size_t> split_indices(Split split) const;
  const ManifestEntry* find(const std::string& id) const;
};

/// Parses and validates: label indices < U, ids unique, referenced files
/// exist, test split non-empty, slide examples never drawn from the test
/// split. Throws ValidationError.
Manifest load_manifest(const std::filesystem::path& path);
Manifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir,
                        bool check_files = true);
std::string manifest_to_json(const Manifest& manifest);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

}  // namespace promptmil::io
