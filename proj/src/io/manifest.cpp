// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/io/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "promptmil/common/error.hpp"
#include "promptmil/io/binary_format.hpp"

namespace promptmil::io {

using nlohmann::json;

const char* split_name(Split split) { return split == Split::kTest ? "test" : "train-pool"; }

Split parse_split(const std::string& name) {
  if (name == "train-pool") return Split::kTrainPool;
  if (name == "test") return Split::kTest;
  throw ValidationError("manifest: unknown split '" + name + "' (expected train-pool or test)");
}

std::vector<std::size_t> Manifest::split_indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].split == split) out.push_back(i);
  }
  return out;
}

const ManifestEntry* Manifest::find(const std::string& id) const {
  for (const auto& e : entries) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

namespace {

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError("manifest: " + where + " is missing '" + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("manifest: " + where + "." + key + ": " + e.what());
  }
}

void require_file(const Manifest& m, const std::string& rel, const std::string& where) {
  if (rel.empty()) throw ValidationError("manifest: " + where + " has an empty path");
  if (!std::filesystem::exists(m.resolve(rel))) {
    throw ValidationError("manifest: " + where + " references missing file " + m.resolve(rel).string());
  }
}

void validate(const Manifest& m, bool check_files) {
  const std::size_t u = m.num_classes();
  if (m.schema_version != 1) {
    throw ValidationError("manifest: unsupported schema_version " + std::to_string(m.schema_version));
  }
  if (u < 2) throw ValidationError("manifest: need at least 2 classes");
  if (m.dim == 0) throw ValidationError("manifest: dim must be positive");
  if (m.task != "classification" && m.task != "survival") {
    throw ValidationError("manifest: task must be 'classification' or 'survival'");
  }

  std::set<std::string> ids;
  std::size_t test_count = 0;
  for (const auto& e : m.entries) {
    if (e.id.empty()) throw ValidationError("manifest: entry with empty id");
    if (!ids.insert(e.id).second) throw ValidationError("manifest: duplicate id '" + e.id + "'");
    if (e.label >= u) {
      throw ValidationError("manifest: entry '" + e.id + "' label " + std::to_string(e.label) +
                            " >= class count " + std::to_string(u));
    }
    if (e.time && !(*e.time > 0.0)) throw ValidationError("manifest: entry '" + e.id + "' time must be > 0");
    if (m.is_survival() && (!e.time || !e.event)) {
      throw ValidationError("manifest: survival entry '" + e.id + "' needs time and event");
    }
    if (e.split == Split::kTest) ++test_count;
    if (check_files) require_file(m, e.bag, "entry '" + e.id + "'");
  }
  if (test_count == 0) throw ValidationError("manifest: test split is empty");

  if (m.patch_tags.empty()) throw ValidationError("manifest: example_bank.patch_tags is empty");
  for (std::size_t t : m.patch_tags) {
    if (t >= u) throw ValidationError("manifest: patch example tag " + std::to_string(t) + " out of range");
  }
  if (check_files) require_file(m, m.patch_bank, "example_bank.patch_bank");

  for (const auto& s : m.slide_examples) {
    if (s.label >= u) throw ValidationError("manifest: slide example '" + s.id + "' tag out of range");
    if (s.bag.empty()) {
      const ManifestEntry* e = m.find(s.id);
      if (e == nullptr) throw ValidationError("manifest: slide example '" + s.id + "' matches no entry");
      if (e->split == Split::kTest) {
        throw ValidationError("manifest: slide example '" + s.id + "' is in the test split");
      }
    } else {
      if (!ids.insert(s.id).second) throw ValidationError("manifest: duplicate id '" + s.id + "'");
      if (check_files) require_file(m, s.bag, "slide example '" + s.id + "'");
    }
  }

  if (!m.prompts.empty() && m.prompts.size() != u) {
    throw ValidationError("manifest: " + std::to_string(m.prompts.size()) + " prompt entries for " +
                          std::to_string(u) + " classes");
  }
  if (m.static_text && check_files) {
    require_file(m, m.static_text->task, "static_text.task");
    require_file(m, m.static_text->slide_description, "static_text.slide_description");
    require_file(m, m.static_text->patch_description, "static_text.patch_description");
  }
}

}  // namespace

Manifest parse_manifest(const std::string& json_text, const std::filesystem::path& base_dir,
                        bool check_files) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("manifest: invalid JSON: ") + e.what());
  }
  Manifest m;
  m.base_dir = base_dir;
  m.schema_version = doc.value("schema_version", 1);
  m.dataset = doc.value("dataset", std::string());
  m.dim = field<std::size_t>(doc, "dim", "document");
  m.task = doc.value("task", std::string("classification"));
  m.classes = field<std::vector<std::string>>(doc, "classes", "document");

  if (!doc.contains("entries") || !doc["entries"].is_array()) {
    throw ValidationError("manifest: 'entries' must be an array");
  }
  for (const auto& item : doc["entries"]) {
    ManifestEntry e;
    e.id = field<std::string>(item, "id", "entry");
    e.bag = field<std::string>(item, "bag", "entry '" + e.id + "'");
    e.label = field<std::size_t>(item, "label", "entry '" + e.id + "'");
    e.split = parse_split(field<std::string>(item, "split", "entry '" + e.id + "'"));
    if (item.contains("time")) e.time = item["time"].get<double>();
    if (item.contains("event")) e.event = item["event"].get<bool>();
    if (item.contains("key_patches")) e.key_patches = item["key_patches"].get<std::vector<std::size_t>>();
    m.entries.push_back(std::move(e));
  }

  if (!doc.contains("example_bank")) throw ValidationError("manifest: missing 'example_bank'");
  const json& bank = doc["example_bank"];
  m.patch_bank = field<std::string>(bank, "patch_bank", "example_bank");
  m.patch_tags = field<std::vector<std::size_t>>(bank, "patch_tags", "example_bank");
  if (bank.contains("slide_examples")) {
    for (const auto& item : bank["slide_examples"]) {
      SlideExampleRef s;
      s.id = field<std::string>(item, "id", "slide example");
      s.label = field<std::size_t>(item, "label", "slide example '" + s.id + "'");
      s.bag = item.value("bag", std::string());
      m.slide_examples.push_back(std::move(s));
    }
  }

  if (doc.contains("prompts")) {
    for (const auto& item : doc["prompts"]) {
      m.prompts.push_back({field<std::string>(item, "task", "prompt"),
                           field<std::string>(item, "slide_description", "prompt"),
                           field<std::string>(item, "patch_description", "prompt")});
    }
  }
  if (doc.contains("static_text")) {
    const json& st = doc["static_text"];
    m.static_text = StaticTextPaths{field<std::string>(st, "task", "static_text"),
                                    field<std::string>(st, "slide_description", "static_text"),
                                    field<std::string>(st, "patch_description", "static_text")};
  }
  validate(m, check_files);
  return m;
}

Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("manifest: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_manifest(buf.str(), path.parent_path(), true);
}

std::string manifest_to_json(const Manifest& m) {
  json doc;
  doc["schema_version"] = m.schema_version;
  doc["dataset"] = m.dataset;
  doc["dim"] = m.dim;
  doc["task"] = m.task;
  doc["classes"] = m.classes;
  json entries = json::array();
  for (const auto& e : m.entries) {
    json item{{"id", e.id}, {"bag", e.bag}, {"label", e.label}, {"split", split_name(e.split)}};
    if (e.time) item["time"] = *e.time;
    if (e.event) item["event"] = *e.event;
    if (!e.key_patches.empty()) item["key_patches"] = e.key_patches;
    entries.push_back(std::move(item));
  }
  doc["entries"] = std::move(entries);
  json slides = json::array();
  for (const auto& s : m.slide_examples) {
    json item{{"id", s.id}, {"label", s.label}};
    if (!s.bag.empty()) item["bag"] = s.bag;
    slides.push_back(std::move(item));
  }
  doc["example_bank"] = {{"patch_bank", m.patch_bank}, {"patch_tags", m.patch_tags}, {"slide_examples", slides}};
  if (!m.prompts.empty()) {
    json prompts = json::array();
    for (const auto& p : m.prompts) {
      prompts.push_back({{"task", p.task},
                         {"slide_description", p.slide_description},
                         {"patch_description", p.patch_description}});
    }
    doc["prompts"] = std::move(prompts);
  }
  if (m.static_text) {
    doc["static_text"] = {{"task", m.static_text->task},
                          {"slide_description", m.static_text->slide_description},
                          {"patch_description", m.static_text->patch_description}};
  }
  return doc.dump(2) + "\n";
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
  write_text_atomic(path, manifest_to_json(manifest));
}

}  // namespace promptmil::io
