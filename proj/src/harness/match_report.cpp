// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/harness/match_report.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "promptmil/mil/layers.hpp"

namespace promptmil::harness {

using nlohmann::json;

MatchReport match_report(const Predictor& predictor, const ExperimentData& data, std::size_t top_k) {
  MatchReport report;
  std::size_t annotated = 0, hits = 0;
  const auto& bank = data.bank;
  for (std::size_t idx : data.manifest.split_indices(io::Split::kTest)) {
    const io::ManifestEntry& e = data.manifest.entries[idx];
    const Tensor& bag = data.source.bag(e.id).features;
    const Predictor::Output out = predictor.predict(bag);

    BagReport br;
    br.id = e.id;
    br.label = e.label;
    if (out.slide_match) {
      br.slide_example = bank.slides.at(*out.slide_match).id;
      br.slide_cosine = out.slide_cosine;
    }
    std::vector<std::size_t> order(out.attention.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return out.attention[a] > out.attention[b]; });
    const std::set<std::size_t> keys(e.key_patches.begin(), e.key_patches.end());
    for (std::size_t r = 0; r < std::min(top_k, order.size()); ++r) {
      const std::size_t j = order[r];
      PatchReport pr;
      pr.patch = j;
      pr.attention = out.attention[j];
      pr.matched_example = mil::best_match(bag.row_span(j), bank.patches);
      pr.matched_tag = bank.patch_tags.at(pr.matched_example);
      pr.cosine = cosine(bag.row_span(j), bank.patches.row_span(pr.matched_example));
      if (!keys.empty()) pr.key = keys.contains(j);
      br.top_patches.push_back(pr);
    }
    if (!keys.empty() && !order.empty()) {
      ++annotated;
      if (keys.contains(order.front())) ++hits;
    }
    report.bags.push_back(std::move(br));
  }
  if (annotated > 0) report.key_hit_rate = static_cast<double>(hits) / static_cast<double>(annotated);
  return report;
}

std::string MatchReport::to_json() const {
  json arr = json::array();
  for (const auto& b : bags) {
    json patches = json::array();
    for (const auto& p : b.top_patches) {
      json pj = {{"patch", p.patch},
                 {"attention", p.attention},
                 {"matched_example", p.matched_example},
                 {"matched_tag", p.matched_tag},
                 {"cosine", p.cosine}};
      if (p.key) pj["key"] = *p.key;
      patches.push_back(pj);
    }
    json bj = {{"id", b.id}, {"label", b.label}, {"top_patches", patches}};
    if (b.slide_example) {
      bj["slide_example"] = *b.slide_example;
      bj["slide_cosine"] = b.slide_cosine;
    }
    arr.push_back(bj);
  }
  json j = {{"bags", arr}};
  if (key_hit_rate) j["key_hit_rate"] = *key_hit_rate;
  return j.dump(2) + "\n";
}

std::string MatchReport::to_csv() const {
  std::ostringstream ss;
  ss.precision(17);
  ss << "id,label,slide_example,slide_cosine,rank,patch,attention,matched_example,matched_tag,cosine,key\n";
  for (const auto& b : bags) {
    for (std::size_t r = 0; r < b.top_patches.size(); ++r) {
      const auto& p = b.top_patches[r];
      ss << b.id << ',' << b.label << ',' << b.slide_example.value_or("") << ',' << b.slide_cosine << ',' << r
         << ',' << p.patch << ',' << p.attention << ',' << p.matched_example << ',' << p.matched_tag << ','
         << p.cosine << ',' << (p.key ? (*p.key ? "1" : "0") : "") << '\n';
    }
  }
  return ss.str();
}

}  // namespace promptmil::harness
