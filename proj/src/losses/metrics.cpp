// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/losses/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>

#include "promptmil/common/error.hpp"

namespace promptmil::losses {

namespace {

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw ValidationError(std::string(what) + ": non-finite score");
  }
}

// Fenwick tree of counts over risk ranks.
class CountTree {
 public:
  explicit CountTree(std::size_t n) : tree_(n + 1, 0) {}
  void add(std::size_t rank) {
    for (std::size_t i = rank + 1; i < tree_.size(); i += i & (~i + 1)) ++tree_[i];
  }
  // Count of inserted ranks < rank.
  std::uint64_t below(std::size_t rank) const {
    std::uint64_t s = 0;
    for (std::size_t i = rank; i > 0; i -= i & (~i + 1)) s += tree_[i];
    return s;
  }

 private:
  std::vector<std::uint64_t> tree_;
};

}  // namespace

double auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  require_finite(scores, "auc");
  std::uint64_t n_pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ValidationError("auc: labels must be 0 or 1");
    n_pos += static_cast<std::uint64_t>(y);
  }
  const std::uint64_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw ValidationError("auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Twice the positive rank sum, with tied blocks sharing their midrank.
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const std::uint64_t twice_midrank = (i + 1) + (j + 1);
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) twice_rank_sum += twice_midrank;
    }
    i = j + 1;
  }
  const std::uint64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  const double wins = static_cast<double>(twice_u / 2) + 0.5 * static_cast<double>(twice_u % 2);
  return wins / static_cast<double>(n_pos * n_neg);
}

double macro_auc_ovr(const Tensor& probs, std::span<const std::size_t> labels) {
  if (probs.rows() != labels.size()) throw ShapeError("macro_auc_ovr: rows and labels differ");
  std::vector<double> aucs;
  for (std::size_t c = 0; c < probs.cols(); ++c) {
    std::vector<int> y(labels.size());
    std::vector<double> s(labels.size());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      y[i] = labels[i] == c ? 1 : 0;
      pos += static_cast<std::size_t>(y[i]);
      s[i] = probs(i, c);
    }
    if (pos == 0 || pos == labels.size()) continue;
    aucs.push_back(auc(s, y));
  }
  if (aucs.size() < 2) throw ValidationError("macro_auc_ovr: need at least two classes present");
  return std::accumulate(aucs.begin(), aucs.end(), 0.0) / static_cast<double>(aucs.size());
}

double c_index(std::span<const double> risks, std::span<const SurvivalRecord> records) {
  if (risks.size() != records.size()) throw ShapeError("c_index: risks and records differ in length");
  require_finite(risks, "c_index");
  for (const auto& r : records) {
    if (!(r.time > 0.0) || !std::isfinite(r.time)) throw ValidationError("c_index: times must be positive");
  }
  const std::size_t n = risks.size();

  std::vector<double> sorted_risks(risks.begin(), risks.end());
  std::sort(sorted_risks.begin(), sorted_risks.end());
  sorted_risks.erase(std::unique(sorted_risks.begin(), sorted_risks.end()), sorted_risks.end());
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    rank[i] = static_cast<std::size_t>(std::lower_bound(sorted_risks.begin(), sorted_risks.end(), risks[i]) -
                                       sorted_risks.begin());
  }

  // Sweep by decreasing time; the tree holds every subject with a strictly
  // later time than the current block.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return records[a].time > records[b].time; });
  CountTree tree(sorted_risks.size());
  std::uint64_t inserted = 0, comparable = 0, concordant = 0, tied = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && records[order[j + 1]].time == records[order[i]].time) ++j;
    for (std::size_t k = i; k <= j; ++k) {
      const std::size_t a = order[k];
      if (!records[a].event) continue;
      const std::uint64_t lower = tree.below(rank[a]);
      const std::uint64_t lower_or_equal = tree.below(rank[a] + 1);
      comparable += inserted;
      concordant += lower;
      tied += lower_or_equal - lower;
    }
    for (std::size_t k = i; k <= j; ++k) {
      tree.add(rank[order[k]]);
      ++inserted;
    }
    i = j + 1;
  }
  if (comparable == 0) throw ValidationError("c_index: no comparable pairs");
  return (static_cast<double>(concordant) + 0.5 * static_cast<double>(tied)) / static_cast<double>(comparable);
}

}  // namespace promptmil::losses
