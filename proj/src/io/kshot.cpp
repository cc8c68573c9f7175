// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#include "promptmil/io/kshot.hpp"

#include "promptmil/common/error.hpp"
#include "promptmil/common/rng.hpp"

namespace promptmil::io {

std::vector<std::size_t> kshot_sample(const Manifest& manifest, std::size_t shots, std::uint64_t seed) {
  if (shots == 0) throw ValidationError("kshot: shots must be >= 1");
  const std::size_t u = manifest.num_classes();
  std::vector<std::vector<std::size_t>> pool(u);
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (e.split == Split::kTrainPool) pool.at(e.label).push_back(i);
  }
  bool enough = true;
  std::string availability;
  for (std::size_t c = 0; c < u; ++c) {
    enough = enough && pool[c].size() >= shots;
    availability += (c ? ", " : "") + manifest.classes[c] + "=" + std::to_string(pool[c].size());
  }
  if (!enough) {
    throw ValidationError("kshot: " + std::to_string(shots) + "-shot needs " + std::to_string(shots) +
                          " train-pool bags per class; available: " + availability);
  }

  Rng rng = Rng(seed).fork(0x6b73686f74ULL);
  std::vector<std::size_t> chosen;
  for (std::size_t c = 0; c < u; ++c) {
    for (std::size_t k : sample_without_replacement(rng, pool[c].size(), shots)) {
      chosen.push_back(pool[c][k]);
    }
  }
  return chosen;
}

}  // namespace promptmil::io
