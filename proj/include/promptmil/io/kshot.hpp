// Copyright 2026 The promptmil Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "promptmil/io/manifest.hpp"

namespace promptmil::io {

/// Exactly `shots` train-pool entries per class, drawn uniformly without
/// replacement from a stream seeded by `seed`. Returns manifest entry
/// indices grouped by class. Throws ValidationError listing per-class
/// availability when a class has fewer than `shots` bags.
std::vector<std::size_t> kshot_sample(const Manifest& manifest, std::size_t shots, std::uint64_t seed);

}  // namespace promptmil::io
