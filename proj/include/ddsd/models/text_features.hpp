#pragma once

#include <string_view>

#include "ddsd/nn/tensor.hpp"

namespace ddsd::models {

inline constexpr std::size_t kTrigramBuckets = 4096;

// Bag of hashed character trigrams (FNV-1a mod 4096) over the lower-cased
// transcript with '#' marking both ends. Returns counts as a [4096] tensor.
nn::Tensor trigram_bag(std::string_view text);

std::size_t trigram_bucket(std::string_view trigram);

}  // namespace ddsd::models
