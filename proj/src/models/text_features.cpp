#include "ddsd/models/text_features.hpp"

#include <cctype>
#include <cstdint>
#include <string>

namespace ddsd::models {

std::size_t trigram_bucket(std::string_view trigram) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : trigram) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return static_cast<std::size_t>(h % kTrigramBuckets);
}

nn::Tensor trigram_bag(std::string_view text) {
  std::string s = "#";
  for (unsigned char c : text) s += static_cast<char>(std::tolower(c));
  s += '#';
  nn::Tensor bag({kTrigramBuckets});
  for (std::size_t i = 0; i + 3 <= s.size(); ++i) bag[trigram_bucket(std::string_view(s).substr(i, 3))] += 1.0;
  return bag;
}

}  // namespace ddsd::models
