#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ddsd/nn/graph.hpp"

namespace ddsd::nn {

// Model container: magic "DDSDMODL", u32 version, graph seed, layer
// descriptors, string metadata, graph parameters and auxiliary tensors as
// little-endian float64 blobs.
struct ModelFile {
  ModelGraph graph;
  std::map<std::string, std::string> metadata;
  std::vector<NamedTensor> extras;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string encode_model(const ModelFile& file);
ModelFile decode_model(const std::string& bytes);

void save_model(const ModelFile& file, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

}  // namespace ddsd::nn
