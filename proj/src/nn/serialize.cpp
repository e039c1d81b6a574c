#include "ddsd/nn/serialize.hpp"

#include <fstream>
#include <sstream>

#include "ddsd/binary_io.hpp"
#include "ddsd/error.hpp"

namespace ddsd::nn {

namespace {

constexpr std::string_view kMagic = "DDSDMODL";

enum class LayerTag : std::uint8_t {
  kMask = 0,
  kDense = 1,
  kGru = 2,
  kLayerNorm = 3,
  kDropout = 4,
  kBranchDense = 5,
  kInverseSoftmax = 6,
};

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void put_layer(ByteWriter& w, const Layer& layer) {
  std::visit(Overloaded{
                 [&](const MaskLayer&) { w.put(static_cast<std::uint8_t>(LayerTag::kMask)); },
                 [&](const DenseLayer& l) {
                   w.put(static_cast<std::uint8_t>(LayerTag::kDense));
                   w.put<std::uint64_t>(l.in);
                   w.put<std::uint64_t>(l.out);
                   w.put(static_cast<std::uint8_t>(l.activation));
                 },
                 [&](const GruLayer& l) {
                   w.put(static_cast<std::uint8_t>(LayerTag::kGru));
                   w.put<std::uint64_t>(l.in);
                   w.put<std::uint64_t>(l.hidden);
                 },
                 [&](const LayerNormLayer& l) {
                   w.put(static_cast<std::uint8_t>(LayerTag::kLayerNorm));
                   w.put<std::uint64_t>(l.dim);
                   w.put(l.epsilon);
                 },
                 [&](const DropoutLayer& l) {
                   w.put(static_cast<std::uint8_t>(LayerTag::kDropout));
                   w.put(l.rate);
                 },
                 [&](const BranchDenseLayer& l) {
                   w.put(static_cast<std::uint8_t>(LayerTag::kBranchDense));
                   w.put<std::uint32_t>(static_cast<std::uint32_t>(l.in_dims.size()));
                   for (auto d : l.in_dims) w.put<std::uint64_t>(d);
                   w.put<std::uint64_t>(l.out);
                   w.put(static_cast<std::uint8_t>(l.activation));
                 },
                 [&](const InverseSoftmaxLayer& l) {
                   w.put(static_cast<std::uint8_t>(LayerTag::kInverseSoftmax));
                   w.put<std::uint64_t>(l.dim);
                 },
             },
             layer);
}

Activation get_activation(ByteReader& r) {
  const auto raw = r.get<std::uint8_t>();
  if (raw > static_cast<std::uint8_t>(Activation::kRelu)) {
    throw DataError("model: unknown activation tag " + std::to_string(raw) + " at byte offset " +
                    std::to_string(r.offset() - 1));
  }
  return static_cast<Activation>(raw);
}

Layer get_layer(ByteReader& r) {
  const auto tag = r.get<std::uint8_t>();
  switch (static_cast<LayerTag>(tag)) {
    case LayerTag::kMask: return MaskLayer{};
    case LayerTag::kDense: {
      DenseLayer l;
      l.in = r.get<std::uint64_t>();
      l.out = r.get<std::uint64_t>();
      l.activation = get_activation(r);
      return l;
    }
    case LayerTag::kGru: {
      GruLayer l;
      l.in = r.get<std::uint64_t>();
      l.hidden = r.get<std::uint64_t>();
      return l;
    }
    case LayerTag::kLayerNorm: {
      LayerNormLayer l;
      l.dim = r.get<std::uint64_t>();
      l.epsilon = r.get<double>();
      return l;
    }
    case LayerTag::kDropout: return DropoutLayer{r.get<double>()};
    case LayerTag::kBranchDense: {
      BranchDenseLayer l;
      const auto n = r.get<std::uint32_t>();
      for (std::uint32_t i = 0; i < n; ++i) l.in_dims.push_back(r.get<std::uint64_t>());
      l.out = r.get<std::uint64_t>();
      l.activation = get_activation(r);
      return l;
    }
    case LayerTag::kInverseSoftmax: return InverseSoftmaxLayer{r.get<std::uint64_t>()};
  }
  throw DataError("model: unknown layer tag " + std::to_string(tag) + " at byte offset " +
                  std::to_string(r.offset() - 1));
}

void put_tensors(ByteWriter& w, const std::vector<NamedTensor>& tensors) {
  w.put<std::uint32_t>(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.put_string(t.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t.tensor.rank()));
    for (auto d : t.tensor.shape()) w.put<std::uint64_t>(d);
    for (double v : t.tensor.values()) w.put(v);
  }
}

std::vector<NamedTensor> get_tensors(ByteReader& r) {
  const auto count = r.get<std::uint32_t>();
  std::vector<NamedTensor> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.get_string();
    const auto rank = r.get<std::uint32_t>();
    std::vector<std::size_t> shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    const std::size_t n = shape_product(shape);
    if (n > r.remaining() / sizeof(double)) {
      throw DataError("model: tensor " + t.name + " payload truncated at byte offset " + std::to_string(r.offset()));
    }
    std::vector<double> values(n);
    for (auto& v : values) v = r.get<double>();
    t.tensor = Tensor(std::move(shape), std::move(values));
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

std::string encode_model(const ModelFile& file) {
  ByteWriter w;
  w.put_bytes(kMagic);
  w.put(kModelFormatVersion);
  w.put<std::uint64_t>(file.graph.seed());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(file.graph.layers().size()));
  for (const auto& layer : file.graph.layers()) put_layer(w, layer);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(file.metadata.size()));
  for (const auto& [k, v] : file.metadata) {
    w.put_string(k);
    w.put_string(v);
  }
  put_tensors(w, file.graph.params());
  put_tensors(w, file.extras);
  return w.take();
}

ModelFile decode_model(const std::string& bytes) {
  ByteReader r(bytes, "model");
  if (r.get_bytes(kMagic.size()) != kMagic) throw DataError("model: bad magic bytes");
  const auto version = r.get<std::uint32_t>();
  if (version != kModelFormatVersion) {
    throw DataError("model: unsupported format version " + std::to_string(version));
  }
  const auto seed = r.get<std::uint64_t>();
  const auto n_layers = r.get<std::uint32_t>();
  std::vector<Layer> layers;
  for (std::uint32_t i = 0; i < n_layers; ++i) layers.push_back(get_layer(r));
  std::map<std::string, std::string> metadata;
  const auto n_meta = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string key = r.get_string();
    metadata[key] = r.get_string();
  }
  auto params = get_tensors(r);
  auto extras = get_tensors(r);
  if (!r.at_end()) throw DataError("model: trailing bytes at offset " + std::to_string(r.offset()));
  return {ModelGraph::from_parts(seed, std::move(layers), std::move(params)), std::move(metadata),
          std::move(extras)};
}

void save_model(const ModelFile& file, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_model(file);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_model(ss.str());
}

}  // namespace ddsd::nn
