#include "ddsd/data/records.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ddsd/error.hpp"

namespace ddsd::data {

std::string_view record_kind_name(RecordKind kind) {
  switch (kind) {
    case RecordKind::kFeatures: return "features";
    case RecordKind::kScore: return "score";
    case RecordKind::kEmbedding: return "embedding";
  }
  return "unknown";
}

Record make_record(std::string uid, Modality modality, RecordKind kind, const nn::Tensor& tensor) {
  Record r;
  r.uid = std::move(uid);
  r.modality = modality;
  r.kind = kind;
  r.shape = tensor.shape();
  r.values.reserve(tensor.size());
  for (double v : tensor.values()) r.values.push_back(static_cast<float>(v));
  return r;
}

nn::Tensor record_tensor(const Record& record) {
  std::vector<double> values(record.values.begin(), record.values.end());
  return nn::Tensor(record.shape, std::move(values));
}

void encode_record(ByteWriter& out, const Record& r) {
  out.put_bytes(std::string_view(kRecordMagic, 4));
  out.put<std::uint16_t>(kRecordVersion);
  out.put_string(r.uid);
  out.put<std::uint8_t>(static_cast<std::uint8_t>(r.modality));
  out.put<std::uint8_t>(static_cast<std::uint8_t>(r.kind));
  out.put<std::uint8_t>(r.present ? 1 : 0);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(r.shape.size()));
  for (std::size_t d : r.shape) out.put<std::uint64_t>(d);
  for (float v : r.values) out.put<float>(v);
}

Record decode_record(ByteReader& in) {
  const std::size_t start = in.offset();
  if (in.get_bytes(4) != std::string_view(kRecordMagic, 4)) {
    throw DataError(in.context() + ": bad record magic at byte offset " + std::to_string(start));
  }
  const auto version = in.get<std::uint16_t>();
  if (version != kRecordVersion) {
    throw DataError(in.context() + ": unsupported record version " + std::to_string(version) + " at byte offset " +
                    std::to_string(start));
  }
  Record r;
  r.uid = in.get_string();
  const auto modality = in.get<std::uint8_t>();
  const auto kind = in.get<std::uint8_t>();
  const auto present = in.get<std::uint8_t>();
  if (modality >= kNumModalities || kind > 2 || present > 1) {
    throw DataError(in.context() + ": corrupt header for record '" + r.uid + "' at byte offset " +
                    std::to_string(start));
  }
  r.modality = static_cast<Modality>(modality);
  r.kind = static_cast<RecordKind>(kind);
  r.present = present == 1;
  const auto rank = in.get<std::uint32_t>();
  if (rank > 8) throw DataError(in.context() + ": implausible rank " + std::to_string(rank) + " for '" + r.uid + "'");
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    r.shape.push_back(static_cast<std::size_t>(in.get<std::uint64_t>()));
    count *= r.shape.back();
  }
  if (count * sizeof(float) > in.remaining()) {
    throw DataError(in.context() + ": record '" + r.uid + "' truncated at byte offset " +
                    std::to_string(in.offset() + in.remaining()) + " (payload needs " +
                    std::to_string(count * sizeof(float)) + " bytes from offset " + std::to_string(in.offset()) + ")");
  }
  r.values.resize(count);
  for (float& v : r.values) v = in.get<float>();
  return r;
}

std::string encode_records(std::span<const Record> records) {
  ByteWriter out;
  for (const auto& r : records) encode_record(out, r);
  return out.take();
}

std::vector<Record> decode_records(std::string_view bytes, const std::string& context) {
  ByteReader in(bytes, context);
  std::vector<Record> out;
  while (!in.at_end()) out.push_back(decode_record(in));
  return out;
}

void write_records(const std::filesystem::path& path, std::span<const Record> records) {
  write_file(path, encode_records(records));
}

std::vector<Record> read_records(const std::filesystem::path& path) {
  return decode_records(read_file(path), path.string());
}

std::unordered_map<std::string, Record> index_by_uid(std::vector<Record> records, const std::string& context) {
  std::unordered_map<std::string, Record> out;
  out.reserve(records.size());
  for (auto& r : records) {
    const std::string uid = r.uid;
    if (!out.emplace(uid, std::move(r)).second) throw DataError(context + ": duplicate record for '" + uid + "'");
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << file.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write " + path.string());
  file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!file) throw DataError("short write to " + path.string());
}

}  // namespace ddsd::data
