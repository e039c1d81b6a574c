#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ddsd/binary_io.hpp"
#include "ddsd/data/modality.hpp"
#include "ddsd/nn/tensor.hpp"

namespace ddsd::data {

inline constexpr char kRecordMagic[4] = {'D', 'D', 'S', 'R'};
inline constexpr std::uint16_t kRecordVersion = 1;

enum class RecordKind : std::uint8_t { kFeatures = 0, kScore = 1, kEmbedding = 2 };

std::string_view record_kind_name(RecordKind kind);

// One binary record: magic, version, utterance id, modality tag, kind,
// presence flag, shape, little-endian float32 payload.
struct Record {
  std::string uid;
  Modality modality = Modality::kProsody;
  RecordKind kind = RecordKind::kFeatures;
  bool present = true;
  std::vector<std::size_t> shape;
  std::vector<float> values;

  bool operator==(const Record&) const = default;
};

Record make_record(std::string uid, Modality modality, RecordKind kind, const nn::Tensor& tensor);
nn::Tensor record_tensor(const Record& record);

void encode_record(ByteWriter& out, const Record& record);
Record decode_record(ByteReader& in);

// A record file is a plain concatenation of records.
std::string encode_records(std::span<const Record> records);
std::vector<Record> decode_records(std::string_view bytes, const std::string& context);
void write_records(const std::filesystem::path& path, std::span<const Record> records);
std::vector<Record> read_records(const std::filesystem::path& path);

// uid -> record; throws DataError on duplicate ids.
std::unordered_map<std::string, Record> index_by_uid(std::vector<Record> records, const std::string& context);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace ddsd::data
