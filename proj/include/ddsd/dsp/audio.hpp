#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace ddsd::dsp {

inline constexpr int kDefaultSampleRate = 16000;

// Mono PCM in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kDefaultSampleRate;

  std::size_t size() const { return samples.size(); }
  double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

// Throws DataError on an empty buffer, non-finite samples, |x| > 1 or a
// non-positive rate.
void validate_audio(const AudioBuffer& audio);

// 16-bit PCM WAV. Multi-channel input is downmixed by averaging.
AudioBuffer decode_wav(const std::string& bytes, const std::string& context = "wav");
std::string encode_wav(const AudioBuffer& audio);
AudioBuffer read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

// Band-limited windowed-sinc resampling.
AudioBuffer resample(const AudioBuffer& audio, int target_rate);

}  // namespace ddsd::dsp
