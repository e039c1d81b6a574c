#include "ddsd/dsp/audio.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "ddsd/binary_io.hpp"
#include "ddsd/error.hpp"

namespace ddsd::dsp {

void validate_audio(const AudioBuffer& audio) {
  if (audio.sample_rate <= 0) throw DataError("sample rate must be positive");
  if (audio.samples.empty()) throw DataError("audio buffer is empty");
  for (std::size_t i = 0; i < audio.samples.size(); ++i) {
    const double v = audio.samples[i];
    if (!std::isfinite(v)) throw DataError("audio sample " + std::to_string(i) + " is not finite");
    if (std::abs(v) > 1.0) throw DataError("audio sample " + std::to_string(i) + " exceeds full scale");
  }
}

AudioBuffer decode_wav(const std::string& bytes, const std::string& context) {
  ByteReader in(bytes, context);
  if (in.get_bytes(4) != "RIFF") throw DataError(context + ": missing RIFF header");
  in.get<std::uint32_t>();
  if (in.get_bytes(4) != "WAVE") throw DataError(context + ": not a WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (true) {
    const std::string_view id = in.get_bytes(4);
    const std::uint32_t chunk = in.get<std::uint32_t>();
    if (id == "fmt ") {
      if (chunk < 16) throw DataError(context + ": fmt chunk too short");
      const std::size_t start = in.offset();
      format = in.get<std::uint16_t>();
      channels = in.get<std::uint16_t>();
      rate = in.get<std::uint32_t>();
      in.get<std::uint32_t>();
      in.get<std::uint16_t>();
      bits = in.get<std::uint16_t>();
      if (format == 0xFFFE && chunk >= 26) {
        in.get<std::uint16_t>();
        in.get<std::uint16_t>();
        in.get<std::uint32_t>();
        format = in.get<std::uint16_t>();  // leading bytes of the sub-format GUID
      }
      in.get_bytes(chunk - (in.offset() - start) + (chunk & 1));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError(context + ": data chunk before fmt chunk");
      if (format != 1 || bits != 16) {
        throw DataError(context + ": only 16-bit PCM is supported (format " + std::to_string(format) +
                        ", " + std::to_string(bits) + " bits)");
      }
      if (channels == 0) throw DataError(context + ": zero channels");
      const std::size_t frames = chunk / (2u * channels);
      AudioBuffer audio;
      audio.sample_rate = static_cast<int>(rate);
      audio.samples.resize(frames);
      for (std::size_t i = 0; i < frames; ++i) {
        double sum = 0.0;
        for (std::uint16_t c = 0; c < channels; ++c) sum += in.get<std::int16_t>() / 32768.0;
        audio.samples[i] = sum / channels;
      }
      return audio;
    } else {
      in.get_bytes(chunk + (chunk & 1));
    }
  }
}

std::string encode_wav(const AudioBuffer& audio) {
  const auto n = static_cast<std::uint32_t>(audio.samples.size());
  ByteWriter out;
  out.put_bytes("RIFF");
  out.put<std::uint32_t>(36 + 2 * n);
  out.put_bytes("WAVEfmt ");
  out.put<std::uint32_t>(16);
  out.put<std::uint16_t>(1);
  out.put<std::uint16_t>(1);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(audio.sample_rate));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(audio.sample_rate) * 2);
  out.put<std::uint16_t>(2);
  out.put<std::uint16_t>(16);
  out.put_bytes("data");
  out.put<std::uint32_t>(2 * n);
  for (double v : audio.samples) {
    const double scaled = std::clamp(std::round(v * 32768.0), -32768.0, 32767.0);
    out.put<std::int16_t>(static_cast<std::int16_t>(scaled));
  }
  return out.take();
}

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << file.rdbuf();
  return decode_wav(buf.str(), path.string());
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio) {
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DataError("cannot write " + path.string());
  const std::string bytes = encode_wav(audio);
  file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

AudioBuffer resample(const AudioBuffer& audio, int target_rate) {
  if (target_rate <= 0) throw UsageError("target sample rate must be positive");
  if (target_rate == audio.sample_rate) return audio;
  constexpr int kHalfTaps = 16;
  const double ratio = static_cast<double>(target_rate) / audio.sample_rate;
  const double cutoff = std::min(1.0, ratio);
  const auto n_out = static_cast<std::size_t>(std::floor(audio.samples.size() * ratio));
  const auto n_in = static_cast<long>(audio.samples.size());
  const double support = kHalfTaps / cutoff;

  AudioBuffer out;
  out.sample_rate = target_rate;
  out.samples.resize(n_out);
  for (std::size_t i = 0; i < n_out; ++i) {
    const double t = i / ratio;
    const long lo = std::max(0L, static_cast<long>(std::ceil(t - support)));
    const long hi = std::min(n_in - 1, static_cast<long>(std::floor(t + support)));
    double acc = 0.0;
    for (long k = lo; k <= hi; ++k) {
      const double d = (k - t) * cutoff;
      const double sinc = d == 0.0 ? 1.0 : std::sin(std::numbers::pi * d) / (std::numbers::pi * d);
      const double window = 0.5 + 0.5 * std::cos(std::numbers::pi * d / kHalfTaps);
      acc += audio.samples[static_cast<std::size_t>(k)] * sinc * window;
    }
    out.samples[i] = std::clamp(acc * cutoff, -1.0, 1.0);
  }
  return out;
}

}  // namespace ddsd::dsp
