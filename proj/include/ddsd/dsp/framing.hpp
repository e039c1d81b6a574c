#pragma once

#include <cmath>
#include <cstddef>

namespace ddsd::dsp {

inline constexpr double kHopSeconds = 0.010;
inline constexpr double kProsodyWindowSeconds = 0.040;
inline constexpr double kShortWindowSeconds = 0.025;

inline std::size_t seconds_to_samples(double seconds, int sample_rate) {
  return static_cast<std::size_t>(std::lround(seconds * sample_rate));
}

// Frame t covers samples [t*hop, t*hop + window).
struct FrameGrid {
  std::size_t window = 0;
  std::size_t hop = 0;
  std::size_t count = 0;

  std::size_t start(std::size_t t) const { return t * hop; }
  double centre(std::size_t t) const { return t * hop + 0.5 * window; }
};

// count = floor((n - window) / hop) + 1, or 0 when n < window.
inline FrameGrid make_grid(std::size_t n, std::size_t window, std::size_t hop) {
  return {window, hop, n < window ? 0 : (n - window) / hop + 1};
}

// The 100 Hz grid with the 40 ms window shared by every prosody column.
inline FrameGrid prosody_grid(std::size_t n, int sample_rate) {
  return make_grid(n, seconds_to_samples(kProsodyWindowSeconds, sample_rate),
                   seconds_to_samples(kHopSeconds, sample_rate));
}

}  // namespace ddsd::dsp
