#pragma once

// Test signal generators with known pitch, period and amplitude structure.

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "ddsd/dsp/audio.hpp"

namespace ddsd::testing {

inline dsp::AudioBuffer silence(double seconds, int rate = 16000) {
  return {std::vector<double>(static_cast<std::size_t>(seconds * rate), 0.0), rate};
}

inline dsp::AudioBuffer sine(double hz, double seconds, double amp = 0.5, int rate = 16000) {
  dsp::AudioBuffer a = silence(seconds, rate);
  for (std::size_t i = 0; i < a.size(); ++i) a.samples[i] = amp * std::sin(2 * std::numbers::pi * hz * i / rate);
  return a;
}

inline dsp::AudioBuffer sawtooth(double hz, double seconds, double amp = 0.5, int rate = 16000) {
  dsp::AudioBuffer a = silence(seconds, rate);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double phase = std::fmod(hz * i / rate, 1.0);
    a.samples[i] = amp * (2.0 * phase - 1.0);
  }
  return a;
}

// Gaussian pulses (sigma in seconds) at the given continuous-time instants.
inline dsp::AudioBuffer pulse_train(const std::vector<double>& times, const std::vector<double>& amps,
                                    double seconds, double sigma = 0.0003, int rate = 16000) {
  dsp::AudioBuffer a = silence(seconds, rate);
  const double s = sigma * rate;
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double c = times[k] * rate;
    const long lo = std::max(0L, static_cast<long>(c - 8 * s));
    const long hi = std::min(static_cast<long>(a.size()) - 1, static_cast<long>(c + 8 * s));
    for (long i = lo; i <= hi; ++i) a.samples[i] += amps[k] * std::exp(-0.5 * (i - c) * (i - c) / (s * s));
  }
  return a;
}

// Pulse instants for a sequence of periods cycling through the given list.
inline std::vector<double> pulse_times(const std::vector<double>& periods, double seconds, double start = 0.002) {
  std::vector<double> t;
  double now = start;
  for (std::size_t k = 0; now < seconds - 0.002; ++k) {
    t.push_back(now);
    now += periods[k % periods.size()];
  }
  return t;
}

inline dsp::AudioBuffer white_noise(double seconds, double sigma, std::uint64_t seed, int rate = 16000) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  dsp::AudioBuffer a = silence(seconds, rate);
  for (double& v : a.samples) v = std::clamp(n(rng), -1.0, 1.0);
  return a;
}

// A vowel-like signal: a pulse train at f0 through two resonators.
inline dsp::AudioBuffer vowel(double f0, double seconds, double amp = 0.3, int rate = 16000) {
  dsp::AudioBuffer src = pulse_train(pulse_times({1.0 / f0}, seconds), std::vector<double>(4096, 1.0), seconds,
                                     0.0002, rate);
  dsp::AudioBuffer out = silence(seconds, rate);
  const double formants[2][2] = {{700.0, 110.0}, {1200.0, 120.0}};
  std::vector<double> x = src.samples;
  for (const auto& f : formants) {
    const double r = std::exp(-std::numbers::pi * f[1] / rate);
    const double c = 2 * r * std::cos(2 * std::numbers::pi * f[0] / rate);
    std::vector<double> y(x.size(), 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
      y[i] = x[i] + (i > 0 ? c * y[i - 1] : 0.0) - (i > 1 ? r * r * y[i - 2] : 0.0);
    }
    x = y;
  }
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  for (std::size_t i = 0; i < x.size(); ++i) out.samples[i] = amp * x[i] / peak;
  return out;
}

}  // namespace ddsd::testing
