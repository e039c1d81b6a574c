#include "ddsd/dsp/voice_quality.hpp"

#include <algorithm>
#include <cmath>

#include "ddsd/dsp/framing.hpp"
#include "ddsd/error.hpp"

namespace ddsd::dsp {

namespace {

// Cycles whose waveform matches the previous one worse than this end a chain.
constexpr double kMinMatch = 0.5;

// Vertex of the parabola through (-1,a), (0,b), (1,c): {offset, value}.
std::pair<double, double> parabolic_peak(double a, double b, double c) {
  const double denom = a - 2.0 * b + c;
  if (denom >= 0.0) return {0.0, b};
  const double delta = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
  return {delta, b - 0.25 * (a - c) * delta};
}

class MarkTracker {
 public:
  MarkTracker(const AudioBuffer& audio, const PitchTrack& pitch, const FrameGrid& grid)
      : x_(audio.samples), pitch_(pitch), grid_(grid) {}

  long n() const { return static_cast<long>(x_.size()); }

  std::size_t frame_at(double position) const {
    const double t = std::round((position - 0.5 * grid_.window) / grid_.hop);
    return static_cast<std::size_t>(std::clamp(t, 0.0, static_cast<double>(grid_.count - 1)));
  }

  // Peak of polarity * x near an integer centre, parabolically refined.
  double amplitude(long centre, long half, double polarity) const {
    long best = std::clamp(centre, 1L, n() - 2);
    for (long i = std::max(1L, centre - half); i <= std::min(n() - 2, centre + half); ++i) {
      if (polarity * x_[i] > polarity * x_[best]) best = i;
    }
    return parabolic_peak(polarity * x_[best - 1], polarity * x_[best], polarity * x_[best + 1]).second;
  }

  // Position in [lo, hi] whose window best matches the template centred at
  // anchor, refined to a fractional offset. Returns a negative value when no
  // window fits inside the signal.
  double match(long anchor, long half, long lo, long hi, double* quality) const {
    if (lo > hi) return -1.0;
    half = std::min({half, anchor, lo - 1, n() - 1 - anchor, n() - 2 - hi});
    if (half < 2) return -1.0;
    double e_tpl = 0.0;
    for (long k = -half; k <= half; ++k) e_tpl += x_[anchor + k] * x_[anchor + k];
    std::vector<double> score;
    for (long c = lo - 1; c <= hi + 1; ++c) {
      double cross = 0.0, e = 0.0;
      for (long k = -half; k <= half; ++k) {
        cross += x_[anchor + k] * x_[c + k];
        e += x_[c + k] * x_[c + k];
      }
      score.push_back(cross / std::sqrt(e_tpl * e + 1e-30));
    }
    std::size_t best = 1;
    for (std::size_t i = 1; i + 1 < score.size(); ++i) {
      if (score[i] > score[best]) best = i;
    }
    const auto [delta, value] = parabolic_peak(score[best - 1], score[best], score[best + 1]);
    *quality = value;
    return static_cast<double>(lo - 1 + static_cast<long>(best)) + delta;
  }

  const std::vector<double>& x_;
  const PitchTrack& pitch_;
  const FrameGrid& grid_;
};

}  // namespace

std::vector<PeriodMark> find_period_marks(const AudioBuffer& audio, const PitchTrack& pitch) {
  const FrameGrid grid = prosody_grid(audio.size(), audio.sample_rate);
  if (grid.count != pitch.size()) {
    throw ShapeError("pitch track has " + std::to_string(pitch.size()) + " frames, audio grid has " +
                     std::to_string(grid.count));
  }
  MarkTracker tracker(audio, pitch, grid);
  std::vector<PeriodMark> marks;
  std::size_t chain = 0;

  for (std::size_t t = 0; t < grid.count;) {
    if (!pitch.voiced(t)) {
      ++t;
      continue;
    }
    std::size_t end = t;
    while (end + 1 < grid.count && pitch.voiced(end + 1)) ++end;
    const long region_lo = static_cast<long>(grid.start(t));
    const long region_hi = static_cast<long>(grid.start(end) + grid.window) - 1;

    // Anchor on the largest excursion of the stretch and follow the cycles
    // outwards in both directions.
    long peak = region_lo;
    for (long i = region_lo; i <= region_hi; ++i) {
      if (std::abs(audio.samples[i]) > std::abs(audio.samples[peak])) peak = i;
    }
    const double polarity = audio.samples[peak] >= 0.0 ? 1.0 : -1.0;
    auto period_at = [&](double position) {
      const std::size_t frame = std::clamp(tracker.frame_at(position), t, end);
      return pitch.period[frame];
    };
    std::vector<PeriodMark> chain_marks;
    for (const double direction : {1.0, -1.0}) {
      double position = static_cast<double>(peak);
      while (true) {
        const long anchor = std::lround(position);
        const double period = period_at(position);
        if (direction > 0 || position != static_cast<double>(peak)) {
          const long quarter = std::max(1L, std::lround(0.25 * period));
          chain_marks.push_back({position, tracker.amplitude(anchor, quarter, polarity), chain});
        }
        const double near = position + direction * 0.8 * period;
        const double far = position + direction * 1.2 * period;
        const long lo = std::max(region_lo, std::lround(std::min(near, far)));
        const long hi = std::min(region_hi, std::lround(std::max(near, far)));
        double quality = 0.0;
        const double found = tracker.match(anchor, std::max(2L, std::lround(0.5 * period)), lo, hi, &quality);
        if (found < 0.0 || quality < kMinMatch) break;
        // Keep the fractional part of the anchor so marks do not drift.
        position = found + (position - static_cast<double>(anchor));
        if (position < region_lo || position > region_hi) break;
      }
    }
    std::sort(chain_marks.begin(), chain_marks.end(),
              [](const PeriodMark& a, const PeriodMark& b) { return a.position < b.position; });
    marks.insert(marks.end(), chain_marks.begin(), chain_marks.end());
    ++chain;
    t = end + 1;
  }
  return marks;
}

VoiceQualityTrack extract_jitter_shimmer(const AudioBuffer& audio, const PitchTrack& pitch) {
  const auto marks = find_period_marks(audio, pitch);
  const FrameGrid grid = prosody_grid(audio.size(), audio.sample_rate);
  VoiceQualityTrack out{std::vector<double>(grid.count, 0.0), std::vector<double>(grid.count, 0.0)};

  std::size_t first = 0;
  for (std::size_t t = 0; t < grid.count; ++t) {
    if (!pitch.voiced(t)) continue;
    const double lo = static_cast<double>(grid.start(t));
    const double hi = lo + static_cast<double>(grid.window);
    while (first < marks.size() && marks[first].position < lo) ++first;

    // Longest run of same-chain marks inside the window.
    std::vector<const PeriodMark*> run;
    for (std::size_t i = first; i < marks.size() && marks[i].position < hi; ++i) {
      if (!run.empty() && run.back()->chain != marks[i].chain) run.clear();
      run.push_back(&marks[i]);
    }
    if (run.size() < 3) continue;

    double period_sum = 0.0, period_diff = 0.0, amp_sum = 0.0, amp_diff = 0.0;
    double prev_period = 0.0;
    for (std::size_t i = 1; i < run.size(); ++i) {
      const double p = run[i]->position - run[i - 1]->position;
      period_sum += p;
      if (i > 1) period_diff += std::abs(p - prev_period);
      prev_period = p;
    }
    for (std::size_t i = 0; i < run.size(); ++i) {
      amp_sum += run[i]->amplitude;
      if (i > 0) amp_diff += std::abs(run[i]->amplitude - run[i - 1]->amplitude);
    }
    const double n_periods = static_cast<double>(run.size() - 1);
    const double n_amps = static_cast<double>(run.size());
    const double mean_period = period_sum / n_periods;
    const double mean_amp = amp_sum / n_amps;
    out.jitter[t] = std::clamp((period_diff / (n_periods - 1)) / mean_period, 0.0, 1.0);
    out.shimmer[t] = mean_amp > 0.0 ? std::clamp((amp_diff / (n_amps - 1)) / mean_amp, 0.0, 1.0) : 0.0;
  }
  return out;
}

}  // namespace ddsd::dsp
