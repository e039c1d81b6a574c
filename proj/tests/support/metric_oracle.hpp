#pragma once

// Brute-force threshold sweep used as an oracle for the metric code. Every
// rate is recounted from scratch for every candidate threshold.

#include <algorithm>
#include <limits>
#include <random>
#include <set>
#include <vector>

#include "ddsd/eval/metrics.hpp"

namespace ddsd::testing {

struct BrutePoint {
  double threshold, fr, fa;
};

inline std::vector<BrutePoint> brute_points(const std::vector<eval::ScoredEntry>& set) {
  std::set<double> thresholds;
  for (const auto& e : set) thresholds.insert(e.score);
  thresholds.insert(std::numeric_limits<double>::infinity());
  std::vector<BrutePoint> pts;
  for (double t : thresholds) {
    std::size_t pos = 0, neg = 0, rejected_pos = 0, accepted_neg = 0;
    for (const auto& e : set) {
      if (e.label == 1) {
        ++pos;
        if (e.score < t) ++rejected_pos;
      } else {
        ++neg;
        if (e.score >= t) ++accepted_neg;
      }
    }
    pts.push_back({t, static_cast<double>(rejected_pos) / static_cast<double>(pos),
                   static_cast<double>(accepted_neg) / static_cast<double>(neg)});
  }
  return pts;
}

inline double brute_eer(const std::vector<eval::ScoredEntry>& set) {
  const auto pts = brute_points(set);
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (pts[k].fa == pts[k].fr) return 100.0 * pts[k].fa;
    if (k > 0 && pts[k - 1].fa > pts[k - 1].fr && pts[k].fa < pts[k].fr) {
      const double d0 = pts[k - 1].fa - pts[k - 1].fr;
      const double d1 = pts[k].fa - pts[k].fr;
      return 100.0 * (pts[k - 1].fa + d0 / (d0 - d1) * (pts[k].fa - pts[k - 1].fa));
    }
  }
  return -1.0;
}

inline eval::OperatingPoint brute_fa_at_fr(const std::vector<eval::ScoredEntry>& set, double target) {
  const auto pts = brute_points(set);
  const BrutePoint* below = nullptr;  // highest threshold with FR <= target
  const BrutePoint* above = nullptr;  // lowest threshold with FR > target
  for (const auto& p : pts) {
    if (p.fr <= target) below = &p;
    if (p.fr > target && above == nullptr) above = &p;
  }
  if (below->fr == target || above == nullptr) return {100.0 * below->fa, below->threshold};
  const double alpha = (target - below->fr) / (above->fr - below->fr);
  return {100.0 * (below->fa + alpha * (above->fa - below->fa)), below->threshold};
}

// Random labelled scores; `coarse` draws from ten levels so ties are common.
// Both classes are always present.
inline std::vector<eval::ScoredEntry> random_set(std::mt19937_64& rng, std::size_t n, bool coarse) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> level(0, 9);
  std::vector<eval::ScoredEntry> set;
  for (std::size_t i = 0; i < n; ++i) {
    set.push_back({coarse ? level(rng) / 10.0 : u(rng), static_cast<int>(rng() % 2)});
  }
  set[0].label = 1;
  set[1].label = 0;
  return set;
}

// Uniform scores independent of the label, per_class entries of each class.
inline std::vector<eval::ScoredEntry> random_classifier(std::size_t per_class, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<eval::ScoredEntry> set;
  for (std::size_t i = 0; i < per_class; ++i) {
    set.push_back({u(rng), 1});
    set.push_back({u(rng), 0});
  }
  return set;
}

}  // namespace ddsd::testing
