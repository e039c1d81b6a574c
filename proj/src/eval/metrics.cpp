#include "ddsd/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <sstream>

#include "json.hpp"

#include "ddsd/error.hpp"

namespace ddsd::eval {

namespace {

void validate(std::span<const ScoredEntry> entries) {
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (!std::isfinite(e.score)) {
      throw DataError("score " + std::to_string(i) + " is not finite");
    }
    if (e.label == 1) {
      ++pos;
    } else if (e.label == 0) {
      ++neg;
    } else {
      throw DataError("label " + std::to_string(i) + " is not 0 or 1");
    }
  }
  if (pos == 0 || neg == 0) {
    throw DataError("metrics need both classes (directed " + std::to_string(pos) + ", not-directed " +
                    std::to_string(neg) + ")");
  }
}

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::vector<DetPoint> threshold_sweep(std::span<const ScoredEntry> entries) {
  validate(entries);
  std::vector<ScoredEntry> sorted(entries.begin(), entries.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const ScoredEntry& a, const ScoredEntry& b) { return a.score < b.score; });
  double n_pos = 0, n_neg = 0;
  for (const auto& e : sorted) (e.label == 1 ? n_pos : n_neg) += 1;

  std::vector<DetPoint> sweep;
  std::size_t pos_below = 0, neg_below = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double t = sorted[i].score;
    sweep.push_back({t, pos_below / n_pos, (n_neg - neg_below) / n_neg});
    for (; i < sorted.size() && sorted[i].score == t; ++i) {
      (sorted[i].label == 1 ? pos_below : neg_below) += 1;
    }
  }
  sweep.push_back({std::numeric_limits<double>::infinity(), 1.0, 0.0});
  return sweep;
}

double eer_from_sweep(std::span<const DetPoint> sweep) {
  // FA - FR starts at 1 and falls to -1; find where it first reaches zero.
  for (std::size_t k = 0; k < sweep.size(); ++k) {
    const double d = sweep[k].false_accept - sweep[k].false_reject;
    if (d > 0) continue;
    if (d == 0 || k == 0) return 100.0 * sweep[k].false_accept;
    const double d_prev = sweep[k - 1].false_accept - sweep[k - 1].false_reject;
    const double alpha = d_prev / (d_prev - d);
    const double fa = sweep[k - 1].false_accept + alpha * (sweep[k].false_accept - sweep[k - 1].false_accept);
    return 100.0 * fa;
  }
  return 100.0 * sweep.back().false_accept;
}

OperatingPoint fa_at_fr_from_sweep(std::span<const DetPoint> sweep, double fr_target) {
  if (!(fr_target >= 0.0 && fr_target <= 1.0)) throw UsageError("FR target must lie in [0,1]");
  std::size_t j = 0;
  while (j + 1 < sweep.size() && sweep[j + 1].false_reject <= fr_target) ++j;
  const DetPoint& a = sweep[j];
  if (a.false_reject == fr_target || j + 1 == sweep.size()) return {100.0 * a.false_accept, a.threshold};
  const DetPoint& b = sweep[j + 1];
  const double alpha = (fr_target - a.false_reject) / (b.false_reject - a.false_reject);
  return {100.0 * (a.false_accept + alpha * (b.false_accept - a.false_accept)), a.threshold};
}

double compute_eer(std::span<const ScoredEntry> entries) { return eer_from_sweep(threshold_sweep(entries)); }

OperatingPoint compute_fa_at_fr(std::span<const ScoredEntry> entries, double fr_target) {
  return fa_at_fr_from_sweep(threshold_sweep(entries), fr_target);
}

EvalReport evaluate(std::span<const ScoredEntry> entries) {
  const auto sweep = threshold_sweep(entries);
  EvalReport r;
  r.eer = eer_from_sweep(sweep);
  const auto op = fa_at_fr_from_sweep(sweep, 0.10);
  r.fa_at_fr10 = op.false_accept;
  r.threshold_at_fr10 = op.threshold;
  for (const auto& e : entries) (e.label == 1 ? r.n_directed : r.n_not_directed) += 1;
  r.det_points.assign(sweep.begin(), sweep.end() - 1);
  return r;
}

std::string summary_line(const EvalReport& report) {
  return "EER " + fmt2(report.eer) + ", FA@10%FR " + fmt2(report.fa_at_fr10);
}

std::string report_text(const EvalReport& report, const std::string& title) {
  std::ostringstream out;
  out << "# " << title << "\n"
      << "directed: " << report.n_directed << "\n"
      << "not_directed: " << report.n_not_directed << "\n"
      << "eer_percent: " << fmt2(report.eer) << "\n"
      << "fa_at_fr10_percent: " << fmt2(report.fa_at_fr10) << "\n"
      << "threshold_at_fr10: " << report.threshold_at_fr10 << "\n"
      << "det_points: " << report.det_points.size() << "\n";
  return out.str();
}

std::string report_json(const EvalReport& report) {
  nlohmann::json j;
  j["eer"] = report.eer;
  j["fa_at_fr10"] = report.fa_at_fr10;
  j["threshold_at_fr10"] = report.threshold_at_fr10;
  j["n_directed"] = report.n_directed;
  j["n_not_directed"] = report.n_not_directed;
  return j.dump();
}

std::string det_csv(const EvalReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "threshold,fr_percent,fa_percent\n";
  for (const auto& p : report.det_points) {
    out << p.threshold << ',' << 100.0 * p.false_reject << ',' << 100.0 * p.false_accept << '\n';
  }
  return out.str();
}

CorruptionResult corrupt_missing(std::span<const FusionSample> samples, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw UsageError("corruption rate must lie in [0,1)");
  CorruptionResult result;
  result.samples.assign(samples.begin(), samples.end());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::array<std::size_t, kNumModalities> dropped{};
  for (auto& s : result.samples) {
    for (Modality m : kAllModalities) {
      // Always draw so the pattern depends only on the seed and sample order.
      if (uniform(rng) < rate) {
        mark_absent(s[m], m);
        ++dropped[index_of(m)];
      }
    }
  }
  for (std::size_t m = 0; m < kNumModalities; ++m) {
    result.realized_rate[m] = samples.empty() ? 0.0 : static_cast<double>(dropped[m]) / samples.size();
  }
  return result;
}

}  // namespace ddsd::eval
