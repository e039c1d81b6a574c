#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ddsd/data/modality.hpp"

namespace ddsd::eval {

struct ScoredEntry {
  double score = 0.0;
  int label = 0;  // 1 = directed
};

// One operating point of the threshold sweep. Rates are fractions in [0,1].
struct DetPoint {
  double threshold = 0.0;
  double false_reject = 0.0;
  double false_accept = 0.0;
};

struct OperatingPoint {
  double false_accept = 0.0;  // fraction
  double threshold = 0.0;
};

// Accepted means score >= threshold. The sweep covers every distinct score
// in increasing order, followed by a final +inf point where nothing is accepted.
std::vector<DetPoint> threshold_sweep(std::span<const ScoredEntry> entries);

// Both return percentages. Throw DataError on single-class or non-finite input.
double compute_eer(std::span<const ScoredEntry> entries);
// fr_target is a fraction; the returned FA is a percentage.
OperatingPoint compute_fa_at_fr(std::span<const ScoredEntry> entries, double fr_target = 0.10);

// Helpers on an already computed sweep, shared with reporting.
double eer_from_sweep(std::span<const DetPoint> sweep);
OperatingPoint fa_at_fr_from_sweep(std::span<const DetPoint> sweep, double fr_target);

struct EvalReport {
  double eer = 0.0;          // percent
  double fa_at_fr10 = 0.0;   // percent
  double threshold_at_fr10 = 0.0;
  std::size_t n_directed = 0;
  std::size_t n_not_directed = 0;
  std::vector<DetPoint> det_points;  // finite thresholds only
};

EvalReport evaluate(std::span<const ScoredEntry> entries);

// "EER 1.23, FA@10%FR 4.56"
std::string summary_line(const EvalReport& report);
std::string report_text(const EvalReport& report, const std::string& title);
std::string report_json(const EvalReport& report);
// Columns: threshold, FR%, FA%.
std::string det_csv(const EvalReport& report);

struct CorruptionResult {
  std::vector<FusionSample> samples;
  std::array<double, kNumModalities> realized_rate{};
};

// Drops each modality of each sample independently with probability rate and
// writes the sentinel encodings. Modalities already absent stay absent.
CorruptionResult corrupt_missing(std::span<const FusionSample> samples, double rate, std::uint64_t seed);

}  // namespace ddsd::eval
