#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spoofmeter/manifest.hpp"
#include "spoofmeter/records.hpp"

namespace spoofmeter {

// Frame and video aggregation ------------------------------------------------

/// Arithmetic mean of a video's frame probabilities.
double video_probability(std::span<const double> frame_probs);

/// Live (1) iff `prob` strictly exceeds `threshold`; ties go to spoof.
int decide(double prob, double threshold);

struct VideoPrediction {
  double video_prob = 0.0;
  int decision = 0;
  std::vector<double> frame_probs;
  std::vector<int> frame_decisions;
  double frame_positive_rate = 0.0;
};

VideoPrediction predict_video(std::span<const double> frame_probs, double threshold);

// Robustness metrics ---------------------------------------------------------

struct VideoOutcome {
  Label label;
  double prob;
};

/// Mean squared error between video labels and video probabilities.
double bias(std::span<const VideoOutcome> videos);

/// Population standard deviation of one video's frame probabilities.
/// Deviations are taken about a mean anchored at the first frame, so a
/// constant video gives exactly zero.
double frame_std(std::span<const double> frame_probs);

/// Mean over videos of the per-video population standard deviation of frame
/// probabilities. Bounded by 0.5 for probabilities in [0, 1].
double variance(std::span<const std::vector<double>> videos);

// Threshold metrics ----------------------------------------------------------

struct RocPoint {
  double fpr;
  double tpr;
};

/// Operating points for the rule `score > threshold`, one per distinct score
/// (descending), then a final point below the lowest score. Starts at (0,0)
/// and ends at (1,1).
struct RocCurve {
  std::vector<RocPoint> points;
  std::vector<double> thresholds;
};

RocCurve roc_curve(std::span<const double> scores, std::span<const Label> labels);

/// Trapezoidal area under the curve.
double auc(const RocCurve& curve);

struct EerResult {
  double threshold;
  double eer;
};

/// Crossing of FAR and FRR, linearly interpolated between adjacent ROC
/// vertices. When a vertex has FAR == FRR exactly the threshold is the
/// midpoint of the score interval realising it.
EerResult eer_threshold(std::span<const double> scores, std::span<const Label> labels);

struct HterResult {
  double hter;
  double far;
  double frr;
};

HterResult hter(std::span<const double> scores, std::span<const Label> labels, double threshold);

/// TPR at `fpr_level`, interpolated linearly between the bracketing vertices.
/// At a vertical run of the curve the highest TPR is used.
double tpr_at_fpr(const RocCurve& curve, double fpr_level);

// Full evaluation ------------------------------------------------------------

inline constexpr double kTprLevels[] = {0.01, 0.05, 0.10};

struct EvaluationReport {
  std::string manifest_name;
  std::string threshold_policy;
  double threshold_used = 0.5;
  std::uint64_t seed = 0;
  double hter = 0.0;
  double far = 0.0;
  double frr = 0.0;
  double auc = 0.0;
  double eer = 0.0;
  double eer_threshold = 0.0;
  std::map<double, double> tpr_at_fpr;
  double bias = 0.0;
  double variance = 0.0;
  std::uint64_t n_videos = 0;
  std::uint64_t n_frames = 0;
  std::map<std::string, std::string> provenance;
};

struct EvaluateOptions {
  /// Replaces the manifest's threshold policy when set.
  std::optional<double> threshold;
};

/// Scores the manifest's test videos. Groups from other datasets are used
/// only to resolve an `eer:<split>` threshold policy.
EvaluationReport evaluate(std::span<const VideoGroup> groups, const ProtocolManifest& manifest,
                          const EvaluateOptions& options = {});

}  // namespace spoofmeter
