#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "spoofmeter/records.hpp"

namespace spoofmeter {

/// Convex weights over K base learners. The weights are the normalized
/// exponentials of unconstrained logits, so they stay on the simplex.
struct FusionModel {
  std::vector<std::string> learner_ids;
  Eigen::VectorXd logits;

  /// Uniform weights 1/K.
  static FusionModel uniform(std::vector<std::string> learner_ids);

  Eigen::VectorXd weights() const;
};

/// Weighted sum of per-learner probabilities, aligned with learner_ids.
double fuse(const FusionModel& model, std::span<const double> probs);

struct FusionConfig {
  std::size_t steps = 500;
  double learning_rate = 1.0;
  std::uint64_t seed = 0;
  /// Learner order for the model; empty means sorted learner ids.
  std::vector<std::string> learner_order;
};

struct FusionFit {
  FusionModel model;
  double initial_loss = 0.0;  // fused BCE at uniform weights
  double final_loss = 0.0;
  std::size_t steps_taken = 0;
  std::size_t n_frames = 0;
  std::uint64_t seed = 0;
};

/// Aligned fit data: one row per frame key, one column per learner.
struct AlignedScores {
  std::vector<std::string> learner_ids;
  std::vector<FrameRecord> keys;  // identity and label of each row
  Eigen::MatrixXd probs;
  std::vector<Label> labels;
};

/// Requires every learner to score every (dataset, video, frame) key once,
/// with one label per key.
AlignedScores align_scores(std::span<const FrameRecord> records,
                           const std::vector<std::string>& learner_order = {});

/// Probability-space BCE of the fused scores, clamped to [1e-7, 1 - 1e-7].
double fused_bce(const Eigen::VectorXd& weights, const AlignedScores& data);

/// Full-batch gradient descent on the weight logits, starting from uniform
/// weights. Each step backtracks until the loss does not increase.
FusionFit fit_weights(std::span<const FrameRecord> records, const FusionConfig& config = {});

/// Fused per-frame records (learner cleared), in aligned key order.
std::vector<FrameRecord> fuse_records(const FusionModel& model,
                                      std::span<const FrameRecord> records);

std::string format_fusion(const FusionFit& fit);
FusionModel parse_fusion(std::string_view json_text);
FusionModel load_fusion(const std::filesystem::path& path);

}  // namespace spoofmeter
