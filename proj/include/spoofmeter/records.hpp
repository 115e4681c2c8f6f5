#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace spoofmeter {

/// Ground truth. Spoof is 0 and live is 1 everywhere in the toolkit.
enum class Label : int { kSpoof = 0, kLive = 1 };

inline int to_int(Label label) { return static_cast<int>(label); }

/// One frame's identity, label, and payload (a live-probability score or a
/// feature embedding).
struct FrameRecord {
  std::string dataset_id;
  std::string video_id;
  std::uint64_t frame_idx = 0;
  Label label = Label::kSpoof;
  std::variant<double, Eigen::VectorXd> payload = 0.0;
  std::optional<std::string> learner_id;

  bool has_score() const { return std::holds_alternative<double>(payload); }
  bool has_feature() const { return std::holds_alternative<Eigen::VectorXd>(payload); }
  double score() const { return std::get<double>(payload); }
  const Eigen::VectorXd& feature() const { return std::get<Eigen::VectorXd>(payload); }
};

/// Frames of one video from one learner, ordered by frame index.
struct VideoGroup {
  std::string dataset_id;
  std::string video_id;
  std::optional<std::string> learner_id;
  Label label = Label::kSpoof;
  std::vector<FrameRecord> frames;

  /// Frame scores in frame order. Throws InputError for feature groups.
  std::vector<double> scores() const;
};

}  // namespace spoofmeter
