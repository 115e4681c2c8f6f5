#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace spoofmeter {

struct FixedThreshold {
  double value = 0.5;
};

/// Threshold taken from the EER point of the named split ("train", "fit"
/// or "test").
struct EerThreshold {
  std::string split;
};

using ThresholdPolicy = std::variant<FixedThreshold, EerThreshold>;

ThresholdPolicy parse_threshold_policy(std::string_view text);
std::string to_string(const ThresholdPolicy& policy);

/// A leave-one-out protocol such as "OCI->M".
struct ProtocolManifest {
  std::string name;
  std::vector<std::string> train_datasets;
  std::vector<std::string> test_datasets;
  /// Held-out part of training data for fusion fitting; may be empty.
  std::vector<std::string> fit_datasets;
  ThresholdPolicy threshold_policy = FixedThreshold{0.5};
  std::uint64_t seed = 0;
  bool seed_defaulted = true;
  std::uint64_t frames_per_video = 32;

  std::vector<std::string> split(std::string_view split_name) const;
};

ProtocolManifest parse_manifest(std::string_view json_text);
ProtocolManifest load_manifest(const std::filesystem::path& path);
std::string format_manifest(const ProtocolManifest& manifest);

}  // namespace spoofmeter
