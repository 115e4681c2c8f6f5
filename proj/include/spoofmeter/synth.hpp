#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spoofmeter/manifest.hpp"
#include "spoofmeter/records.hpp"

namespace spoofmeter {

/// Gaussian latent process over domains, videos and frames.
struct SynthConfig {
  std::size_t n_domains = 4;
  std::size_t videos_per_domain = 40;
  std::size_t frames_per_video = 32;
  std::size_t feature_dim = 16;
  double separation = 10.0;   // distance between live and spoof class means
  double domain_shift = 1.0;  // magnitude of each domain's mean offset
  double frame_noise = 0.3;   // isotropic per-frame noise std
  std::uint64_t seed = 0;

  void validate() const;
};

/// Dataset id of domain i: "A", "B", ...
std::string domain_name(std::size_t index);

/// Ground truth of one generated score video.
struct VideoTruth {
  std::string dataset_id;
  std::string video_id;
  Label label;
  double latent;      // video-level logit before frame noise
  double mean_prob;   // mean of the emitted frame probabilities
  double std_prob;    // population std of the emitted frame probabilities
};

struct SynthData {
  std::vector<FrameRecord> records;
  /// One leave-one-domain-out protocol per domain (none for a single domain).
  std::vector<ProtocolManifest> manifests;
  std::vector<VideoTruth> truth;  // filled by generate_scores only
};

/// Feature records: video latent = +-separation/2 along a random unit
/// direction plus the domain offset; frames add N(0, frame_noise^2) noise
/// per coordinate. Videos alternate live, spoof within each domain.
SynthData generate(const SynthConfig& config);

/// Score records: scalar latent +-separation/2 plus a +-domain_shift domain
/// offset, frame probabilities sigmoid(latent + frame_noise * z) clipped to
/// [0, 1]. The standard normal draws z do not depend on the noise level.
SynthData generate_scores(const SynthConfig& config);

std::vector<ProtocolManifest> leave_one_out(const SynthConfig& config);

/// Writes features.meta.jsonl, features.fasf, sidecar.json and one
/// manifest per protocol (loo_<domain>.json) under `dir`.
void write_synth_features(const std::filesystem::path& dir, const SynthConfig& config,
                          const SynthData& data);

/// Writes scores.jsonl, sidecar.json and the manifests under `dir`.
void write_synth_scores(const std::filesystem::path& dir, const SynthConfig& config,
                        const SynthData& data);

}  // namespace spoofmeter
