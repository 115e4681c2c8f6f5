#include "spoofmeter/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <Eigen/Core>

#include "json.hpp"
#include "spoofmeter/error.hpp"
#include "spoofmeter/head.hpp"
#include "spoofmeter/ingest.hpp"
#include "spoofmeter/rng.hpp"

namespace spoofmeter {
namespace {

using ordered_json = nlohmann::ordered_json;

const std::uint64_t kDirectionStream = stream_id("synth/direction");
const std::uint64_t kDomainStream = stream_id("synth/domain");
const std::uint64_t kFrameStream = stream_id("synth/frames");

std::string video_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "v%04zu", index);
  return buf;
}

Label video_label(std::size_t index) { return index % 2 == 0 ? Label::kLive : Label::kSpoof; }

Eigen::VectorXd random_unit(CounterRng& rng, std::size_t dims) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(dims));
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
  } while (v.norm() == 0.0);
  return v / v.norm();
}

ordered_json config_json(const SynthConfig& c) {
  ordered_json doc;
  doc["n_domains"] = c.n_domains;
  doc["videos_per_domain"] = c.videos_per_domain;
  doc["frames_per_video"] = c.frames_per_video;
  doc["feature_dim"] = c.feature_dim;
  doc["separation"] = c.separation;
  doc["domain_shift"] = c.domain_shift;
  doc["frame_noise"] = c.frame_noise;
  doc["seed"] = c.seed;
  doc["rng"] = "philox4x32-10";
  return doc;
}

void write_manifests(const std::filesystem::path& dir, const SynthData& data) {
  for (const auto& m : data.manifests)
    write_file(dir / ("loo_" + m.test_datasets.front() + ".json"), format_manifest(m));
}

}  // namespace

void SynthConfig::validate() const {
  if (n_domains < 1 || videos_per_domain < 1 || frames_per_video < 1 || feature_dim < 1)
    throw InputError("synth config: all counts must be >= 1");
  if (n_domains > 26) throw InputError("synth config: at most 26 domains");
  for (double v : {separation, domain_shift, frame_noise})
    if (!std::isfinite(v) || v < 0.0)
      throw InputError("synth config: magnitudes must be finite and >= 0");
}

std::string domain_name(std::size_t index) { return std::string(1, static_cast<char>('A' + index)); }

std::vector<ProtocolManifest> leave_one_out(const SynthConfig& config) {
  std::vector<ProtocolManifest> out;
  if (config.n_domains < 2) return out;
  for (std::size_t held = 0; held < config.n_domains; ++held) {
    ProtocolManifest m;
    std::string train_letters;
    for (std::size_t d = 0; d < config.n_domains; ++d) {
      if (d == held) continue;
      m.train_datasets.push_back(domain_name(d));
      train_letters += domain_name(d);
    }
    m.test_datasets = {domain_name(held)};
    m.name = train_letters + "->" + domain_name(held);
    m.threshold_policy = FixedThreshold{0.5};
    m.seed = config.seed;
    m.seed_defaulted = false;
    m.frames_per_video = config.frames_per_video;
    out.push_back(std::move(m));
  }
  return out;
}

SynthData generate(const SynthConfig& config) {
  config.validate();
  SynthData data;
  data.manifests = leave_one_out(config);

  CounterRng dir_rng(config.seed, kDirectionStream);
  const Eigen::VectorXd direction = random_unit(dir_rng, config.feature_dim);

  for (std::size_t d = 0; d < config.n_domains; ++d) {
    CounterRng domain_rng(config.seed, stream_id(kDomainStream, d));
    const Eigen::VectorXd offset = config.domain_shift * random_unit(domain_rng, config.feature_dim);
    for (std::size_t v = 0; v < config.videos_per_domain; ++v) {
      const Label label = video_label(v);
      const double sign = label == Label::kLive ? 1.0 : -1.0;
      const Eigen::VectorXd latent = sign * 0.5 * config.separation * direction + offset;
      CounterRng frame_rng(config.seed, stream_id(kFrameStream, d, v));
      for (std::size_t f = 0; f < config.frames_per_video; ++f) {
        Eigen::VectorXd feature = latent;
        for (Eigen::Index i = 0; i < feature.size(); ++i)
          feature[i] += config.frame_noise * frame_rng.normal();
        // Stored as float32 on disk; round now so in-memory and on-disk agree.
        feature = feature.cast<float>().cast<double>();
        FrameRecord r;
        r.dataset_id = domain_name(d);
        r.video_id = video_name(v);
        r.frame_idx = f;
        r.label = label;
        r.payload = std::move(feature);
        data.records.push_back(std::move(r));
      }
    }
  }
  return data;
}

SynthData generate_scores(const SynthConfig& config) {
  config.validate();
  SynthData data;
  data.manifests = leave_one_out(config);

  for (std::size_t d = 0; d < config.n_domains; ++d) {
    CounterRng domain_rng(config.seed, stream_id(kDomainStream, d));
    const double offset = config.domain_shift * (domain_rng.uniform() < 0.5 ? -1.0 : 1.0);
    for (std::size_t v = 0; v < config.videos_per_domain; ++v) {
      const Label label = video_label(v);
      const double sign = label == Label::kLive ? 1.0 : -1.0;
      const double latent = sign * 0.5 * config.separation + offset;
      CounterRng frame_rng(config.seed, stream_id(kFrameStream, d, v));

      std::vector<double> probs;
      for (std::size_t f = 0; f < config.frames_per_video; ++f) {
        const double z = frame_rng.normal();
        const double p = std::clamp(sigmoid(latent + config.frame_noise * z), 0.0, 1.0);
        probs.push_back(p);
        FrameRecord r;
        r.dataset_id = domain_name(d);
        r.video_id = video_name(v);
        r.frame_idx = f;
        r.label = label;
        r.payload = p;
        data.records.push_back(std::move(r));
      }

      double sum = 0.0;
      for (double p : probs) sum += p;
      const double mean = sum / static_cast<double>(probs.size());
      double ss = 0.0;
      for (double p : probs) ss += (p - mean) * (p - mean);
      data.truth.push_back({domain_name(d), video_name(v), label, latent, mean,
                            std::sqrt(ss / static_cast<double>(probs.size()))});
    }
  }
  return data;
}

void write_synth_features(const std::filesystem::path& dir, const SynthConfig& config,
                          const SynthData& data) {
  std::filesystem::create_directories(dir);
  write_features(data.records, dir / "features.meta.jsonl", dir / "features.fasf");
  ordered_json sidecar;
  sidecar["kind"] = "features";
  sidecar["config"] = config_json(config);
  write_file(dir / "sidecar.json", sidecar.dump(2) + "\n");
  write_manifests(dir, data);
}

void write_synth_scores(const std::filesystem::path& dir, const SynthConfig& config,
                        const SynthData& data) {
  std::filesystem::create_directories(dir);
  write_scores(data.records, dir / "scores.jsonl");
  ordered_json sidecar;
  sidecar["kind"] = "scores";
  sidecar["config"] = config_json(config);
  ordered_json videos = ordered_json::array();
  for (const auto& t : data.truth) {
    ordered_json v;
    v["dataset"] = t.dataset_id;
    v["video_id"] = t.video_id;
    v["label"] = to_int(t.label);
    v["latent"] = t.latent;
    v["mean_prob"] = t.mean_prob;
    v["std_prob"] = t.std_prob;
    videos.push_back(v);
  }
  sidecar["videos"] = videos;
  write_file(dir / "sidecar.json", sidecar.dump(2) + "\n");
  write_manifests(dir, data);
}

}  // namespace spoofmeter
