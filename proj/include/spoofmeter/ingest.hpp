#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spoofmeter/records.hpp"

namespace spoofmeter {

/// Fixed-size prefix of a `.fasf` feature blob.
struct FeatureFileHeader {
  static constexpr char kMagic[4] = {'F', 'A', 'S', 'F'};
  static constexpr std::uint32_t kVersion = 1;
  static constexpr std::size_t kSize = 20;

  std::uint32_t version = kVersion;
  std::uint64_t count = 0;
  std::uint32_t dims = 0;
};

/// Score JSONL: one object per line with dataset, video_id, frame_idx,
/// label, score and an optional learner. Errors name the 1-based line.
std::vector<FrameRecord> parse_scores(const std::filesystem::path& path);
std::vector<FrameRecord> parse_scores_text(std::string_view text);

void write_scores(std::span<const FrameRecord> records, const std::filesystem::path& path);
std::string format_scores(std::span<const FrameRecord> records);

/// Feature pair: metadata JSONL (row i describes blob row i) plus a FASF
/// blob of little-endian float32, row-major.
std::vector<FrameRecord> parse_features(const std::filesystem::path& meta_path,
                                        const std::filesystem::path& blob_path);
std::vector<FrameRecord> parse_features_bytes(std::string_view meta_text,
                                              std::string_view blob_bytes);
FeatureFileHeader parse_feature_header(std::string_view blob_bytes);

/// Writes features as float32. All records must carry features of one width.
void write_features(std::span<const FrameRecord> records,
                    const std::filesystem::path& meta_path,
                    const std::filesystem::path& blob_path);
std::string format_feature_meta(std::span<const FrameRecord> records);
std::string format_feature_blob(std::span<const FrameRecord> records);

/// One group per (dataset, video, learner), sorted by that key, frames
/// sorted by frame_idx.
std::vector<VideoGroup> group_videos(std::span<const FrameRecord> records);

/// Groups holding fewer than `frames_per_video` frames. They are valid
/// input; callers report them as warnings.
std::vector<const VideoGroup*> short_videos(std::span<const VideoGroup> groups,
                                            std::uint64_t frames_per_video);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace spoofmeter
