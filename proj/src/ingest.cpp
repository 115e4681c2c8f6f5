#include "spoofmeter/ingest.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "spoofmeter/error.hpp"

namespace spoofmeter {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
using RecordKey =
    std::tuple<std::string, std::string, std::uint64_t, std::optional<std::string>>;

RecordKey key_of(const FrameRecord& r) {
  return {r.dataset_id, r.video_id, r.frame_idx, r.learner_id};
}

[[noreturn]] void fail_at(std::string_view where, std::size_t index, const std::string& what) {
  std::ostringstream os;
  os << where << ' ' << index << ": " << what;
  throw InputError(os.str());
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

// Splits on '\n', dropping a trailing '\r'. Line numbers are 1-based.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

// Shared identity fields of score lines and feature metadata rows.
FrameRecord parse_identity(const json& obj, bool with_score, std::string_view where,
                           std::size_t index) {
  if (!obj.is_object()) fail_at(where, index, "expected a JSON object");
  static const std::set<std::string> kScoreFields = {"dataset", "video_id", "frame_idx",
                                                     "label", "score", "learner"};
  static const std::set<std::string> kMetaFields = {"dataset", "video_id", "frame_idx",
                                                    "label", "learner"};
  const auto& allowed = with_score ? kScoreFields : kMetaFields;
  for (const auto& [name, value] : obj.items()) {
    if (!allowed.contains(name)) fail_at(where, index, "unknown field '" + name + "'");
  }

  auto require = [&](const char* name) -> const json& {
    auto it = obj.find(name);
    if (it == obj.end()) fail_at(where, index, std::string("missing field '") + name + "'");
    return *it;
  };

  FrameRecord record;
  const json& dataset = require("dataset");
  if (!dataset.is_string() || dataset.get_ref<const std::string&>().empty())
    fail_at(where, index, "'dataset' must be a non-empty string");
  record.dataset_id = dataset.get<std::string>();

  const json& video = require("video_id");
  if (!video.is_string() || video.get_ref<const std::string&>().empty())
    fail_at(where, index, "'video_id' must be a non-empty string");
  record.video_id = video.get<std::string>();

  const json& frame = require("frame_idx");
  if (!frame.is_number_unsigned())
    fail_at(where, index, "'frame_idx' must be a non-negative integer");
  record.frame_idx = frame.get<std::uint64_t>();

  const json& label = require("label");
  if (!label.is_number_integer() || (label.get<std::int64_t>() != 0 && label.get<std::int64_t>() != 1))
    fail_at(where, index, "'label' must be 0 (spoof) or 1 (live)");
  record.label = label.get<std::int64_t>() == 1 ? Label::kLive : Label::kSpoof;

  if (with_score) {
    const json& score = require("score");
    if (!score.is_number()) fail_at(where, index, "'score' must be a number");
    const double value = score.get<double>();
    if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
      std::ostringstream os;
      os << "score " << value << " outside [0, 1]";
      fail_at(where, index, os.str());
    }
    record.payload = value;
  }

  if (auto it = obj.find("learner"); it != obj.end()) {
    if (!it->is_string() || it->get_ref<const std::string&>().empty())
      fail_at(where, index, "'learner' must be a non-empty string");
    record.learner_id = it->get<std::string>();
  }
  return record;
}

std::vector<FrameRecord> parse_rows(std::string_view text, bool with_score,
                                    std::string_view where) {
  std::vector<FrameRecord> records;
  std::set<RecordKey> seen;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    if (is_blank(lines[i])) continue;
    json obj;
    try {
      obj = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      fail_at(where, line_no, std::string("malformed JSON (") + e.what() + ")");
    }
    FrameRecord record = parse_identity(obj, with_score, where, line_no);
    if (!seen.insert(key_of(record)).second)
      fail_at(where, line_no,
              "duplicate frame (" + record.dataset_id + ", " + record.video_id + ", " +
                  std::to_string(record.frame_idx) + ")");
    records.push_back(std::move(record));
  }
  return records;
}

ordered_json identity_json(const FrameRecord& r) {
  ordered_json obj;
  obj["dataset"] = r.dataset_id;
  obj["video_id"] = r.video_id;
  obj["frame_idx"] = r.frame_idx;
  obj["label"] = to_int(r.label);
  return obj;
}

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xFF));
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i)
    value |= static_cast<T>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  return value;
}

}  // namespace

std::vector<double> VideoGroup::scores() const {
  std::vector<double> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    if (!f.has_score())
      throw InputError("video " + dataset_id + "/" + video_id + " carries features, not scores");
    out.push_back(f.score());
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

std::vector<FrameRecord> parse_scores_text(std::string_view text) {
  return parse_rows(text, /*with_score=*/true, "line");
}

std::vector<FrameRecord> parse_scores(const std::filesystem::path& path) {
  try {
    return parse_scores_text(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string format_scores(std::span<const FrameRecord> records) {
  std::string out;
  for (const auto& r : records) {
    ordered_json obj = identity_json(r);
    obj["score"] = r.score();
    if (r.learner_id) obj["learner"] = *r.learner_id;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

void write_scores(std::span<const FrameRecord> records, const std::filesystem::path& path) {
  write_file(path, format_scores(records));
}

FeatureFileHeader parse_feature_header(std::string_view blob) {
  if (blob.size() < FeatureFileHeader::kSize)
    throw InputError("feature blob truncated: " + std::to_string(blob.size()) +
                     " bytes, header needs " + std::to_string(FeatureFileHeader::kSize));
  if (!std::equal(std::begin(FeatureFileHeader::kMagic), std::end(FeatureFileHeader::kMagic),
                  blob.begin()))
    throw InputError("feature blob has wrong magic (expected \"FASF\")");
  FeatureFileHeader header;
  header.version = get_le<std::uint32_t>(blob, 4);
  header.count = get_le<std::uint64_t>(blob, 8);
  header.dims = get_le<std::uint32_t>(blob, 16);
  if (header.version != FeatureFileHeader::kVersion)
    throw InputError("unsupported feature blob version " + std::to_string(header.version));

  const std::size_t payload = blob.size() - FeatureFileHeader::kSize;
  const unsigned __int128 declared =
      static_cast<unsigned __int128>(header.count) * header.dims * 4;
  if (payload % 4 != 0 || declared != payload) {
    std::ostringstream os;
    os << "feature blob length mismatch: header declares " << header.count << " x "
       << header.dims << " float32 values but payload holds " << payload << " bytes";
    throw InputError(os.str());
  }
  return header;
}

std::vector<FrameRecord> parse_features_bytes(std::string_view meta_text,
                                              std::string_view blob) {
  const FeatureFileHeader header = parse_feature_header(blob);
  std::vector<FrameRecord> records = parse_rows(meta_text, /*with_score=*/false, "meta row");
  if (records.size() != header.count)
    throw InputError("metadata has " + std::to_string(records.size()) +
                     " rows but feature blob declares " + std::to_string(header.count));

  std::size_t offset = FeatureFileHeader::kSize;
  for (std::size_t row = 0; row < records.size(); ++row) {
    Eigen::VectorXd feature(header.dims);
    for (std::uint32_t col = 0; col < header.dims; ++col) {
      const float value = std::bit_cast<float>(get_le<std::uint32_t>(blob, offset));
      offset += 4;
      if (!std::isfinite(value)) {
        std::ostringstream os;
        os << "feature row " << row << ", column " << col << ": non-finite value " << value;
        throw InputError(os.str());
      }
      feature[col] = static_cast<double>(value);
    }
    records[row].payload = std::move(feature);
  }
  return records;
}

std::vector<FrameRecord> parse_features(const std::filesystem::path& meta_path,
                                        const std::filesystem::path& blob_path) {
  try {
    return parse_features_bytes(read_file(meta_path), read_file(blob_path));
  } catch (const InputError& e) {
    throw InputError(blob_path.string() + ": " + e.what());
  }
}

std::string format_feature_meta(std::span<const FrameRecord> records) {
  std::string out;
  for (const auto& r : records) {
    ordered_json obj = identity_json(r);
    if (r.learner_id) obj["learner"] = *r.learner_id;
    out += obj.dump();
    out += '\n';
  }
  return out;
}

std::string format_feature_blob(std::span<const FrameRecord> records) {
  const std::uint32_t dims =
      records.empty() ? 0 : static_cast<std::uint32_t>(records.front().feature().size());
  std::string out(FeatureFileHeader::kMagic, 4);
  put_le<std::uint32_t>(out, FeatureFileHeader::kVersion);
  put_le<std::uint64_t>(out, records.size());
  put_le<std::uint32_t>(out, dims);
  out.reserve(FeatureFileHeader::kSize + records.size() * dims * 4);
  for (std::size_t row = 0; row < records.size(); ++row) {
    const Eigen::VectorXd& f = records[row].feature();
    if (static_cast<std::uint32_t>(f.size()) != dims)
      throw InputError("feature row " + std::to_string(row) + " has " +
                       std::to_string(f.size()) + " dims, expected " + std::to_string(dims));
    for (Eigen::Index c = 0; c < f.size(); ++c)
      put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(f[c])));
  }
  return out;
}

void write_features(std::span<const FrameRecord> records,
                    const std::filesystem::path& meta_path,
                    const std::filesystem::path& blob_path) {
  const std::string blob = format_feature_blob(records);
  write_file(meta_path, format_feature_meta(records));
  write_file(blob_path, blob);
}

std::vector<VideoGroup> group_videos(std::span<const FrameRecord> records) {
  if (!records.empty()) {
    const bool scored = records.front().has_score();
    for (const auto& r : records)
      if (r.has_score() != scored)
        throw InputError("cannot group a mix of scored and feature records");
  }

  using GroupKey = std::tuple<std::string, std::string, std::optional<std::string>>;
  std::map<GroupKey, VideoGroup> groups;
  for (const auto& r : records) {
    auto [it, inserted] = groups.try_emplace(GroupKey{r.dataset_id, r.video_id, r.learner_id});
    VideoGroup& g = it->second;
    if (inserted) {
      g.dataset_id = r.dataset_id;
      g.video_id = r.video_id;
      g.learner_id = r.learner_id;
      g.label = r.label;
    } else if (g.label != r.label) {
      throw InputError("video " + r.dataset_id + "/" + r.video_id +
                       " has conflicting labels 0 and 1");
    }
    g.frames.push_back(r);
  }

  std::vector<VideoGroup> out;
  out.reserve(groups.size());
  for (auto& [key, g] : groups) {
    std::sort(g.frames.begin(), g.frames.end(),
              [](const FrameRecord& a, const FrameRecord& b) { return a.frame_idx < b.frame_idx; });
    for (std::size_t i = 1; i < g.frames.size(); ++i)
      if (g.frames[i].frame_idx == g.frames[i - 1].frame_idx)
        throw InputError("video " + g.dataset_id + "/" + g.video_id + " repeats frame " +
                         std::to_string(g.frames[i].frame_idx));
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<const VideoGroup*> short_videos(std::span<const VideoGroup> groups,
                                            std::uint64_t frames_per_video) {
  std::vector<const VideoGroup*> out;
  for (const auto& g : groups)
    if (g.frames.size() < frames_per_video) out.push_back(&g);
  return out;
}

}  // namespace spoofmeter
