#include "spoofmeter/manifest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "json.hpp"
#include "spoofmeter/error.hpp"
#include "spoofmeter/ingest.hpp"

namespace spoofmeter {
namespace {

using json = nlohmann::json;

std::vector<std::string> dataset_list(const json& doc, const char* field, bool required) {
  auto it = doc.find(field);
  if (it == doc.end()) {
    if (required) throw InputError(std::string("manifest: missing field '") + field + "'");
    return {};
  }
  if (!it->is_array()) throw InputError(std::string("manifest: '") + field + "' must be a list");
  std::vector<std::string> out;
  for (const auto& item : *it) {
    if (!item.is_string() || item.get_ref<const std::string&>().empty())
      throw InputError(std::string("manifest: '") + field + "' entries must be non-empty strings");
    out.push_back(item.get<std::string>());
  }
  if (required && out.empty())
    throw InputError(std::string("manifest: '") + field + "' must not be empty");
  std::set<std::string> unique(out.begin(), out.end());
  if (unique.size() != out.size())
    throw InputError(std::string("manifest: '") + field + "' lists a dataset twice");
  return out;
}

void require_disjoint(const std::vector<std::string>& a, const char* a_name,
                      const std::vector<std::string>& b, const char* b_name) {
  for (const auto& d : a)
    if (std::find(b.begin(), b.end(), d) != b.end())
      throw InputError("manifest: dataset '" + d + "' appears in both " + a_name + " and " +
                       b_name);
}

}  // namespace

ThresholdPolicy parse_threshold_policy(std::string_view text) {
  if (text.starts_with("fixed:")) {
    const std::string_view number = text.substr(6);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), value);
    if (ec != std::errc() || ptr != number.data() + number.size() || number.empty())
      throw InputError("threshold policy: cannot parse '" + std::string(number) + "'");
    if (!(value > 0.0 && value < 1.0))
      throw InputError("threshold policy: fixed threshold must lie in (0, 1)");
    return FixedThreshold{value};
  }
  if (text.starts_with("eer:")) {
    const std::string split(text.substr(4));
    if (split != "train" && split != "fit" && split != "test")
      throw InputError("threshold policy: eer split must be train, fit or test, got '" + split +
                       "'");
    return EerThreshold{split};
  }
  throw InputError("unknown threshold policy '" + std::string(text) +
                   "' (expected fixed:<t> or eer:<split>)");
}

std::string to_string(const ThresholdPolicy& policy) {
  if (const auto* fixed = std::get_if<FixedThreshold>(&policy))
    return "fixed:" + json(fixed->value).dump();
  return "eer:" + std::get<EerThreshold>(policy).split;
}

std::vector<std::string> ProtocolManifest::split(std::string_view split_name) const {
  if (split_name == "train") return train_datasets;
  if (split_name == "test") return test_datasets;
  if (split_name == "fit") return fit_datasets;
  throw InputError("unknown split '" + std::string(split_name) + "'");
}

ProtocolManifest parse_manifest(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("manifest: malformed JSON (") + e.what() + ")");
  }
  if (!doc.is_object()) throw InputError("manifest: expected a JSON object");
  static const std::set<std::string> kFields = {
      "name", "train", "test", "fit", "threshold_policy", "seed", "frames_per_video"};
  for (const auto& [name, value] : doc.items())
    if (!kFields.contains(name)) throw InputError("manifest: unknown field '" + name + "'");

  ProtocolManifest m;
  auto name = doc.find("name");
  if (name == doc.end() || !name->is_string() || name->get_ref<const std::string&>().empty())
    throw InputError("manifest: 'name' must be a non-empty string");
  m.name = name->get<std::string>();

  m.train_datasets = dataset_list(doc, "train", true);
  m.test_datasets = dataset_list(doc, "test", true);
  m.fit_datasets = dataset_list(doc, "fit", false);
  require_disjoint(m.train_datasets, "train", m.test_datasets, "test");
  require_disjoint(m.fit_datasets, "fit", m.test_datasets, "test");

  if (auto it = doc.find("threshold_policy"); it != doc.end()) {
    if (!it->is_string()) throw InputError("manifest: 'threshold_policy' must be a string");
    m.threshold_policy = parse_threshold_policy(it->get<std::string>());
  }
  if (auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_unsigned())
      throw InputError("manifest: 'seed' must be a non-negative integer");
    m.seed = it->get<std::uint64_t>();
    m.seed_defaulted = false;
  }
  if (auto it = doc.find("frames_per_video"); it != doc.end()) {
    if (!it->is_number_unsigned() || it->get<std::uint64_t>() == 0)
      throw InputError("manifest: 'frames_per_video' must be a positive integer");
    m.frames_per_video = it->get<std::uint64_t>();
  }
  return m;
}

ProtocolManifest load_manifest(const std::filesystem::path& path) {
  try {
    return parse_manifest(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string format_manifest(const ProtocolManifest& m) {
  nlohmann::ordered_json doc;
  doc["name"] = m.name;
  doc["train"] = m.train_datasets;
  doc["test"] = m.test_datasets;
  if (!m.fit_datasets.empty()) doc["fit"] = m.fit_datasets;
  doc["threshold_policy"] = to_string(m.threshold_policy);
  if (!m.seed_defaulted) doc["seed"] = m.seed;
  doc["frames_per_video"] = m.frames_per_video;
  return doc.dump(2) + "\n";
}

}  // namespace spoofmeter
