#include "spoofmeter/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "spoofmeter/error.hpp"
#include "spoofmeter/ingest.hpp"

namespace spoofmeter {
namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string fixed(double value, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

std::string shortest(double value) { return json(value).dump(); }

template <typename T>
T field(const json& doc, const char* name) {
  auto it = doc.find(name);
  if (it == doc.end()) throw InputError(std::string("report: missing field '") + name + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("report: field '") + name + "' has the wrong type");
  }
}

struct Row {
  std::string protocol;
  double hter, auc, bias, variance, threshold;
  std::string seed;
};

std::vector<Row> rows_of(std::span<const EvaluationReport> reports) {
  std::vector<Row> rows;
  for (const auto& r : reports)
    rows.push_back({r.manifest_name, r.hter, r.auc, r.bias, r.variance, r.threshold_used,
                    std::to_string(r.seed)});
  if (rows.size() >= 2) {
    Row avg{"Average", 0, 0, 0, 0, 0, "-"};
    for (const auto& r : reports) {
      avg.hter += r.hter;
      avg.auc += r.auc;
      avg.bias += r.bias;
      avg.variance += r.variance;
      avg.threshold += r.threshold_used;
    }
    const double n = static_cast<double>(reports.size());
    avg.hter /= n;
    avg.auc /= n;
    avg.bias /= n;
    avg.variance /= n;
    avg.threshold /= n;
    rows.push_back(avg);
  }
  return rows;
}

}  // namespace

std::string format_report(const EvaluationReport& r) {
  ordered_json doc;
  doc["protocol"] = r.manifest_name;
  doc["threshold_policy"] = r.threshold_policy;
  doc["threshold_used"] = r.threshold_used;
  doc["seed"] = r.seed;
  doc["hter"] = r.hter;
  doc["far"] = r.far;
  doc["frr"] = r.frr;
  doc["auc"] = r.auc;
  doc["eer"] = r.eer;
  doc["eer_threshold"] = r.eer_threshold;
  ordered_json tpr = ordered_json::object();
  for (const auto& [level, value] : r.tpr_at_fpr) tpr[shortest(level)] = value;
  doc["tpr_at_fpr"] = tpr;
  doc["bias"] = r.bias;
  doc["variance"] = r.variance;
  doc["n_videos"] = r.n_videos;
  doc["n_frames"] = r.n_frames;
  ordered_json prov = ordered_json::object();
  for (const auto& [key, value] : r.provenance) prov[key] = value;
  doc["provenance"] = prov;
  return doc.dump(2) + "\n";
}

EvaluationReport parse_report(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("report: malformed JSON (") + e.what() + ")");
  }
  if (!doc.is_object()) throw InputError("report: expected a JSON object");
  EvaluationReport r;
  r.manifest_name = field<std::string>(doc, "protocol");
  r.threshold_policy = field<std::string>(doc, "threshold_policy");
  r.threshold_used = field<double>(doc, "threshold_used");
  r.seed = field<std::uint64_t>(doc, "seed");
  r.hter = field<double>(doc, "hter");
  r.far = field<double>(doc, "far");
  r.frr = field<double>(doc, "frr");
  r.auc = field<double>(doc, "auc");
  r.eer = field<double>(doc, "eer");
  r.eer_threshold = field<double>(doc, "eer_threshold");
  const json tpr = field<json>(doc, "tpr_at_fpr");
  for (const auto& [level, value] : tpr.items()) {
    try {
      r.tpr_at_fpr[std::stod(level)] = value.get<double>();
    } catch (const std::exception&) {
      throw InputError("report: bad tpr_at_fpr entry '" + level + "'");
    }
  }
  r.bias = field<double>(doc, "bias");
  r.variance = field<double>(doc, "variance");
  r.n_videos = field<std::uint64_t>(doc, "n_videos");
  r.n_frames = field<std::uint64_t>(doc, "n_frames");
  if (doc.contains("provenance"))
    r.provenance = field<std::map<std::string, std::string>>(doc, "provenance");
  return r;
}

EvaluationReport load_report(const std::filesystem::path& path) {
  try {
    return parse_report(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string format_report_table(std::span<const EvaluationReport> reports) {
  const std::vector<std::string> header = {"Protocol", "HTER(%)", "AUC(%)", "Bias",
                                           "Variance", "Threshold", "Seed"};
  std::vector<std::vector<std::string>> cells = {header};
  for (const auto& row : rows_of(reports))
    cells.push_back({row.protocol, fixed(100.0 * row.hter, 2), fixed(100.0 * row.auc, 2),
                     fixed(row.bias, 4), fixed(row.variance, 4), fixed(row.threshold, 4),
                     row.seed});

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());

  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& line) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c > 0) os << "  ";
      // Protocol names left-aligned, numbers right-aligned.
      const std::string pad(width[c] - line[c].size(), ' ');
      os << (c == 0 ? line[c] + pad : pad + line[c]);
    }
    os << '\n';
  };
  emit(cells.front());
  std::size_t total = 2 * (width.size() - 1);
  for (auto w : width) total += w;
  os << std::string(total, '-') << '\n';
  for (std::size_t i = 1; i < cells.size(); ++i) emit(cells[i]);
  return os.str();
}

std::string format_report_csv(std::span<const EvaluationReport> reports) {
  std::ostringstream os;
  os << "protocol,hter,auc,bias,variance,threshold,seed\n";
  for (const auto& row : rows_of(reports)) {
    os << '"' << row.protocol << "\"," << shortest(row.hter) << ',' << shortest(row.auc) << ','
       << shortest(row.bias) << ',' << shortest(row.variance) << ','
       << shortest(row.threshold) << ',' << row.seed << '\n';
  }
  return os.str();
}

}  // namespace spoofmeter
