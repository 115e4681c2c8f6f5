#include "spoofmeter/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>
#include <utility>

#include "spoofmeter/error.hpp"

namespace spoofmeter {
namespace {

void require_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    std::ostringstream os;
    os << what << ' ' << p << " outside [0, 1]";
    throw InputError(os.str());
  }
}

struct ClassCounts {
  std::int64_t live = 0;
  std::int64_t spoof = 0;
};

ClassCounts count_classes(std::span<const double> scores, std::span<const Label> labels) {
  if (scores.size() != labels.size())
    throw InputError("scores and labels differ in length (" + std::to_string(scores.size()) +
                     " vs " + std::to_string(labels.size()) + ")");
  ClassCounts counts;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw InputError("non-finite score");
    (labels[i] == Label::kLive ? counts.live : counts.spoof) += 1;
  }
  if (counts.live == 0 || counts.spoof == 0)
    throw InputError("AUC undefined: need at least one live and one spoof sample (got " +
                     std::to_string(counts.live) + " live, " + std::to_string(counts.spoof) +
                     " spoof)");
  return counts;
}

// ROC vertex in integer counts: false and true positives for `score > threshold`.
struct CountVertex {
  double threshold;
  std::int64_t fp;
  std::int64_t tp;
};

std::vector<CountVertex> count_vertices(std::span<const double> scores,
                                        std::span<const Label> labels) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::vector<CountVertex> vertices;
  std::int64_t fp = 0;
  std::int64_t tp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    vertices.push_back({s, fp, tp});
    for (; i < order.size() && scores[order[i]] == s; ++i)
      (labels[order[i]] == Label::kLive ? tp : fp) += 1;
  }
  const double lowest = scores[order.back()];
  vertices.push_back({std::nextafter(lowest, -std::numeric_limits<double>::infinity()), fp, tp});
  return vertices;
}

}  // namespace

double video_probability(std::span<const double> frame_probs) {
  if (frame_probs.empty()) throw InputError("video_probability: video has no frames");
  double sum = 0.0;
  for (double p : frame_probs) {
    require_probability(p, "frame probability");
    sum += p;
  }
  return sum / static_cast<double>(frame_probs.size());
}

int decide(double prob, double threshold) { return prob > threshold ? 1 : 0; }

VideoPrediction predict_video(std::span<const double> frame_probs, double threshold) {
  VideoPrediction out;
  out.video_prob = video_probability(frame_probs);
  out.decision = decide(out.video_prob, threshold);
  out.frame_probs.assign(frame_probs.begin(), frame_probs.end());
  int positives = 0;
  for (double p : frame_probs) {
    out.frame_decisions.push_back(decide(p, threshold));
    positives += out.frame_decisions.back();
  }
  out.frame_positive_rate = static_cast<double>(positives) / static_cast<double>(frame_probs.size());
  return out;
}

double bias(std::span<const VideoOutcome> videos) {
  if (videos.empty()) throw InputError("bias: no videos");
  double sum = 0.0;
  for (const auto& v : videos) {
    require_probability(v.prob, "video probability");
    const double err = static_cast<double>(to_int(v.label)) - v.prob;
    sum += err * err;
  }
  return sum / static_cast<double>(videos.size());
}

double frame_std(std::span<const double> frame_probs) {
  if (frame_probs.empty()) throw InputError("variance: video has no frames");
  const double anchor = frame_probs.front();
  const double m = static_cast<double>(frame_probs.size());
  double shift = 0.0;
  for (double p : frame_probs) {
    require_probability(p, "frame probability");
    shift += p - anchor;
  }
  const double mean = anchor + shift / m;
  double ss = 0.0;
  for (double p : frame_probs) ss += (p - mean) * (p - mean);
  return std::sqrt(ss / m);
}

double variance(std::span<const std::vector<double>> videos) {
  if (videos.empty()) throw InputError("variance: no videos");
  double sum = 0.0;
  for (const auto& frames : videos) sum += frame_std(frames);
  return sum / static_cast<double>(videos.size());
}

RocCurve roc_curve(std::span<const double> scores, std::span<const Label> labels) {
  const ClassCounts counts = count_classes(scores, labels);
  RocCurve curve;
  for (const auto& v : count_vertices(scores, labels)) {
    curve.points.push_back({static_cast<double>(v.fp) / static_cast<double>(counts.spoof),
                            static_cast<double>(v.tp) / static_cast<double>(counts.live)});
    curve.thresholds.push_back(v.threshold);
  }
  return curve;
}

double auc(const RocCurve& curve) {
  if (curve.points.size() < 2) throw InputError("auc: curve needs at least two points");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const RocPoint& a = curve.points[i - 1];
    const RocPoint& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return area;
}

EerResult eer_threshold(std::span<const double> scores, std::span<const Label> labels) {
  const ClassCounts counts = count_classes(scores, labels);
  const auto vertices = count_vertices(scores, labels);

  // gap = FAR - FRR scaled by live*spoof; exact in integers.
  auto gap = [&](const CountVertex& v) {
    return v.fp * counts.live - (counts.live - v.tp) * counts.spoof;
  };
  auto far = [&](const CountVertex& v) {
    return static_cast<double>(v.fp) / static_cast<double>(counts.spoof);
  };

  for (std::size_t k = 1; k < vertices.size(); ++k) {
    const std::int64_t g = gap(vertices[k]);
    if (g < 0) continue;
    if (g == 0) {
      // Vertex k holds for every threshold in [t_k, t_{k-1}).
      return {0.5 * (vertices[k].threshold + vertices[k - 1].threshold), far(vertices[k])};
    }
    const std::int64_t g_prev = gap(vertices[k - 1]);
    const double alpha = static_cast<double>(-g_prev) / static_cast<double>(g - g_prev);
    const CountVertex& a = vertices[k - 1];
    const CountVertex& b = vertices[k];
    return {a.threshold + alpha * (b.threshold - a.threshold), far(a) + alpha * (far(b) - far(a))};
  }
  throw InvariantError("eer_threshold: FAR and FRR never cross");
}

HterResult hter(std::span<const double> scores, std::span<const Label> labels, double threshold) {
  const ClassCounts counts = count_classes(scores, labels);
  std::int64_t accepted_spoof = 0;
  std::int64_t rejected_live = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const int d = decide(scores[i], threshold);
    if (labels[i] == Label::kSpoof && d == 1) ++accepted_spoof;
    if (labels[i] == Label::kLive && d == 0) ++rejected_live;
  }
  HterResult r;
  r.far = static_cast<double>(accepted_spoof) / static_cast<double>(counts.spoof);
  r.frr = static_cast<double>(rejected_live) / static_cast<double>(counts.live);
  r.hter = (r.far + r.frr) / 2.0;
  return r;
}

double tpr_at_fpr(const RocCurve& curve, double fpr_level) {
  if (!(fpr_level >= 0.0 && fpr_level <= 1.0))
    throw InputError("tpr_at_fpr: level must lie in [0, 1]");
  if (curve.points.empty()) throw InputError("tpr_at_fpr: empty curve");
  std::size_t i = 0;
  while (i + 1 < curve.points.size() && curve.points[i + 1].fpr <= fpr_level) ++i;
  if (i + 1 == curve.points.size()) return curve.points[i].tpr;
  const RocPoint& a = curve.points[i];
  const RocPoint& b = curve.points[i + 1];
  return a.tpr + (fpr_level - a.fpr) / (b.fpr - a.fpr) * (b.tpr - a.tpr);
}

EvaluationReport evaluate(std::span<const VideoGroup> groups, const ProtocolManifest& manifest,
                          const EvaluateOptions& options) {
  struct SplitScores {
    std::vector<double> video_probs;
    std::vector<Label> labels;
  };
  // Canonical order so reductions do not depend on input order.
  std::vector<const VideoGroup*> ordered;
  for (const auto& g : groups) ordered.push_back(&g);
  std::sort(ordered.begin(), ordered.end(), [](const VideoGroup* a, const VideoGroup* b) {
    return std::tie(a->dataset_id, a->video_id, a->learner_id) <
           std::tie(b->dataset_id, b->video_id, b->learner_id);
  });

  auto collect = [&](const std::vector<std::string>& datasets,
                     std::vector<std::vector<double>>* frames) {
    SplitScores out;
    std::set<std::pair<std::string, std::string>> seen;
    for (const VideoGroup* gp : ordered) {
      const VideoGroup& g = *gp;
      if (std::find(datasets.begin(), datasets.end(), g.dataset_id) == datasets.end()) continue;
      if (!seen.insert({g.dataset_id, g.video_id}).second)
        throw InputError("video " + g.dataset_id + "/" + g.video_id +
                         " is scored by several learners; fuse the scores first");
      std::vector<double> probs = g.scores();
      out.video_probs.push_back(video_probability(probs));
      out.labels.push_back(g.label);
      if (frames) frames->push_back(std::move(probs));
    }
    return out;
  };

  std::vector<std::vector<double>> test_frames;
  const SplitScores test = collect(manifest.test_datasets, &test_frames);
  if (test.video_probs.empty())
    throw InputError("protocol " + manifest.name + ": no videos from the test datasets");

  EvaluationReport report;
  report.manifest_name = manifest.name;
  report.seed = manifest.seed;

  const RocCurve curve = roc_curve(test.video_probs, test.labels);
  report.auc = auc(curve);
  const EerResult eer = eer_threshold(test.video_probs, test.labels);
  report.eer = eer.eer;
  report.eer_threshold = eer.threshold;
  for (double level : kTprLevels) report.tpr_at_fpr[level] = tpr_at_fpr(curve, level);

  if (options.threshold) {
    report.threshold_policy = to_string(FixedThreshold{*options.threshold});
    report.threshold_used = *options.threshold;
  } else {
    report.threshold_policy = to_string(manifest.threshold_policy);
    if (const auto* fixed = std::get_if<FixedThreshold>(&manifest.threshold_policy)) {
      report.threshold_used = fixed->value;
    } else {
      const std::string& split = std::get<EerThreshold>(manifest.threshold_policy).split;
      const SplitScores calib = collect(manifest.split(split), nullptr);
      if (calib.video_probs.empty())
        throw InputError("threshold policy eer:" + split + ": no scored videos from that split");
      report.threshold_used = eer_threshold(calib.video_probs, calib.labels).threshold;
    }
  }

  const HterResult h = hter(test.video_probs, test.labels, report.threshold_used);
  report.hter = h.hter;
  report.far = h.far;
  report.frr = h.frr;

  std::vector<VideoOutcome> outcomes;
  for (std::size_t i = 0; i < test.video_probs.size(); ++i)
    outcomes.push_back({test.labels[i], test.video_probs[i]});
  report.bias = bias(outcomes);
  report.variance = variance(test_frames);

  report.n_videos = test.video_probs.size();
  for (const auto& f : test_frames) report.n_frames += f.size();
  return report;
}

}  // namespace spoofmeter
