#include "spoofmeter/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "json.hpp"
#include "spoofmeter/error.hpp"
#include "spoofmeter/ingest.hpp"

namespace spoofmeter {
namespace {

constexpr double kClampLow = 1e-7;
constexpr double kClampHigh = 1.0 - 1e-7;
constexpr int kMaxHalvings = 40;

using FrameKey = std::tuple<std::string, std::string, std::uint64_t>;

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

// Gradient of fused_bce with respect to the weight logits.
Eigen::VectorXd logit_gradient(const Eigen::VectorXd& weights, const AlignedScores& data) {
  const Eigen::VectorXd fused = data.probs * weights;
  Eigen::VectorXd d_fused(fused.size());
  for (Eigen::Index n = 0; n < fused.size(); ++n) {
    const double f = fused[n];
    const double y = to_int(data.labels[static_cast<std::size_t>(n)]);
    d_fused[n] = (f < kClampLow || f > kClampHigh) ? 0.0 : (f - y) / (f * (1.0 - f));
  }
  d_fused /= static_cast<double>(fused.size());
  const Eigen::VectorXd d_weights = data.probs.transpose() * d_fused;
  return weights.cwiseProduct(d_weights.array().matrix() -
                              Eigen::VectorXd::Constant(weights.size(), weights.dot(d_weights)));
}

}  // namespace

FusionModel FusionModel::uniform(std::vector<std::string> learner_ids) {
  if (learner_ids.empty()) throw InputError("fusion: need at least one learner");
  FusionModel m;
  m.logits = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(learner_ids.size()));
  m.learner_ids = std::move(learner_ids);
  return m;
}

Eigen::VectorXd FusionModel::weights() const { return softmax(logits); }

double fuse(const FusionModel& model, std::span<const double> probs) {
  if (probs.size() != model.learner_ids.size())
    throw InputError("fuse: got " + std::to_string(probs.size()) + " probabilities for " +
                     std::to_string(model.learner_ids.size()) + " learners");
  const Eigen::VectorXd w = model.weights();
  double out = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    if (!(probs[k] >= 0.0 && probs[k] <= 1.0))
      throw InputError("fuse: probability outside [0, 1]");
    out += w[static_cast<Eigen::Index>(k)] * probs[k];
  }
  return std::clamp(out, 0.0, 1.0);
}

AlignedScores align_scores(std::span<const FrameRecord> records,
                           const std::vector<std::string>& learner_order) {
  std::map<std::string, std::map<FrameKey, const FrameRecord*>> by_learner;
  for (const auto& r : records) {
    if (!r.has_score()) throw InputError("fusion: records must carry scores");
    if (!r.learner_id) throw InputError("fusion: record without a learner id");
    auto& table = by_learner[*r.learner_id];
    if (!table.emplace(FrameKey{r.dataset_id, r.video_id, r.frame_idx}, &r).second)
      throw InputError("fusion: learner " + *r.learner_id + " scores frame " + r.dataset_id + "/" +
                       r.video_id + "#" + std::to_string(r.frame_idx) + " twice");
  }
  if (by_learner.empty()) throw InputError("fusion: no scored records");

  AlignedScores out;
  if (learner_order.empty()) {
    for (const auto& [id, table] : by_learner) out.learner_ids.push_back(id);
  } else {
    out.learner_ids = learner_order;
    std::set<std::string> listed(learner_order.begin(), learner_order.end());
    if (listed.size() != learner_order.size()) throw InputError("fusion: learner listed twice");
    for (const auto& [id, table] : by_learner)
      if (!listed.contains(id)) throw InputError("fusion: learner " + id + " not in learner order");
    for (const auto& id : learner_order)
      if (!by_learner.contains(id)) throw InputError("fusion: no scores for learner " + id);
  }

  const auto& reference = by_learner.at(out.learner_ids.front());
  for (const auto& [id, table] : by_learner) {
    if (table.size() != reference.size())
      throw InputError("fusion: learners score different frame sets (" + id + " has " +
                       std::to_string(table.size()) + " frames, " + out.learner_ids.front() +
                       " has " + std::to_string(reference.size()) + ")");
  }

  const auto n = static_cast<Eigen::Index>(reference.size());
  const auto k_count = static_cast<Eigen::Index>(out.learner_ids.size());
  out.probs.resize(n, k_count);
  Eigen::Index row = 0;
  for (const auto& [key, first] : reference) {
    out.keys.push_back(*first);
    out.keys.back().learner_id.reset();
    out.labels.push_back(first->label);
    for (Eigen::Index k = 0; k < k_count; ++k) {
      const auto& table = by_learner.at(out.learner_ids[static_cast<std::size_t>(k)]);
      auto it = table.find(key);
      if (it == table.end())
        throw InputError("fusion: learner " + out.learner_ids[static_cast<std::size_t>(k)] +
                         " has no score for frame " + first->dataset_id + "/" + first->video_id +
                         "#" + std::to_string(first->frame_idx));
      if (it->second->label != first->label)
        throw InputError("fusion: learners disagree on the label of " + first->dataset_id + "/" +
                         first->video_id);
      out.probs(row, k) = it->second->score();
    }
    ++row;
  }
  return out;
}

double fused_bce(const Eigen::VectorXd& weights, const AlignedScores& data) {
  const Eigen::VectorXd fused = data.probs * weights;
  double total = 0.0;
  for (Eigen::Index n = 0; n < fused.size(); ++n) {
    const double f = std::clamp(fused[n], kClampLow, kClampHigh);
    total -= data.labels[static_cast<std::size_t>(n)] == Label::kLive ? std::log(f)
                                                                       : std::log(1.0 - f);
  }
  return total / static_cast<double>(fused.size());
}

FusionFit fit_weights(std::span<const FrameRecord> records, const FusionConfig& config) {
  if (!(config.learning_rate > 0.0)) throw InputError("fusion: learning rate must be positive");
  const AlignedScores data = align_scores(records, config.learner_order);
  const bool has_live =
      std::find(data.labels.begin(), data.labels.end(), Label::kLive) != data.labels.end();
  const bool has_spoof =
      std::find(data.labels.begin(), data.labels.end(), Label::kSpoof) != data.labels.end();
  if (!has_live || !has_spoof)
    throw InputError("fusion: fit split must contain both live and spoof frames");

  FusionFit fit;
  fit.model = FusionModel::uniform(data.learner_ids);
  fit.n_frames = data.labels.size();
  fit.seed = config.seed;
  double loss = fused_bce(fit.model.weights(), data);
  fit.initial_loss = loss;

  for (std::size_t step = 0; step < config.steps; ++step) {
    const Eigen::VectorXd grad = logit_gradient(fit.model.weights(), data);
    if (!grad.allFinite()) throw InvariantError("fusion: non-finite gradient");
    if (grad.lpNorm<Eigen::Infinity>() == 0.0) break;
    double lr = config.learning_rate;
    bool accepted = false;
    for (int halving = 0; halving < kMaxHalvings && !accepted; ++halving, lr *= 0.5) {
      const Eigen::VectorXd candidate = fit.model.logits - lr * grad;
      const double candidate_loss = fused_bce(softmax(candidate), data);
      if (candidate_loss <= loss) {
        fit.model.logits = candidate;
        loss = candidate_loss;
        accepted = true;
      }
    }
    if (!accepted) break;
    fit.steps_taken = step + 1;
  }
  fit.final_loss = loss;
  return fit;
}

std::vector<FrameRecord> fuse_records(const FusionModel& model,
                                      std::span<const FrameRecord> records) {
  const AlignedScores data = align_scores(records, model.learner_ids);
  const Eigen::VectorXd w = model.weights();
  std::vector<FrameRecord> out = data.keys;
  for (std::size_t n = 0; n < out.size(); ++n) {
    const Eigen::VectorXd row = data.probs.row(static_cast<Eigen::Index>(n)).transpose();
    out[n].payload = std::clamp(row.dot(w), 0.0, 1.0);
  }
  return out;
}

std::string format_fusion(const FusionFit& fit) {
  nlohmann::ordered_json doc;
  doc["learner_ids"] = fit.model.learner_ids;
  const Eigen::VectorXd w = fit.model.weights();
  doc["weights"] = std::vector<double>(w.data(), w.data() + w.size());
  doc["logits"] = std::vector<double>(fit.model.logits.data(),
                                      fit.model.logits.data() + fit.model.logits.size());
  nlohmann::ordered_json prov;
  prov["objective"] = "clamped probability-space BCE";
  prov["initial_loss"] = fit.initial_loss;
  prov["final_loss"] = fit.final_loss;
  prov["steps"] = fit.steps_taken;
  prov["n_frames"] = fit.n_frames;
  prov["seed"] = fit.seed;
  doc["fit"] = prov;
  return doc.dump(2) + "\n";
}

FusionModel parse_fusion(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
    FusionModel m;
    m.learner_ids = doc.at("learner_ids").get<std::vector<std::string>>();
    const auto logits = doc.at("logits").get<std::vector<double>>();
    if (m.learner_ids.empty() || logits.size() != m.learner_ids.size())
      throw InputError("fusion model: learner_ids and logits must be non-empty and aligned");
    m.logits = Eigen::Map<const Eigen::VectorXd>(logits.data(),
                                                 static_cast<Eigen::Index>(logits.size()));
    if (!m.logits.allFinite()) throw InputError("fusion model: non-finite logit");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("fusion model: ") + e.what());
  }
}

FusionModel load_fusion(const std::filesystem::path& path) {
  try {
    return parse_fusion(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

}  // namespace spoofmeter
