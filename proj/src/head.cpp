#include "spoofmeter/head.hpp"

#include <bit>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "spoofmeter/ingest.hpp"

namespace spoofmeter {
namespace {

constexpr char kHeadMagic[4] = {'F', 'A', 'S', 'H'};
constexpr std::uint32_t kHeadVersion = 1;
constexpr std::size_t kHeadHeaderSize = 4 + 4 + 4 + 4 + 8;

const std::uint64_t kInitStream = stream_id("head/init");
const std::uint64_t kShuffleStream = stream_id("head/shuffle");
const std::uint64_t kTrainMaskStream = stream_id("head/train-mask");
const std::uint64_t kInferMaskStream = stream_id("head/infer-mask");

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

Example<double> to_example(const FrameRecord& r, Eigen::Index dims) {
  if (!r.has_feature())
    throw InputError("frame " + r.dataset_id + "/" + r.video_id + "#" +
                     std::to_string(r.frame_idx) + " has no feature vector");
  if (r.feature().size() != dims)
    throw InputError("feature width " + std::to_string(r.feature().size()) +
                     " does not match head input width " + std::to_string(dims));
  return {r.feature(), r.label};
}

}  // namespace

std::string to_string(LossMode mode) {
  return mode == LossMode::kAvgLogit ? "avg-logit" : "avg-loss";
}

LossMode parse_loss_mode(std::string_view text) {
  if (text == "avg-logit") return LossMode::kAvgLogit;
  if (text == "avg-loss") return LossMode::kAvgLoss;
  throw InputError("unknown loss mode '" + std::string(text) + "' (avg-logit or avg-loss)");
}

MlpHead<double> init_head(Eigen::Index input_dim, Eigen::Index hidden_dim, double dropout,
                          std::uint64_t seed) {
  if (input_dim < 1 || hidden_dim < 1) throw InputError("init_head: dimensions must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("init_head: dropout must lie in [0, 1)");
  CounterRng rng(seed, kInitStream);
  MlpHead<double> head;
  head.dropout = dropout;
  head.w1.resize(hidden_dim, input_dim);
  const double limit1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (Eigen::Index r = 0; r < hidden_dim; ++r)
    for (Eigen::Index c = 0; c < input_dim; ++c) head.w1(r, c) = limit1 * (2.0 * rng.uniform() - 1.0);
  head.b1 = Eigen::VectorXd::Zero(hidden_dim);
  head.w2.resize(hidden_dim);
  const double limit2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  for (Eigen::Index r = 0; r < hidden_dim; ++r) head.w2[r] = limit2 * (2.0 * rng.uniform() - 1.0);
  head.b2 = 0.0;
  return head;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !(weight_decay >= 0.0) || !std::isfinite(learning_rate) ||
      !std::isfinite(weight_decay))
    throw InputError("train config: learning rate must be positive and weight decay >= 0");
  if (batch_size < 1) throw InputError("train config: batch size must be >= 1");
  if (train_samples < 1 || infer_samples < 1)
    throw InputError("train config: sample counts must be >= 1");
}

std::uint64_t frame_stream(const FrameRecord& frame) {
  std::string key = frame.dataset_id;
  key += '\x1f';
  key += frame.video_id;
  key += '\x1f';
  key += std::to_string(frame.frame_idx);
  key += '\x1f';
  if (frame.learner_id) key += *frame.learner_id;
  return stream_id(key);
}

TrainResult train(const MlpHead<double>& initial, std::span<const FrameRecord> data,
                  const TrainConfig& config) {
  config.validate();
  initial.validate();
  if (data.empty()) throw InputError("train: no training data");

  std::vector<Example<double>> examples;
  std::vector<std::uint64_t> streams;
  bool has_live = false, has_spoof = false;
  for (const auto& r : data) {
    examples.push_back(to_example(r, initial.input_dim()));
    streams.push_back(frame_stream(r));
    (r.label == Label::kLive ? has_live : has_spoof) = true;
  }
  if (!has_live || !has_spoof)
    throw InputError("train: training data must contain both live and spoof frames");

  TrainResult result{initial, {}};
  MlpHead<double>& head = result.head;
  Eigen::VectorXd params = head.pack();
  AdamState<double> adam(params.size());

  std::vector<std::size_t> order(examples.size());
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    CounterRng shuffle(config.seed, stream_id(kShuffleStream, epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle.uniform() * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<Example<double>> batch;
      std::vector<std::vector<DropoutMask<double>>> masks;
      for (std::size_t k = start; k < stop; ++k) {
        const std::size_t idx = order[k];
        batch.push_back(examples[idx]);
        CounterRng rng(config.seed, stream_id(kTrainMaskStream, epoch, streams[idx]));
        auto& ex_masks = masks.emplace_back();
        for (std::size_t s = 0; s < config.train_samples; ++s)
          ex_masks.push_back(draw_mask<double>(head.hidden_dim(), head.dropout, rng));
      }

      const auto lg = backward<double>(head, batch, masks, config.loss_mode);
      if (!std::isfinite(lg.loss) || !lg.gradient.allFinite()) {
        std::ostringstream os;
        os << "train: non-finite loss or gradient at epoch " << epoch << ", batch starting at "
           << start << " (loss " << lg.loss << ")";
        throw InvariantError(os.str());
      }
      epoch_loss += lg.loss * static_cast<double>(batch.size());
      adam_step<double>(adam, params, lg.gradient, config.learning_rate, config.weight_decay);
      head.unpack(params);
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(examples.size()));
  }
  return result;
}

double score_frame(const MlpHead<double>& head, const FrameRecord& frame, std::size_t samples,
                   std::uint64_t seed) {
  const Example<double> ex = to_example(frame, head.input_dim());
  CounterRng rng(seed, stream_id(kInferMaskStream, frame_stream(frame)));
  return sigmoid(mc_forward(head, ex.x, samples, rng).mean_logit);
}

std::vector<FrameRecord> predict(const MlpHead<double>& head, std::span<const VideoGroup> groups,
                                 std::size_t samples, std::uint64_t seed) {
  head.validate();
  if (samples < 1) throw InputError("predict: need at least one sample");
  std::vector<FrameRecord> out;
  for (const auto& g : groups) {
    for (const auto& frame : g.frames) {
      FrameRecord scored = frame;
      scored.payload = score_frame(head, frame, samples, seed);
      out.push_back(std::move(scored));
    }
  }
  return out;
}

std::string format_head(const MlpHead<double>& head) {
  head.validate();
  std::string out(kHeadMagic, 4);
  put_le<std::uint32_t>(out, kHeadVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(head.input_dim()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(head.hidden_dim()));
  put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(head.dropout));
  const Eigen::VectorXd params = head.pack();
  for (Eigen::Index i = 0; i < params.size(); ++i)
    put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(params[i]));
  return out;
}

MlpHead<double> parse_head(std::string_view bytes) {
  if (bytes.size() < kHeadHeaderSize) throw InputError("head file truncated");
  if (!std::equal(std::begin(kHeadMagic), std::end(kHeadMagic), bytes.begin()))
    throw InputError("head file has wrong magic (expected \"FASH\")");
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kHeadVersion)
    throw InputError("unsupported head file version " + std::to_string(version));
  const auto d = get_le<std::uint32_t>(bytes, 8);
  const auto h = get_le<std::uint32_t>(bytes, 12);
  if (d == 0 || h == 0) throw InputError("head file declares empty dimensions");

  MlpHead<double> head;
  head.dropout = std::bit_cast<double>(get_le<std::uint64_t>(bytes, 16));
  head.w1.resize(h, d);
  head.b1.resize(h);
  head.w2.resize(h);
  const auto count = static_cast<std::size_t>(head.param_count());
  if (bytes.size() != kHeadHeaderSize + 8 * count)
    throw InputError("head file length mismatch: expected " +
                     std::to_string(kHeadHeaderSize + 8 * count) + " bytes, got " +
                     std::to_string(bytes.size()));
  Eigen::VectorXd params(head.param_count());
  for (std::size_t i = 0; i < count; ++i)
    params[static_cast<Eigen::Index>(i)] =
        std::bit_cast<double>(get_le<std::uint64_t>(bytes, kHeadHeaderSize + 8 * i));
  head.unpack(params);
  head.validate();
  return head;
}

void save_head(const MlpHead<double>& head, const std::filesystem::path& path) {
  write_file(path, format_head(head));
}

MlpHead<double> load_head(const std::filesystem::path& path) {
  try {
    return parse_head(read_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::string format_head_sidecar(const MlpHead<double>& head, const TrainConfig& config) {
  nlohmann::ordered_json doc;
  doc["format"] = "FASH";
  doc["version"] = kHeadVersion;
  doc["input_dim"] = head.input_dim();
  doc["hidden_dim"] = head.hidden_dim();
  doc["dropout"] = head.dropout;
  doc["init"] = "uniform(+-1/sqrt(fan_in)), zero biases";
  doc["learning_rate"] = config.learning_rate;
  doc["weight_decay"] = config.weight_decay;
  doc["batch_size"] = config.batch_size;
  doc["epochs"] = config.epochs;
  doc["train_samples"] = config.train_samples;
  doc["infer_samples"] = config.infer_samples;
  doc["loss_mode"] = to_string(config.loss_mode);
  doc["seed"] = config.seed;
  doc["adam_beta1"] = AdamState<double>::kBeta1;
  doc["adam_beta2"] = AdamState<double>::kBeta2;
  doc["adam_epsilon"] = AdamState<double>::kEpsilon;
  doc["rng"] = "philox4x32-10";
  return doc.dump(2) + "\n";
}

}  // namespace spoofmeter
