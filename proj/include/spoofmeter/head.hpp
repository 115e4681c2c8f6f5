#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "spoofmeter/error.hpp"
#include "spoofmeter/records.hpp"
#include "spoofmeter/rng.hpp"

namespace spoofmeter {

/// MC-dropout classifier head: input D -> hidden H (ReLU) -> dropout -> 1 logit.
///
/// Parameters pack into one flat vector in the order w1 (row-major H x D),
/// b1, w2, b2. Gradients and optimizer state use the same layout.
template <typename Scalar>
struct MlpHead {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix w1;
  Vector b1;
  Vector w2;
  Scalar b2 = Scalar(0);
  Scalar dropout = Scalar(0);

  Eigen::Index input_dim() const { return w1.cols(); }
  Eigen::Index hidden_dim() const { return w1.rows(); }
  Eigen::Index param_count() const { return w1.size() + b1.size() + w2.size() + 1; }

  Vector pack() const {
    Vector out(param_count());
    out << Eigen::Map<const Vector>(w1.data(), w1.size()), b1, w2, b2;
    return out;
  }

  void unpack(const Vector& flat) {
    if (flat.size() != param_count()) throw InputError("MlpHead::unpack: size mismatch");
    const Eigen::Index n1 = w1.size();
    const Eigen::Index h = hidden_dim();
    Eigen::Map<Vector>(w1.data(), n1) = flat.head(n1);
    b1 = flat.segment(n1, h);
    w2 = flat.segment(n1 + h, h);
    b2 = flat[n1 + 2 * h];
  }

  void validate() const {
    if (w1.rows() < 1 || w1.cols() < 1) throw InputError("MlpHead: empty weight matrix");
    if (b1.size() != w1.rows() || w2.size() != w1.rows())
      throw InputError("MlpHead: bias/output widths disagree with hidden width");
    if (!(dropout >= Scalar(0) && dropout < Scalar(1)))
      throw InputError("MlpHead: dropout rate must lie in [0, 1)");
    if (!pack().allFinite()) throw InputError("MlpHead: non-finite parameter");
  }
};

/// Inverted-dropout mask: each entry is 0 or 1/(1-p), so E[entry] = 1.
template <typename Scalar>
struct DropoutMask {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> scale;
};

/// Draws one mask of width `width`, consuming exactly `width` uniforms.
template <typename Scalar>
DropoutMask<Scalar> draw_mask(Eigen::Index width, Scalar p, CounterRng& rng) {
  DropoutMask<Scalar> mask;
  mask.scale.resize(width);
  const Scalar kept = Scalar(1) / (Scalar(1) - p);
  const double keep_prob = 1.0 - static_cast<double>(p);
  for (Eigen::Index i = 0; i < width; ++i)
    mask.scale[i] = rng.bernoulli(keep_prob) ? kept : Scalar(0);
  return mask;
}

/// Fan-in scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.
MlpHead<double> init_head(Eigen::Index input_dim, Eigen::Index hidden_dim, double dropout,
                          std::uint64_t seed);

/// Logit for one input. A null mask means evaluation mode (no dropout).
template <typename Scalar, typename Derived>
Scalar forward(const MlpHead<Scalar>& head, const Eigen::MatrixBase<Derived>& x,
               const DropoutMask<Scalar>* mask = nullptr) {
  if (x.size() != head.input_dim())
    throw InputError("forward: input has " + std::to_string(x.size()) + " dims, head expects " +
                     std::to_string(head.input_dim()));
  typename MlpHead<Scalar>::Vector hidden = (head.w1 * x + head.b1).cwiseMax(Scalar(0));
  if (mask) {
    if (mask->scale.size() != head.hidden_dim())
      throw InputError("forward: mask width does not match hidden width");
    hidden = hidden.cwiseProduct(mask->scale);
  }
  return head.w2.dot(hidden) + head.b2;
}

template <typename Scalar>
struct McForward {
  Scalar mean_logit;
  std::vector<Scalar> samples;
};

/// S stochastic passes with fresh masks; consumes exactly S * H uniforms.
template <typename Scalar, typename Derived>
McForward<Scalar> mc_forward(const MlpHead<Scalar>& head, const Eigen::MatrixBase<Derived>& x,
                             std::size_t samples, CounterRng& rng) {
  if (samples < 1) throw InputError("mc_forward: need at least one sample");
  McForward<Scalar> out{Scalar(0), {}};
  out.samples.reserve(samples);
  for (std::size_t s = 0; s < samples; ++s) {
    const auto mask = draw_mask<Scalar>(head.hidden_dim(), head.dropout, rng);
    out.samples.push_back(forward(head, x, &mask));
    out.mean_logit += out.samples.back();
  }
  out.mean_logit /= static_cast<Scalar>(samples);
  return out;
}

template <typename Scalar>
Scalar sigmoid(Scalar z) {
  if (z >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-z));
  const Scalar e = std::exp(z);
  return e / (Scalar(1) + e);
}

/// Binary cross-entropy on a logit, max(z,0) - z*y + log1p(exp(-|z|)).
template <typename Scalar>
Scalar bce_loss(Scalar logit, Label label) {
  if (!std::isfinite(logit)) throw InvariantError("bce_loss: non-finite logit");
  const Scalar y = static_cast<Scalar>(to_int(label));
  return std::max(logit, Scalar(0)) - logit * y + std::log1p(std::exp(-std::abs(logit)));
}

/// How the S training-time samples of one example combine into its loss.
enum class LossMode {
  kAvgLogit,  ///< BCE of the mean logit.
  kAvgLoss,   ///< Mean of the per-sample BCE values.
};

std::string to_string(LossMode mode);
LossMode parse_loss_mode(std::string_view text);

template <typename Scalar>
struct Example {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  Label label;
};

template <typename Scalar>
struct LossAndGradient {
  Scalar loss;
  typename MlpHead<Scalar>::Vector gradient;  // packed layout
};

/// Mean loss over the batch and its gradient with respect to every packed
/// parameter. `masks[i]` holds the S masks applied to example i.
template <typename Scalar>
LossAndGradient<Scalar> backward(const MlpHead<Scalar>& head,
                                 std::span<const Example<Scalar>> batch,
                                 std::span<const std::vector<DropoutMask<Scalar>>> masks,
                                 LossMode mode) {
  using Vector = typename MlpHead<Scalar>::Vector;
  using Matrix = typename MlpHead<Scalar>::Matrix;
  if (batch.empty()) throw InputError("backward: empty batch");
  if (masks.size() != batch.size()) throw InputError("backward: one mask set per example");

  const Eigen::Index h = head.hidden_dim();
  Matrix g_w1 = Matrix::Zero(h, head.input_dim());
  Vector g_b1 = Vector::Zero(h);
  Vector g_w2 = Vector::Zero(h);
  Scalar g_b2 = Scalar(0);
  Scalar total = Scalar(0);

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& ex = batch[i];
    const auto& ex_masks = masks[i];
    if (ex_masks.empty()) throw InputError("backward: example without masks");
    if (ex.x.size() != head.input_dim()) throw InputError("backward: input dimension mismatch");
    const Scalar y = static_cast<Scalar>(to_int(ex.label));
    const auto s_count = static_cast<Scalar>(ex_masks.size());

    const Vector pre = head.w1 * ex.x + head.b1;
    const Vector relu = pre.cwiseMax(Scalar(0));
    std::vector<Scalar> logits;
    for (const auto& m : ex_masks) logits.push_back(forward(head, ex.x, &m));

    // d(loss_i)/d(logit_s) for each sample s.
    std::vector<Scalar> d_logit(ex_masks.size());
    if (mode == LossMode::kAvgLogit) {
      Scalar mean = Scalar(0);
      for (Scalar z : logits) mean += z;
      mean /= s_count;
      total += bce_loss(mean, ex.label);
      const Scalar d_mean = sigmoid(mean) - y;
      for (auto& d : d_logit) d = d_mean / s_count;
    } else {
      for (std::size_t s = 0; s < logits.size(); ++s) {
        total += bce_loss(logits[s], ex.label) / s_count;
        d_logit[s] = (sigmoid(logits[s]) - y) / s_count;
      }
    }

    for (std::size_t s = 0; s < ex_masks.size(); ++s) {
      const Vector& scale = ex_masks[s].scale;
      const Vector activation = relu.cwiseProduct(scale);
      g_w2 += d_logit[s] * activation;
      g_b2 += d_logit[s];
      const Vector d_pre =
          (d_logit[s] * head.w2.cwiseProduct(scale)).cwiseProduct(
              (pre.array() > Scalar(0)).matrix().template cast<Scalar>());
      g_w1 += d_pre * ex.x.transpose();
      g_b1 += d_pre;
    }
  }

  const auto n = static_cast<Scalar>(batch.size());
  LossAndGradient<Scalar> out;
  out.loss = total / n;
  out.gradient.resize(head.param_count());
  out.gradient << Eigen::Map<const Vector>(g_w1.data(), g_w1.size()) / n, g_b1 / n, g_w2 / n,
      g_b2 / n;
  return out;
}

/// Adam with bias correction and decoupled weight decay.
template <typename Scalar>
struct AdamState {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

  Vector m;
  Vector v;
  std::uint64_t step = 0;

  explicit AdamState(Eigen::Index size) : m(Vector::Zero(size)), v(Vector::Zero(size)) {}
};

/// params <- params * (1 - lr*wd), then one bias-corrected Adam update.
template <typename Scalar>
void adam_step(AdamState<Scalar>& state, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& params,
               const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& grads, Scalar lr, Scalar wd) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw InputError("adam_step: parameter, gradient and state shapes differ");
  const Scalar b1 = Scalar(AdamState<Scalar>::kBeta1);
  const Scalar b2 = Scalar(AdamState<Scalar>::kBeta2);
  const Scalar eps = Scalar(AdamState<Scalar>::kEpsilon);

  params *= Scalar(1) - lr * wd;
  ++state.step;
  state.m = b1 * state.m + (Scalar(1) - b1) * grads;
  state.v = b2 * state.v + (Scalar(1) - b2) * grads.cwiseAbs2();
  const auto t = static_cast<Scalar>(state.step);
  const Scalar m_corr = Scalar(1) - std::pow(b1, t);
  const Scalar v_corr = Scalar(1) - std::pow(b2, t);
  params.array() -=
      lr * (state.m.array() / m_corr) / ((state.v.array() / v_corr).sqrt() + eps);
}

// Training and inference over feature records --------------------------------

struct TrainConfig {
  double learning_rate = 1e-6;
  double weight_decay = 1e-6;
  std::size_t batch_size = 16;
  std::size_t epochs = 100;
  std::size_t train_samples = 10;
  std::size_t infer_samples = 3;
  std::uint64_t seed = 0;
  LossMode loss_mode = LossMode::kAvgLogit;

  void validate() const;
};

struct TrainResult {
  MlpHead<double> head;
  std::vector<double> loss_trace;  // mean example loss per epoch
};

/// Mini-batch Adam on the labeled feature records. Each example draws its
/// masks from a substream keyed by (seed, epoch, frame identity).
TrainResult train(const MlpHead<double>& head, std::span<const FrameRecord> data,
                  const TrainConfig& config);

/// Live probability of one frame: sigmoid of the mean of `samples` MC logits.
/// The masks come from a substream keyed by (seed, frame identity), so the
/// result does not depend on scoring order.
double score_frame(const MlpHead<double>& head, const FrameRecord& frame, std::size_t samples,
                   std::uint64_t seed);

/// Scores every frame of the feature groups; output keeps group order.
std::vector<FrameRecord> predict(const MlpHead<double>& head, std::span<const VideoGroup> groups,
                                 std::size_t samples, std::uint64_t seed);

/// Stable identity hash of a frame (dataset, video, frame index, learner).
std::uint64_t frame_stream(const FrameRecord& frame);

// Serialization: "FASH" | u32 version | u32 D | u32 H | f64 p | f64 params...
std::string format_head(const MlpHead<double>& head);
MlpHead<double> parse_head(std::string_view bytes);
void save_head(const MlpHead<double>& head, const std::filesystem::path& path);
MlpHead<double> load_head(const std::filesystem::path& path);

/// JSON sidecar recording the training configuration and fixed constants.
std::string format_head_sidecar(const MlpHead<double>& head, const TrainConfig& config);

}  // namespace spoofmeter
