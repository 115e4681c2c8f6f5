// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "spoofmeter/cli.hpp"
#include "spoofmeter/fusion.hpp"
#include "spoofmeter/head.hpp"
#include "spoofmeter/ingest.hpp"
#include "spoofmeter/metrics.hpp"
#include "spoofmeter/report.hpp"
#include "spoofmeter/synth.hpp"

using namespace spoofmeter;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

Verdict table_bias() {
  const double probs[] = {0.79, 0.34, 0.84, 0.96};
  const double exact[] = {0.0441, 0.4356, 0.0256, 0.0016};
  const double shown[] = {0.044, 0.435, 0.025, 0.001};
  double worst = 0.0;
  bool ok = true;
  for (int i = 0; i < 4; ++i) {
    const double b = bias(std::vector<VideoOutcome>{{Label::kLive, probs[i]}});
    ok = ok && std::abs(b - exact[i]) < 1e-12;
    worst = std::max(worst, std::abs(b - shown[i]));
  }
  return {ok && worst <= 0.002, fmt("max |bias - table| = %.4f", worst)};
}

Verdict table_aggregation() {
  const std::vector<double> resnet = {0.97, 0.33, 0.52, 0.17, 0.98};
  const auto r = predict_video(resnet, 0.5);
  const auto v = predict_video(std::vector<double>{0.34}, 0.5);
  const bool ok = std::abs(r.video_prob - 0.594) < 1e-12 && r.decision == 1 && v.decision == 0;
  return {ok, fmt("five-frame mean %.3f -> %.0f, 0.34 -> %.0f", r.video_prob, static_cast<double>(r.decision), v.decision)};
}

Verdict auc_oracle() {
  std::mt19937_64 gen(101);
  double worst = 0.0;
  int done = 0;
  while (done < 500) {
    const int n = std::uniform_int_distribution<int>(2, 200)(gen);
    const int levels = std::uniform_int_distribution<int>(2, 40)(gen);  // coarse grid forces ties
    std::vector<double> scores(n);
    std::vector<Label> labels(n);
    for (int i = 0; i < n; ++i) {
      scores[i] = std::uniform_int_distribution<int>(0, levels)(gen) / static_cast<double>(levels);
      labels[i] = gen() % 2 ? Label::kLive : Label::kSpoof;
    }
    if (std::count(labels.begin(), labels.end(), Label::kLive) % n == 0) continue;
    worst = std::max(worst, std::abs(auc(roc_curve(scores, labels)) -
                                     oracle::mann_whitney_auc(scores, labels)));
    ++done;
  }
  return {worst <= 1e-12, fmt("500 instances, max |AUC - Mann-Whitney| = %.2e", worst)};
}

Verdict eer_hter() {
  std::mt19937_64 gen(202);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst_gap = 0.0;  // (|FAR - FRR|) * min(#live, #spoof)
  bool exact = true;
  for (int trial = 0; trial < 200; ++trial) {
    const int live = std::uniform_int_distribution<int>(1, 100)(gen);
    const int spoof = std::uniform_int_distribution<int>(1, 100)(gen);
    const double shift = unif(gen) * 0.5;
    std::vector<double> scores;
    std::vector<Label> labels;
    for (int i = 0; i < live; ++i) {
      scores.push_back(std::min(1.0, unif(gen) + shift));
      labels.push_back(Label::kLive);
    }
    for (int i = 0; i < spoof; ++i) {
      scores.push_back(unif(gen));
      labels.push_back(Label::kSpoof);
    }
    // Tie-free instances; a tied block can jump FAR and FRR by more than one step.
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      --trial;
      continue;
    }
    const auto e = eer_threshold(scores, labels);
    const auto h = hter(scores, labels, e.threshold);
    const auto c = oracle::confusion(scores, labels, e.threshold);
    exact = exact && h.hter == (h.far + h.frr) / 2.0 && h.far == c.far && h.frr == c.frr;
    worst_gap = std::max(worst_gap, std::abs(h.far - h.frr) * std::min(live, spoof));
  }
  return {exact && worst_gap <= 1.0 + 1e-12,
          fmt("200 instances, max |FAR-FRR|*min(n) = %.3f, HTER exact = %.0f", worst_gap, exact)};
}

Verdict variance_bound() {
  std::mt19937_64 gen(303);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = 0.0;
  for (int set = 0; set < 1000; ++set) {
    std::vector<std::vector<double>> videos(std::uniform_int_distribution<int>(1, 20)(gen));
    const bool extreme = set % 2 == 0;  // half the sets only use 0 and 1
    for (auto& v : videos) {
      v.resize(std::uniform_int_distribution<int>(1, 40)(gen));
      for (auto& p : v) p = extreme ? static_cast<double>(gen() % 2) : unif(gen);
    }
    worst = std::max(worst, variance(videos));
  }
  const double two_point = variance(std::vector<std::vector<double>>{{0.0, 1.0}});
  const double constant = variance(std::vector<std::vector<double>>{{0.3, 0.3, 0.3, 0.3}});
  return {worst <= 0.5 && two_point == 0.5 && constant == 0.0,
          fmt("max over 1000 sets %.6f, [0,1] -> %.3f, constant -> %.3f", worst, two_point,
              constant)};
}

MlpHead<double> random_head(std::mt19937_64& gen, Eigen::Index d, Eigen::Index h) {
  std::normal_distribution<double> normal(0.0, 1.0);
  MlpHead<double> head = init_head(d, h, 0.5, gen());
  Eigen::VectorXd p(head.param_count());
  for (auto& x : p) x = normal(gen);
  head.unpack(p);
  return head;
}

Verdict gradient_check() {
  std::mt19937_64 gen(404);
  std::normal_distribution<double> normal(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = std::uniform_int_distribution<Eigen::Index>(1, 16)(gen);
    const auto h = std::uniform_int_distribution<Eigen::Index>(1, 8)(gen);
    const auto head = random_head(gen, d, h);
    const LossMode mode = trial % 2 ? LossMode::kAvgLoss : LossMode::kAvgLogit;
    std::vector<Example<double>> batch;
    std::vector<std::vector<DropoutMask<double>>> masks;
    CounterRng rng(trial, 9);
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd x(d);
      for (auto& v : x) v = normal(gen);
      batch.push_back({x, i % 2 ? Label::kLive : Label::kSpoof});
      auto& m = masks.emplace_back();
      for (int s = 0; s < 3; ++s) m.push_back(draw_mask<double>(h, 0.5, rng));
    }
    const auto lg = backward<double>(head, batch, masks, mode);
    const Eigen::VectorXd numeric = oracle::central_difference(
        head, [&](const MlpHead<double>& probe) { return oracle::batch_loss(probe, batch, masks, mode); },
        1e-5);
    for (Eigen::Index k = 0; k < numeric.size(); ++k)
      worst = std::max(worst, oracle::relative_error(lg.gradient[k], numeric[k]));
  }
  return {worst < 1e-4, fmt("50 heads, max relative error %.2e", worst)};
}

Verdict dropout_unbiased() {
  const Eigen::Index width = 32;
  CounterRng rng(505, 1);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(width);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) sum += draw_mask<double>(width, 0.5, rng).scale;
  const double worst = (sum / draws - Eigen::VectorXd::Ones(width)).cwiseAbs().maxCoeff();
  return {worst <= 0.01, fmt("p=0.5, 1e5 draws, max |E[mask] - 1| = %.4f", worst)};
}

Verdict variance_reduction() {
  std::mt19937_64 gen(606);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto head = random_head(gen, 8, 8);
  Eigen::VectorXd x(8);
  for (auto& v : x) v = normal(gen);
  const int trials = 10000;
  auto sample_variance = [&](std::size_t samples, std::uint64_t stream) {
    CounterRng rng(606, stream);
    double mean = 0, m2 = 0;
    for (int t = 0; t < trials; ++t) {
      const double z = mc_forward(head, x, samples, rng).mean_logit;
      const double delta = z - mean;
      mean += delta / (t + 1);
      m2 += delta * (z - mean);
    }
    return m2 / (trials - 1);
  };
  const double single = sample_variance(1, 1);
  double worst = 0.0;
  for (std::size_t s : {2, 3, 10})
    worst = std::max(worst, std::abs(sample_variance(s, 10 + s) * static_cast<double>(s) / single - 1.0));
  return {single > 0.0 && worst <= 0.2, fmt("S in {2,3,10}, max |S var_S / var_1 - 1| = %.3f", worst)};
}

struct Run {
  int code;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "spoofmeter");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, err.str()};
}

// gen-synth -> train-head -> predict -> evaluate for every held-out domain.
std::vector<std::string> pipeline(const fs::path& dir, std::vector<EvaluationReport>& reports,
                                  std::string& failure) {
  const std::string d = dir.string();
  std::vector<std::string> bytes;
  if (auto r = cli({"gen-synth", "--out", d, "--seed", "42", "--domains", "4", "--separation", "10",
                    "--frame-noise", "0.3"});
      r.code != 0) {
    failure = "gen-synth: " + r.err;
    return bytes;
  }
  for (const char* held : {"A", "B", "C", "D"}) {
    const std::string m = d + "/loo_" + held + ".json";
    const std::string head = d + "/head_" + held + ".fash";
    const std::string scores = d + "/scores_" + held + ".jsonl";
    const std::string report = d + "/report_" + held + ".json";
    const std::vector<std::vector<std::string>> steps = {
        {"train-head", "--features", d + "/features.fasf", "--meta", d + "/features.meta.jsonl",
         "--manifest", m, "--head", head, "--hidden", "32", "--lr", "1e-3", "--epochs", "10",
         "--samples", "10"},
        {"predict", "--features", d + "/features.fasf", "--meta", d + "/features.meta.jsonl",
         "--head", head, "--manifest", m, "--samples", "3", "--out", scores},
        {"evaluate", "--scores", scores, "--manifest", m, "--head", head, "--out", report},
    };
    for (const auto& step : steps)
      if (auto r = cli(step); r.code != 0) {
        failure = step[0] + ": " + r.err;
        return bytes;
      }
    bytes.push_back(read_file(report));
    reports.push_back(parse_report(bytes.back()));
  }
  return bytes;
}

Verdict end_to_end() {
  const fs::path root = fs::temp_directory_path() / "spoofmeter_acceptance_e2e";
  fs::remove_all(root);
  std::vector<EvaluationReport> first_reports, second_reports;
  std::string failure;
  const auto first = pipeline(root / "run1", first_reports, failure);
  const auto second = failure.empty() ? pipeline(root / "run2", second_reports, failure)
                                      : std::vector<std::string>{};
  fs::remove_all(root);
  if (!failure.empty()) return {false, failure};
  double min_auc = 1.0, max_hter = 0.0;
  std::string names;
  for (const auto& r : first_reports) {
    min_auc = std::min(min_auc, r.auc);
    max_hter = std::max(max_hter, r.hter);
    names += (names.empty() ? "" : " ") + r.manifest_name;
  }
  const bool same = first == second && first.size() == 4;
  return {min_auc >= 0.99 && max_hter <= 0.02 && same,
          names + fmt(": min AUC %.4f, max HTER %.4f, reports identical = %.0f", min_auc, max_hter,
                      same)};
}

Verdict mc_robustness() {
  SynthConfig c;
  c.n_domains = 2;
  c.videos_per_domain = 60;
  c.frames_per_video = 16;
  c.feature_dim = 16;
  c.separation = 10.0;
  c.frame_noise = 0.3;
  c.seed = 42;
  TrainConfig config;
  config.learning_rate = 1e-3;
  config.epochs = 10;
  config.seed = 42;
  const auto head = train(init_head(16, 32, 0.5, 42), generate(c).records, config).head;
  c.seed = 43;
  const auto groups = group_videos(generate(c).records);
  auto spread = [&](std::size_t samples) {
    std::vector<std::vector<double>> frames;
    for (const auto& g : group_videos(predict(head, groups, samples, 99))) frames.push_back(g.scores());
    return variance(frames);
  };
  const double s1 = spread(1), s3 = spread(3);
  return {groups.size() >= 100 && s3 <= s1,
          fmt("%.0f videos, Variance S=1 %.5f, S=3 %.5f", static_cast<double>(groups.size()), s1, s3)};
}

Verdict fusion() {
  std::mt19937_64 gen(808);
  std::vector<FrameRecord> records;
  for (int v = 0; v < 40; ++v)
    for (int f = 0; f < 8; ++f) {
      const Label label = v % 2 ? Label::kLive : Label::kSpoof;
      for (const char* learner : {"perfect", "constant"}) {
        FrameRecord r;
        r.dataset_id = "F";
        r.video_id = "v" + std::to_string(v);
        r.frame_idx = static_cast<std::uint64_t>(f);
        r.label = label;
        r.learner_id = learner;
        r.payload = std::string(learner) == "perfect" ? (label == Label::kLive ? 1.0 : 0.0) : 0.5;
        records.push_back(r);
      }
    }
  std::shuffle(records.begin(), records.end(), gen);
  const auto fit = fit_weights(records);
  const auto& ids = fit.model.learner_ids;
  const auto at = std::find(ids.begin(), ids.end(), "perfect") - ids.begin();
  const double w = fit.model.weights()[at];
  // Uniform weights fuse every frame to 0.75 / 0.25.
  const double uniform_bce = -std::log(0.75);
  return {w >= 0.9 && fit.final_loss <= uniform_bce + 1e-12,
          fmt("perfect weight %.4f, fused BCE %.4f vs uniform %.4f", w, fit.final_loss, uniform_bce)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"reference-bias", table_bias},
      {"reference-aggregation", table_aggregation},
      {"auc-oracle", auc_oracle},
      {"eer-hter-consistency", eer_hter},
      {"variance-bound", variance_bound},
      {"gradient-check", gradient_check},
      {"dropout-unbiased", dropout_unbiased},
      {"variance-reduction-law", variance_reduction},
      {"end-to-end-dg", end_to_end},
      {"mc-dropout-robustness", mc_robustness},
      {"fusion", fusion},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %-24s %s (%.0f ms)\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(), ms);
    failures += !v.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
