#include "spoofmeter/cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "spoofmeter/error.hpp"
#include "spoofmeter/fusion.hpp"
#include "spoofmeter/head.hpp"
#include "spoofmeter/ingest.hpp"
#include "spoofmeter/manifest.hpp"
#include "spoofmeter/metrics.hpp"
#include "spoofmeter/report.hpp"
#include "spoofmeter/synth.hpp"

namespace spoofmeter::cli {
namespace fs = std::filesystem;

ResolvedSeed resolve_seed(std::optional<std::uint64_t> flag,
                          std::optional<std::uint64_t> manifest_seed) {
  if (flag) return {*flag, "flag"};
  if (manifest_seed) return {*manifest_seed, "manifest"};
  if (const char* env = std::getenv("SPOOFMETER_SEED"); env && *env) {
    std::uint64_t value = 0;
    const char* end = env + std::char_traits<char>::length(env);
    const auto [ptr, ec] = std::from_chars(env, end, value);
    if (ec != std::errc() || ptr != end)
      throw InputError(std::string("SPOOFMETER_SEED is not an unsigned integer: ") + env);
    return {value, "env"};
  }
  return {0, "default"};
}

namespace {

std::optional<std::uint64_t> manifest_seed(const ProtocolManifest& m) {
  if (m.seed_defaulted) return std::nullopt;
  return m.seed;
}

fs::path sidecar_path(const fs::path& head_path) {
  return fs::path(head_path.string() + ".json");
}

std::vector<FrameRecord> select_datasets(std::span<const FrameRecord> records,
                                         const std::vector<std::string>& datasets) {
  std::vector<FrameRecord> out;
  for (const auto& r : records)
    if (std::find(datasets.begin(), datasets.end(), r.dataset_id) != datasets.end())
      out.push_back(r);
  return out;
}

void warn_short(std::span<const VideoGroup> groups, std::uint64_t frames_per_video,
                std::ostream& err) {
  for (const VideoGroup* g : short_videos(groups, frames_per_video))
    err << "warning: video " << g->dataset_id << "/" << g->video_id << " has "
        << g->frames.size() << " frames (protocol expects " << frames_per_video << ")\n";
}

struct GenSynthArgs {
  std::string out;
  std::string kind = "features";
  std::optional<std::uint64_t> seed;
  SynthConfig config;
};

struct TrainArgs {
  std::string features, meta, manifest, head;
  std::optional<std::uint64_t> seed;
  std::size_t hidden = 512;
  double dropout = 0.5;
  std::string loss_mode = "avg-logit";
  TrainConfig config;
};

struct PredictArgs {
  std::string features, meta, head, out, manifest, learner;
  std::optional<std::uint64_t> seed;
  std::size_t samples = 3;
};

struct FuseArgs {
  std::vector<std::string> scores;
  std::string fusion, manifest, out;
  std::optional<std::uint64_t> seed;
  std::size_t steps = 500;
  double lr = 1.0;
};

struct EvaluateArgs {
  std::string scores, manifest, out, head;
  std::optional<std::uint64_t> seed;
  std::optional<double> threshold;
};

struct ReportArgs {
  std::vector<std::string> reports;
  std::string out;
};

int gen_synth(const GenSynthArgs& a, std::ostream& out) {
  SynthConfig config = a.config;
  config.seed = resolve_seed(a.seed, std::nullopt).value;
  if (a.kind == "features") {
    write_synth_features(a.out, config, generate(config));
  } else if (a.kind == "scores") {
    write_synth_scores(a.out, config, generate_scores(config));
  } else {
    throw InputError("--kind must be features or scores");
  }
  out << "wrote synthetic " << a.kind << " to " << a.out << " (seed " << config.seed << ")\n";
  return kOk;
}

int train_head(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const ProtocolManifest manifest = load_manifest(a.manifest);
  TrainConfig config = a.config;
  config.seed = resolve_seed(a.seed, manifest_seed(manifest)).value;
  config.loss_mode = parse_loss_mode(a.loss_mode);

  const auto records = parse_features(a.meta, a.features);
  const auto train_records = select_datasets(records, manifest.train_datasets);
  if (train_records.empty())
    throw InputError("no feature rows from the train datasets of " + manifest.name);
  const auto groups = group_videos(train_records);
  warn_short(groups, manifest.frames_per_video, err);

  const auto dims = train_records.front().feature().size();
  const auto initial = init_head(dims, static_cast<Eigen::Index>(a.hidden), a.dropout, config.seed);
  const TrainResult result = train(initial, train_records, config);
  save_head(result.head, a.head);
  write_file(sidecar_path(a.head), format_head_sidecar(result.head, config));
  out << "trained head on " << train_records.size() << " frames, final epoch loss "
      << (result.loss_trace.empty() ? 0.0 : result.loss_trace.back()) << "\n";
  return kOk;
}

int predict_cmd(const PredictArgs& a, std::ostream& out) {
  std::optional<std::uint64_t> m_seed;
  if (!a.manifest.empty()) m_seed = manifest_seed(load_manifest(a.manifest));
  const std::uint64_t seed = resolve_seed(a.seed, m_seed).value;
  const MlpHead<double> head = load_head(a.head);
  auto records = parse_features(a.meta, a.features);
  if (!a.learner.empty())
    for (auto& r : records) r.learner_id = a.learner;
  const auto groups = group_videos(records);
  const auto scored = predict(head, groups, a.samples, seed);
  write_scores(scored, a.out);
  out << "scored " << scored.size() << " frames (S=" << a.samples << ", seed " << seed << ")\n";
  return kOk;
}

int fuse_cmd(const FuseArgs& a, std::ostream& out) {
  std::vector<FrameRecord> records;
  for (const auto& path : a.scores) {
    auto file_records = parse_scores(path);
    const std::string stem = fs::path(path).stem().string();
    for (auto& r : file_records) {
      if (!r.learner_id) r.learner_id = stem;
      records.push_back(std::move(r));
    }
  }

  FusionModel model;
  if (!a.manifest.empty()) {
    const ProtocolManifest manifest = load_manifest(a.manifest);
    const auto& fit_sets = manifest.fit_datasets.empty() ? manifest.train_datasets
                                                         : manifest.fit_datasets;
    const auto fit_records = select_datasets(records, fit_sets);
    if (fit_records.empty()) throw InputError("no scored frames from the fit split");
    FusionConfig config;
    config.steps = a.steps;
    config.learning_rate = a.lr;
    config.seed = resolve_seed(a.seed, manifest_seed(manifest)).value;
    const FusionFit fit = fit_weights(fit_records, config);
    write_file(a.fusion, format_fusion(fit));
    model = fit.model;
    out << "fitted fusion weights on " << fit.n_frames << " frames, BCE " << fit.initial_loss
        << " -> " << fit.final_loss << "\n";
  } else {
    model = load_fusion(a.fusion);
  }
  const auto fused = fuse_records(model, records);
  write_scores(fused, a.out);
  out << "fused " << fused.size() << " frames from " << model.learner_ids.size()
      << " learners\n";
  return kOk;
}

int evaluate_cmd(const EvaluateArgs& a, std::ostream& out, std::ostream& err) {
  ProtocolManifest manifest = load_manifest(a.manifest);
  const ResolvedSeed seed = resolve_seed(a.seed, manifest_seed(manifest));
  const auto groups = group_videos(parse_scores(a.scores));

  std::vector<VideoGroup> test_groups;
  for (const auto& g : groups)
    if (std::find(manifest.test_datasets.begin(), manifest.test_datasets.end(), g.dataset_id) !=
        manifest.test_datasets.end())
      test_groups.push_back(g);
  warn_short(test_groups, manifest.frames_per_video, err);

  const std::optional<std::uint64_t> original = manifest_seed(manifest);
  manifest.seed = seed.value;
  EvaluateOptions options;
  options.threshold = a.threshold;
  EvaluationReport report = evaluate(groups, manifest, options);
  report.provenance["seed_source"] = seed.source;
  report.provenance["manifest_seed"] = original ? std::to_string(*original) : "none";
  if (!a.head.empty()) {
    const auto doc = nlohmann::json::parse(read_file(sidecar_path(a.head)), nullptr, false);
    if (doc.is_discarded() || !doc.is_object())
      throw InputError("malformed head sidecar " + sidecar_path(a.head).string());
    for (const auto& [key, value] : doc.items())
      report.provenance["head." + key] = value.is_string() ? value.get<std::string>() : value.dump();
  }
  write_file(a.out, format_report(report));
  const std::vector<EvaluationReport> one = {report};
  out << format_report_table(one);
  return kOk;
}

int report_cmd(const ReportArgs& a, std::ostream& out) {
  std::vector<EvaluationReport> reports;
  for (const auto& path : a.reports) reports.push_back(load_report(path));
  out << format_report_table(reports);
  if (!a.out.empty()) write_file(a.out, format_report_csv(reports));
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Face anti-spoofing robustness toolkit", "spoofmeter"};
  app.require_subcommand(1, 1);

  GenSynthArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-synth", "generate a synthetic feature or score set");
  gen_cmd->add_option("--out", gen.out, "output directory")->required();
  gen_cmd->add_option("--kind", gen.kind, "features or scores");
  gen_cmd->add_option("--seed", gen.seed, "root seed");
  gen_cmd->add_option("--domains", gen.config.n_domains);
  gen_cmd->add_option("--videos", gen.config.videos_per_domain, "videos per domain");
  gen_cmd->add_option("--frames", gen.config.frames_per_video, "frames per video");
  gen_cmd->add_option("--dims", gen.config.feature_dim, "feature dimension");
  gen_cmd->add_option("--separation", gen.config.separation);
  gen_cmd->add_option("--domain-shift", gen.config.domain_shift);
  gen_cmd->add_option("--frame-noise", gen.config.frame_noise);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train-head", "train the MC-dropout head");
  train_cmd->add_option("--features", tr.features, "FASF feature blob")->required();
  train_cmd->add_option("--meta", tr.meta, "feature metadata JSONL")->required();
  train_cmd->add_option("--manifest", tr.manifest, "protocol manifest")->required();
  train_cmd->add_option("--head", tr.head, "output head file")->required();
  train_cmd->add_option("--seed", tr.seed);
  train_cmd->add_option("--samples", tr.config.train_samples, "training-time MC samples");
  train_cmd->add_option("--infer-samples", tr.config.infer_samples, "recorded inference samples");
  train_cmd->add_option("--loss-mode", tr.loss_mode, "avg-logit or avg-loss");
  train_cmd->add_option("--hidden", tr.hidden, "hidden width");
  train_cmd->add_option("--dropout", tr.dropout, "dropout rate");
  train_cmd->add_option("--lr", tr.config.learning_rate);
  train_cmd->add_option("--weight-decay", tr.config.weight_decay);
  train_cmd->add_option("--epochs", tr.config.epochs);
  train_cmd->add_option("--batch-size", tr.config.batch_size);

  PredictArgs pr;
  auto* predict_sub = app.add_subcommand("predict", "score feature frames with a trained head");
  predict_sub->add_option("--features", pr.features)->required();
  predict_sub->add_option("--meta", pr.meta)->required();
  predict_sub->add_option("--head", pr.head)->required();
  predict_sub->add_option("--out", pr.out, "output score JSONL")->required();
  predict_sub->add_option("--manifest", pr.manifest, "seed source");
  predict_sub->add_option("--samples", pr.samples, "inference-time MC samples");
  predict_sub->add_option("--seed", pr.seed);
  predict_sub->add_option("--learner", pr.learner, "learner id attached to each score");

  FuseArgs fu;
  auto* fuse_sub = app.add_subcommand("fuse", "fit and/or apply decision fusion");
  fuse_sub->add_option("--scores", fu.scores, "per-learner score files")->required();
  fuse_sub->add_option("--fusion", fu.fusion, "fusion model (written when fitting)")->required();
  fuse_sub->add_option("--manifest", fu.manifest, "fit on the manifest's fit (or train) split");
  fuse_sub->add_option("--out", fu.out, "fused score JSONL")->required();
  fuse_sub->add_option("--seed", fu.seed);
  fuse_sub->add_option("--steps", fu.steps);
  fuse_sub->add_option("--lr", fu.lr);

  EvaluateArgs ev;
  auto* eval_sub = app.add_subcommand("evaluate", "compute HTER, AUC, Bias and Variance");
  eval_sub->add_option("--scores", ev.scores)->required();
  eval_sub->add_option("--manifest", ev.manifest)->required();
  eval_sub->add_option("--out", ev.out, "report JSON")->required();
  eval_sub->add_option("--seed", ev.seed);
  eval_sub->add_option("--threshold", ev.threshold, "fixed threshold overriding the manifest");
  eval_sub->add_option("--head", ev.head, "head whose sidecar goes into provenance");

  ReportArgs rp;
  auto* report_sub = app.add_subcommand("report", "tabulate report files");
  report_sub->add_option("reports", rp.reports, "report JSON files");
  report_sub->add_option("--out", rp.out, "CSV output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }

  try {
    if (*gen_cmd) return gen_synth(gen, out);
    if (*train_cmd) return train_head(tr, out, err);
    if (*predict_sub) return predict_cmd(pr, out);
    if (*fuse_sub) return fuse_cmd(fu, out);
    if (*eval_sub) return evaluate_cmd(ev, out, err);
    if (*report_sub) return report_cmd(rp, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const InvariantError& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternalError;
  }
  return kInternalError;
}

}  // namespace spoofmeter::cli
