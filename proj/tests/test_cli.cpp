#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "spoofmeter/cli.hpp"
#include "spoofmeter/error.hpp"
#include "spoofmeter/fusion.hpp"
#include "spoofmeter/ingest.hpp"
#include "spoofmeter/report.hpp"

using namespace spoofmeter;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "spoofmeter");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("spoofmeter_cli_" + std::string(info->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    unsetenv("SPOOFMETER_SEED");
  }
  void TearDown() override {
    fs::remove_all(dir_);
    unsetenv("SPOOFMETER_SEED");
  }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    write_file(dir_ / name, text);
    return path(name);
  }

  fs::path dir_;
};

FrameRecord frame(const std::string& dataset, const std::string& video, int idx, Label label,
                  double p, std::optional<std::string> learner = std::nullopt) {
  FrameRecord r;
  r.dataset_id = dataset;
  r.video_id = video;
  r.frame_idx = static_cast<std::uint64_t>(idx);
  r.label = label;
  r.payload = p;
  r.learner_id = std::move(learner);
  return r;
}

// Four videos of dataset O, two live and two spoof, three frames each.
std::string small_scores() {
  std::vector<FrameRecord> records;
  const double probs[4][3] = {{0.9, 0.8, 0.7}, {0.6, 0.7, 0.65}, {0.2, 0.1, 0.3}, {0.4, 0.5, 0.35}};
  for (int v = 0; v < 4; ++v)
    for (int f = 0; f < 3; ++f)
      records.push_back(frame("O", "v" + std::to_string(v), f, v < 2 ? Label::kLive : Label::kSpoof,
                              probs[v][f]));
  return format_scores(records);
}

const char* kManifest =
    R"({"name":"OCI->M","train":["C"],"test":["O"],"threshold_policy":"fixed:0.5","frames_per_video":3})";

}  // namespace

TEST_F(CliTest, EvaluateWritesReportAndTable) {
  const auto scores = write("scores.jsonl", small_scores());
  const auto manifest = write("m.json", kManifest);
  const auto r = run_cli({"evaluate", "--scores", scores, "--manifest", manifest, "--out",
                          path("report.json")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("OCI->M"), std::string::npos);
  const auto report = load_report(path("report.json"));
  EXPECT_EQ(report.auc, 1.0);
  EXPECT_EQ(report.hter, 0.0);
  EXPECT_EQ(report.n_videos, 4u);
  EXPECT_EQ(report.n_frames, 12u);
  EXPECT_EQ(report.seed, 0u);
  EXPECT_EQ(report.provenance.at("seed_source"), "default");
  EXPECT_EQ(report.provenance.at("manifest_seed"), "none");
}

TEST_F(CliTest, SingleClassIsAnInputError) {
  const auto scores = write("live.jsonl",
                            format_scores(std::vector<FrameRecord>{
                                frame("O", "a", 0, Label::kLive, 0.9),
                                frame("O", "b", 0, Label::kLive, 0.4)}));
  const auto manifest = write("m.json", kManifest);
  const auto r = run_cli({"evaluate", "--scores", scores, "--manifest", manifest, "--out",
                          path("report.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("AUC undefined"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("report.json")));
}

TEST_F(CliTest, BadInvocationsAreInputErrors) {
  EXPECT_EQ(run_cli({}).code, 1);
  EXPECT_EQ(run_cli({"evaluate", "--bogus"}).code, 1);
  EXPECT_EQ(run_cli({"frobnicate"}).code, 1);
  EXPECT_EQ(run_cli({"evaluate", "--scores", path("missing.jsonl"), "--manifest",
                     path("missing.json"), "--out", path("r.json")})
                .code,
            1);
  const auto bad = write("bad.jsonl", "{not json\n");
  const auto manifest = write("m.json", kManifest);
  const auto r = run_cli({"evaluate", "--scores", bad, "--manifest", manifest, "--out", path("r.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("line 1"), std::string::npos) << r.err;
  EXPECT_EQ(run_cli({"--help"}).code, 0);
}

TEST_F(CliTest, SeedPriority) {
  const auto scores = write("scores.jsonl", small_scores());
  const auto unseeded = write("m.json", kManifest);
  const auto seeded = write(
      "ms.json",
      R"({"name":"OCI->M","train":["C"],"test":["O"],"threshold_policy":"fixed:0.5","seed":11,"frames_per_video":3})");

  auto seed_of = [&](const std::string& manifest, std::vector<std::string> extra) {
    std::vector<std::string> args = {"evaluate", "--scores", scores, "--manifest", manifest,
                                     "--out", path("r.json")};
    args.insert(args.end(), extra.begin(), extra.end());
    const auto r = run_cli(args);
    EXPECT_EQ(r.code, 0) << r.err;
    const auto report = load_report(path("r.json"));
    return std::make_pair(report.seed, report.provenance.at("seed_source"));
  };

  EXPECT_EQ(seed_of(seeded, {}), std::make_pair(std::uint64_t{11}, std::string("manifest")));
  EXPECT_EQ(seed_of(seeded, {"--seed", "7"}), std::make_pair(std::uint64_t{7}, std::string("flag")));
  setenv("SPOOFMETER_SEED", "5", 1);
  EXPECT_EQ(seed_of(unseeded, {}), std::make_pair(std::uint64_t{5}, std::string("env")));
  EXPECT_EQ(seed_of(seeded, {}), std::make_pair(std::uint64_t{11}, std::string("manifest")));
  EXPECT_EQ(cli::resolve_seed(3, 4).source, "flag");
  setenv("SPOOFMETER_SEED", "abc", 1);
  EXPECT_THROW(cli::resolve_seed(std::nullopt, std::nullopt), InputError);
  unsetenv("SPOOFMETER_SEED");
  EXPECT_EQ(cli::resolve_seed(std::nullopt, std::nullopt).value, 0u);
}

TEST_F(CliTest, ThresholdOverride) {
  const auto scores = write("scores.jsonl", small_scores());
  const auto manifest = write("m.json", kManifest);
  const auto r = run_cli({"evaluate", "--scores", scores, "--manifest", manifest, "--out",
                          path("r.json"), "--threshold", "0.95"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = load_report(path("r.json"));
  EXPECT_EQ(report.threshold_used, 0.95);
  EXPECT_EQ(report.frr, 1.0);
  EXPECT_EQ(report.far, 0.0);
}

TEST_F(CliTest, ShortVideosWarn) {
  const auto scores = write("scores.jsonl", small_scores());
  const auto manifest = write(
      "m.json", R"({"name":"x","train":["C"],"test":["O"],"threshold_policy":"fixed:0.5","frames_per_video":8})");
  const auto r = run_cli({"evaluate", "--scores", scores, "--manifest", manifest, "--out", path("r.json")});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("warning"), std::string::npos);
}

TEST_F(CliTest, ReportTable) {
  const auto scores = write("scores.jsonl", small_scores());
  std::vector<std::string> files;
  for (const char* name : {"OCI->M", "OMI->C", "OCM->I", "ICM->O"}) {
    const std::string m = std::string(R"({"name":")") + name +
                          R"(","train":["C"],"test":["O"],"threshold_policy":"fixed:0.5"})";
    const std::string stem = std::to_string(files.size());
    const auto manifest = write("m" + stem + ".json", m);
    ASSERT_EQ(run_cli({"evaluate", "--scores", scores, "--manifest", manifest, "--out",
                       path("r" + stem + ".json")})
                  .code,
              0);
    files.push_back(path("r" + stem + ".json"));
  }

  auto one = run_cli({"report", files[0]});
  ASSERT_EQ(one.code, 0);
  EXPECT_EQ(one.out.find("Average"), std::string::npos);

  std::vector<std::string> args = {"report"};
  args.insert(args.end(), files.begin(), files.end());
  args.insert(args.end(), {"--out", path("all.csv")});
  const auto all = run_cli(args);
  ASSERT_EQ(all.code, 0) << all.err;
  EXPECT_NE(all.out.find("Average"), std::string::npos);
  for (const char* name : {"OCI->M", "OMI->C", "OCM->I", "ICM->O"})
    EXPECT_NE(all.out.find(name), std::string::npos);
  EXPECT_TRUE(fs::exists(path("all.csv")));

  const auto empty = run_cli({"report"});
  EXPECT_EQ(empty.code, 0);
  EXPECT_NE(empty.out.find("Protocol"), std::string::npos);
  EXPECT_EQ(empty.out.find("Average"), std::string::npos);
}

TEST_F(CliTest, FuseFitsThenApplies) {
  std::vector<FrameRecord> good, coin;
  for (const char* ds : {"F", "O"})
    for (int v = 0; v < 6; ++v)
      for (int f = 0; f < 3; ++f) {
        const Label label = v % 2 ? Label::kLive : Label::kSpoof;
        const std::string video = "v" + std::to_string(v);
        good.push_back(frame(ds, video, f, label, label == Label::kLive ? 0.95 : 0.05));
        coin.push_back(frame(ds, video, f, label, 0.5));
      }
  const auto a = write("good.jsonl", format_scores(good));
  const auto b = write("coin.jsonl", format_scores(coin));
  const auto manifest = write(
      "m.json", R"({"name":"F->O","train":["F"],"fit":["F"],"test":["O"],"threshold_policy":"fixed:0.5"})");

  auto fit = run_cli({"fuse", "--scores", a, "--scores", b, "--manifest", manifest, "--fusion",
                      path("fusion.json"), "--out", path("fused.jsonl")});
  ASSERT_EQ(fit.code, 0) << fit.err;
  const auto model = load_fusion(path("fusion.json"));
  ASSERT_EQ(model.learner_ids, (std::vector<std::string>{"coin", "good"}));
  EXPECT_GE(model.weights()[1], 0.9);

  auto apply = run_cli({"fuse", "--scores", a, "--scores", b, "--fusion", path("fusion.json"),
                        "--out", path("fused2.jsonl")});
  ASSERT_EQ(apply.code, 0) << apply.err;
  EXPECT_EQ(read_file(path("fused.jsonl")), read_file(path("fused2.jsonl")));
  EXPECT_EQ(parse_scores(path("fused.jsonl")).size(), 36u);

  auto eval = run_cli({"evaluate", "--scores", path("fused.jsonl"), "--manifest", manifest,
                       "--out", path("r.json")});
  ASSERT_EQ(eval.code, 0) << eval.err;
  EXPECT_EQ(load_report(path("r.json")).auc, 1.0);
}

TEST_F(CliTest, PipelineIsReproducible) {
  auto pipeline = [&](const std::string& tag) {
    const std::string d = path(tag);
    const std::vector<std::vector<std::string>> steps = {
        {"gen-synth", "--out", d, "--seed", "42", "--videos", "10", "--frames", "4", "--dims", "8"},
        {"train-head", "--features", d + "/features.fasf", "--meta", d + "/features.meta.jsonl",
         "--manifest", d + "/loo_D.json", "--head", d + "/head.fash", "--hidden", "16", "--lr",
         "1e-2", "--epochs", "3"},
        {"predict", "--features", d + "/features.fasf", "--meta", d + "/features.meta.jsonl",
         "--head", d + "/head.fash", "--manifest", d + "/loo_D.json", "--out", d + "/scores.jsonl"},
        {"evaluate", "--scores", d + "/scores.jsonl", "--manifest", d + "/loo_D.json", "--head",
         d + "/head.fash", "--out", d + "/report.json"},
    };
    for (const auto& step : steps) {
      const auto r = run_cli(step);
      EXPECT_EQ(r.code, 0) << step[0] << ": " << r.err;
    }
    return read_file(fs::path(d) / "report.json");
  };
  const std::string first = pipeline("a");
  const std::string second = pipeline("b");
  EXPECT_EQ(first, second);
  const auto report = parse_report(first);
  EXPECT_EQ(report.manifest_name, "ABC->D");
  EXPECT_EQ(report.seed, 42u);
  EXPECT_EQ(report.provenance.at("seed_source"), "manifest");
  EXPECT_TRUE(report.provenance.count("head.hidden_dim"));
}
