#include <gtest/gtest.h>

#include <sstream>

#include "eobkit/cli.hpp"
#include "eobkit/error.hpp"
#include "eobkit/mock_endpoints.hpp"
#include "eobkit/pipeline.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace eobkit;
using nlohmann::json;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "eobkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_subcommand(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

ModelEndpoint mock(const std::string& model) {
  ModelEndpoint e;
  e.base_url = "http://mock.invalid/v1";
  e.model_name = model;
  e.max_retries = 0;
  return e;
}

PipelineConfig fixture_config(const std::filesystem::path& work) {
  auto c = PipelineConfig::from_json_file(support::fixture_dir() / "pipeline.json");
  c.paths.work_dir = work;
  c.endpoints.captioner = mock("mock-captioner");
  c.endpoints.distractor = mock("mock-distractor");
  c.endpoints.evaluators = {mock("mock-vlm-1"), mock("mock-vlm-2")};
  c.mc_trials = 2000;
  return c;
}

TransportFactory in_process() {
  return [](const std::string& role) { return mock_transport(role); };
}

std::vector<std::string> records(const std::filesystem::path& p) {
  std::vector<std::string> out;
  const auto text = read_text_file(p);
  for (auto [row, line] : jsonl_lines(text)) {
    if (!ArtifactMeta::parse_line(line)) out.emplace_back(line);
  }
  return out;
}

}  // namespace

TEST(Config, ParsesFixtureAndResolvesPaths) {
  auto c = PipelineConfig::from_json_file(support::fixture_dir() / "pipeline.json");
  EXPECT_EQ(c.n_candidates, 128u);
  EXPECT_EQ(c.selector.m, 4u);
  EXPECT_EQ(c.frames, 8u);
  EXPECT_EQ(c.selector.strategy, SelectionStrategy::cluster_clip);
  EXPECT_EQ(c.paths.input, support::fixture_dir() / "annotations.jsonl");
  EXPECT_EQ(c.global_seed, 7u);
}

TEST(Config, RejectsBadValues) {
  auto expect_config_error = [](const std::string& text) {
    try {
      PipelineConfig::from_json_text(text, ".");
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ConfigError) << text;
    }
  };
  expect_config_error(R"({"N": 2, "m": 4})");
  expect_config_error(R"({"m": 4, "selector": {"m": 3}})");
  expect_config_error(R"({"unknown_key": 1})");
  expect_config_error(R"({"selector": {"strategy": "best"}})");
  expect_config_error("not json");
}

TEST(Config, HashIgnoresPathsButTracksSettings) {
  auto a = PipelineConfig::from_json_text(R"({"paths": {"work_dir": "a"}})", ".");
  auto b = PipelineConfig::from_json_text(R"({"paths": {"work_dir": "b"}})", ".");
  auto c = PipelineConfig::from_json_text(R"({"global_seed": 3})", ".");
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_NE(a.hash(), c.hash());
}

TEST(Pipeline, StagesOutOfOrderNameTheMissingArtifact) {
  support::TempDir dir;
  Pipeline p(fixture_config(dir.path()), in_process());
  try {
    p.select();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingArtifact);
    EXPECT_NE(std::string(e.what()).find("samples.jsonl"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("ingest"), std::string::npos);
  }
  p.ingest();
  try {
    p.distract();
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("caption"), std::string::npos);
  }
}

TEST(Pipeline, FullRunInProcess) {
  support::TempDir dir;
  Pipeline p(fixture_config(dir.path()), in_process());
  EXPECT_EQ(p.ingest().items, 6u);
  EXPECT_EQ(p.caption().items, 6u);
  p.distract();
  for (const auto& line : records(p.artifacts().candidates)) {
    EXPECT_EQ(candidate_set_from_json(line).candidates.size(), 128u);
  }
  p.select();
  p.rebuild();
  auto original = p.load_set("original");
  auto rebuilt = p.load_set("groundattack");
  ASSERT_EQ(rebuilt.samples.size(), original.samples.size());
  for (std::size_t i = 0; i < rebuilt.samples.size(); ++i) {
    EXPECT_EQ(rebuilt.samples[i].answer(), original.samples[i].answer());
    EXPECT_EQ(rebuilt.samples[i].options.size(), 5u);
  }
  p.evaluate("groundattack", {InputMode::VO, InputMode::VQO});
  EXPECT_EQ(records(p.artifacts().predictions("groundattack")).size(), 24u);
  auto report = p.audit("groundattack");
  EXPECT_EQ(report.n_samples, 6u);
  EXPECT_LE(report.total_eob_ratio, report.eob_ratio);
  EXPECT_TRUE(std::filesystem::exists(p.artifacts().reports_dir / "bias_groundattack.json"));
  p.report("groundattack");
  EXPECT_TRUE(std::filesystem::exists(p.artifacts().reports_dir / "accuracy_groundattack.txt"));

  ArtifactMeta meta;
  const auto selections_text = read_text_file(p.artifacts().selections);
  auto first_line = jsonl_lines(selections_text).front().second;
  ASSERT_TRUE(ArtifactMeta::parse_line(first_line, &meta));
  EXPECT_EQ(meta.stage, "select");
  EXPECT_EQ(meta.config_hash, p.config().hash());
  EXPECT_EQ(meta.seed, 7u);
}

TEST(Pipeline, RandomStrategyNeedsNoEmbeddings) {
  support::TempDir dir;
  auto c = fixture_config(dir.path());
  c.selector.strategy = SelectionStrategy::random;
  c.paths.text_embeddings.clear();
  c.paths.visual_embeddings.clear();
  Pipeline p(c, in_process());
  p.ingest();
  p.caption();
  p.distract();
  EXPECT_EQ(p.select().items, 6u);
}

TEST(Pipeline, MergedOriginalNegatives) {
  support::TempDir dir;
  auto c = fixture_config(dir.path());
  c.selector.include_original_negatives = true;
  c.selector.strategy = SelectionStrategy::random;
  Pipeline p(c, in_process());
  p.ingest();
  p.caption();
  p.distract();
  for (const auto& line : records(p.artifacts().candidates)) {
    auto cs = candidate_set_from_json(line);
    EXPECT_EQ(cs.source, CandidateSource::merged);
    EXPECT_GT(cs.candidates.size(), 128u);
  }
}

TEST(Pipeline, ShortDistractorFailsWithInsufficientCandidates) {
  support::TempDir dir;
  auto c = fixture_config(dir.path());
  c.endpoints.distractor = mock("mock-distractor-short");
  c.candidate_floor_fraction = 0.5;
  Pipeline p(c, in_process());
  p.ingest();
  p.caption();
  try {
    p.distract();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientCandidates);
  }
}

TEST(Pipeline, FailingEvaluatorWritesRecordsThenReports) {
  support::TempDir dir;
  auto c = fixture_config(dir.path());
  c.endpoints.evaluators = {mock("mock-vlm-1"), mock("mock-fail")};
  Pipeline p(c, in_process());
  p.ingest();
  try {
    p.evaluate("original", {InputMode::VO});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EndpointError);
  }
  EXPECT_EQ(records(p.artifacts().predictions("original")).size(), 6u);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  auto r = run_cli({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error: UsageError"), std::string::npos);
  EXPECT_NE(r.err.find("Subcommands"), std::string::npos);
  EXPECT_EQ(run_cli({}).code, 2);
}

TEST(Cli, McCheck) {
  auto r = run_cli({"mc-check", "--options", "5", "--models", "5", "--trials", "100000"});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("expected 0.67232"), std::string::npos);
  EXPECT_NE(r.out.find("within"), std::string::npos);
}

TEST(Cli, RuntimeErrorIsOneLine) {
  support::TempDir dir;
  auto r = run_cli({"rebuild", "--work-dir", dir.path().string()});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: MissingArtifact: ", 0), 0u);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, SelectClusterClipPicksFour) {
  support::TempDir dir;
  const auto cfg = (support::fixture_dir() / "pipeline.json").string();
  for (std::vector<std::string> stage : {std::vector<std::string>{"ingest"}, {"caption"}, {"distract"},
                                         {"select", "--strategy", "cluster-clip", "--m", "4", "--seed", "1"}}) {
    stage.insert(stage.end(), {"--config", cfg, "--work-dir", dir.path().string(), "--mock-endpoints"});
    auto r = run_cli(stage);
    ASSERT_EQ(r.code, 0) << stage[0] << ": " << r.err;
  }
  std::size_t n = 0;
  for (const auto& line : records(dir / "selections.jsonl")) {
    auto sel = selection_from_json(line);
    EXPECT_EQ(sel.chosen.size(), 4u);
    EXPECT_EQ(json::parse(line)["strategy"], "cluster_clip");
    ++n;
  }
  EXPECT_EQ(n, 6u);
}
