#include "eobkit/cli.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "eobkit/bias_audit.hpp"
#include "eobkit/error.hpp"
#include "eobkit/mock_endpoints.hpp"
#include "eobkit/pipeline.hpp"

namespace eobkit {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct GlobalOptions {
  std::string config;
  std::string work_dir;
  bool mock = false;
  std::optional<std::uint64_t> seed;
};

struct StageOptions {
  std::string input;
  std::string format;
  std::string media_root;
  bool skip_invalid = false;
  std::optional<std::size_t> frames;
  std::optional<std::size_t> n;
  std::optional<double> floor;
  std::string strategy;
  std::optional<std::size_t> m;
  std::optional<std::uint64_t> selector_seed;
  std::string text_embeddings;
  std::string visual_embeddings;
  std::string set = "groundattack";
  std::string mode = "both";
  std::optional<int> lambda;
  std::optional<std::uint64_t> mc_trials;
};

struct McOptions {
  int options = 5;
  int models = 5;
  std::uint64_t trials = 100000;
  std::uint64_t seed = 0;
  int lambda = 1;
};

ModelEndpoint mock_endpoint(const std::string& model, double temperature) {
  ModelEndpoint e;
  e.model_name = model;
  e.temperature = temperature;
  e.max_retries = 0;
  e.timeout_s = 30;
  return e;
}

PipelineConfig build_config(const GlobalOptions& g, const StageOptions& s) {
  PipelineConfig c;
  if (!g.config.empty()) {
    c = PipelineConfig::from_json_file(g.config);
  }
  if (!g.work_dir.empty()) c.paths.work_dir = g.work_dir;
  if (g.seed) c.global_seed = *g.seed;
  if (!s.input.empty()) c.paths.input = s.input;
  if (!s.format.empty()) c.paths.input_format = parse_sample_format(s.format);
  if (!s.media_root.empty()) c.paths.media_root = s.media_root;
  if (s.skip_invalid) c.skip_invalid = true;
  if (s.frames) c.frames = *s.frames;
  if (s.n) c.n_candidates = *s.n;
  if (s.floor) c.candidate_floor_fraction = *s.floor;
  if (!s.strategy.empty()) c.selector.strategy = parse_strategy(s.strategy);
  if (s.m) c.selector.m = *s.m;
  if (s.selector_seed) c.selector.seed = *s.selector_seed;
  if (!s.text_embeddings.empty()) c.paths.text_embeddings = s.text_embeddings;
  if (!s.visual_embeddings.empty()) c.paths.visual_embeddings = s.visual_embeddings;
  if (s.lambda) c.lambda = *s.lambda;
  if (s.mc_trials) c.mc_trials = *s.mc_trials;
  if (g.mock) {
    if (!c.endpoints.captioner) c.endpoints.captioner = mock_endpoint("mock-captioner", 0.0);
    if (!c.endpoints.distractor) c.endpoints.distractor = mock_endpoint("mock-distractor", 0.7);
    if (c.endpoints.evaluators.empty()) {
      c.endpoints.evaluators = {mock_endpoint("mock-vlm-1", 0.0), mock_endpoint("mock-vlm-2", 0.0)};
    }
  }
  c.validate();
  return c;
}

void point_at_mock(PipelineConfig& c, const MockServer& server) {
  if (c.endpoints.captioner) c.endpoints.captioner->base_url = server.base_url("captioner");
  if (c.endpoints.distractor) c.endpoints.distractor->base_url = server.base_url("distractor");
  for (auto& e : c.endpoints.evaluators) e.base_url = server.base_url("evaluator");
}

std::vector<InputMode> parse_modes(const std::string& text) {
  if (text == "both") return {InputMode::VO, InputMode::VQO};
  return {parse_input_mode(text)};
}

void print_summary(std::ostream& out, const StageSummary& s) {
  out << s.stage << ": " << s.items << " item(s)";
  if (s.http_calls) out << ", " << s.http_calls << " request(s)";
  out << "\n";
  for (const auto& p : s.outputs) out << "  wrote " << p.string() << "\n";
}

std::string fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

int run_mc_check(const McOptions& o, std::ostream& out) {
  const double expected = expected_eob(o.options, o.models, o.lambda);
  const double total_ref = std::pow(1.0 / o.options, o.models);
  auto mc = simulate_random_models(o.options, o.models, o.trials, o.seed);
  const bool eob_ok = std::abs(mc.eob_hat - expected) <= 3.0 * mc.eob_stderr + 1e-12;
  const bool total_ok = std::abs(mc.total_hat - total_ref) <= 3.0 * mc.total_stderr + 1e-12;
  out << "options=" << o.options << " models=" << o.models << " lambda=" << o.lambda << " trials=" << mc.trials << "\n";
  out << "expected " << fixed(expected, 5) << "\n";
  out << "mc_eob " << fixed(mc.eob_hat, 5) << " +/- " << fixed(3.0 * mc.eob_stderr, 5) << " (3 sigma) "
      << (eob_ok ? "within" : "OUTSIDE") << "\n";
  out << "mc_total " << fixed(mc.total_hat, 5) << " +/- " << fixed(3.0 * mc.total_stderr, 5) << " (3 sigma) vs "
      << fixed(total_ref, 5) << " " << (total_ok ? "within" : "OUTSIDE") << "\n";
  return eob_ok && total_ok ? kExitOk : kExitRuntime;
}

std::string one_line(std::string text) {
  for (auto& c : text) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return text;
}

}  // namespace

int run_subcommand(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Easy-options bias audit and adversarial negative rebuilding", "eobkit"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  StageOptions s;
  McOptions mc;
  app.add_option("--config", g.config, "Pipeline config JSON");
  app.add_option("--work-dir", g.work_dir, "Artifact directory (overrides config)");
  app.add_flag("--mock-endpoints", g.mock, "Serve every model role from the bundled deterministic mock");
  app.add_option("--seed", g.seed, "Global seed");

  auto* ingest = app.add_subcommand("ingest", "Load and validate an annotation file");
  ingest->add_option("--input", s.input, "Annotation file");
  ingest->add_option("--format", s.format, "canonical | nextqa | mmstar");
  ingest->add_option("--media-root", s.media_root, "Directory visual URIs resolve against");
  ingest->add_flag("--skip-invalid", s.skip_invalid, "Drop rows that violate invariants instead of failing");

  auto* caption = app.add_subcommand("caption", "Describe each visual with the captioner");
  caption->add_option("--frames", s.frames, "Frames sampled per video");
  caption->add_option("--media-root", s.media_root, "Directory visual URIs resolve against");

  auto* distract = app.add_subcommand("distract", "Generate candidate negatives");
  distract->add_option("--N", s.n, "Candidates per sample");
  distract->add_option("--floor", s.floor, "Minimum usable fraction of N");

  auto* select = app.add_subcommand("select", "Pick m negatives per sample");
  select->add_option("--strategy", s.strategy, "random | clip_topm | cluster_clip");
  select->add_option("--m", s.m, "Negatives per sample");
  select->add_option("--seed", s.selector_seed, "Selector seed");
  select->add_option("--text-embeddings", s.text_embeddings, "EMB1 file with {sample_id}#cand{i} vectors");
  select->add_option("--visual-embeddings", s.visual_embeddings, "EMB1 file with {sample_id}#vis vectors");

  auto* rebuild = app.add_subcommand("rebuild", "Write the rebuilt annotation file");

  auto* evaluate = app.add_subcommand("evaluate", "Query the evaluator models");
  evaluate->add_option("--set", s.set, "original | groundattack");
  evaluate->add_option("--mode", s.mode, "VO | VQO | both");
  evaluate->add_option("--media-root", s.media_root, "Directory visual URIs resolve against");

  auto* audit = app.add_subcommand("audit", "Compute easy-options bias ratios");
  audit->add_option("--set", s.set, "original | groundattack");
  audit->add_option("--lambda", s.lambda, "Correct-model threshold");
  audit->add_option("--mc-trials", s.mc_trials, "Monte Carlo trials for the total-bias expectation");

  auto* report = app.add_subcommand("report", "Per-category accuracy tables");
  report->add_option("--set", s.set, "original | groundattack");

  auto* mc_check = app.add_subcommand("mc-check", "Compare the closed-form expectation with simulation");
  mc_check->add_option("--options", mc.options, "Options per sample");
  mc_check->add_option("--models", mc.models, "Number of models");
  mc_check->add_option("--trials", mc.trials, "Simulated samples");
  mc_check->add_option("--seed", mc.seed, "Simulation seed");
  mc_check->add_option("--lambda", mc.lambda, "Correct-model threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: UsageError: " << one_line(e.what()) << "\n" << app.help();
    return kExitUsage;
  }

  try {
    if (mc_check->parsed()) return run_mc_check(mc, out);

    auto config = build_config(g, s);
    std::unique_ptr<MockServer> server;
    TransportFactory transports = [](const std::string&) { return http_transport(); };
    if (g.mock) {
      server = std::make_unique<MockServer>();
      point_at_mock(config, *server);
    }
    Pipeline pipeline(config, transports);

    if (ingest->parsed()) {
      print_summary(out, pipeline.ingest());
    } else if (caption->parsed()) {
      print_summary(out, pipeline.caption());
    } else if (distract->parsed()) {
      print_summary(out, pipeline.distract());
    } else if (select->parsed()) {
      print_summary(out, pipeline.select());
    } else if (rebuild->parsed()) {
      print_summary(out, pipeline.rebuild());
    } else if (evaluate->parsed()) {
      print_summary(out, pipeline.evaluate(s.set, parse_modes(s.mode)));
    } else if (audit->parsed()) {
      auto r = pipeline.audit(s.set);
      out << bias_report_table(r);
      out << "  wrote " << (pipeline.artifacts().reports_dir / ("bias_" + s.set + ".json")).string() << "\n";
    } else if (report->parsed()) {
      print_summary(out, pipeline.report(s.set));
    }
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.kind_name() << ": " << one_line(e.what()) << "\n";
    return e.kind() == ErrorKind::UsageError ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: RuntimeError: " << one_line(e.what()) << "\n";
    return kExitRuntime;
  }
}

}  // namespace eobkit
