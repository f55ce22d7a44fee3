// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "eobkit/bias_audit.hpp"
#include "eobkit/cli.hpp"
#include "eobkit/embedding_store.hpp"
#include "eobkit/error.hpp"
#include "eobkit/eval_harness.hpp"
#include "eobkit/pipeline.hpp"
#include "eobkit/selector.hpp"
#include "json.hpp"
#include "support.hpp"

using namespace eobkit;
using nlohmann::json;

namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

class Check {
 public:
  void require(bool cond, const std::string& what) {
    if (!cond && outcome_.ok) {
      outcome_.ok = false;
      outcome_.detail = what;
    }
  }
  Outcome done(const std::string& detail) {
    if (outcome_.ok) outcome_.detail = detail;
    return outcome_;
  }

 private:
  Outcome outcome_;
};

std::string fmt(double v, int digits = 5) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

int run_cli(std::vector<std::string> args, std::string* err_out = nullptr) {
  args.insert(args.begin(), "eobkit");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_subcommand(static_cast<int>(argv.size()), argv.data(), out, err);
  if (err_out) *err_out = err.str();
  return code;
}

std::vector<std::string> data_lines(const std::filesystem::path& p) {
  std::vector<std::string> out;
  const auto text = read_text_file(p);
  for (auto [row, line] : jsonl_lines(text)) {
    if (!ArtifactMeta::parse_line(line)) out.emplace_back(line);
  }
  return out;
}

Outcome random_guess_expectation() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  const double expected = expected_eob(5, 5, 1);
  c.require(std::abs(expected - 0.67232) < 1e-12, "expected_eob(5,5,1) = " + fmt(expected, 8));
  const std::uint64_t trials = 100000;
  auto mc = simulate_random_models(5, 5, trials, 2024);
  const double sigma_eob = std::sqrt(expected * (1 - expected) / trials);
  const double total_ref = std::pow(0.2, 5);
  const double sigma_total = std::sqrt(total_ref * (1 - total_ref) / trials);
  c.require(std::abs(mc.eob_hat - expected) <= 3 * sigma_eob, "eob_hat " + fmt(mc.eob_hat) + " outside 3 sigma");
  c.require(std::abs(mc.total_hat - total_ref) <= 3 * sigma_total,
            "total_hat " + fmt(mc.total_hat) + " outside 3 sigma of 0.00032");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.require(secs < 5.0, "runtime " + fmt(secs, 2) + " s");
  return c.done("expected " + fmt(expected) + ", mc eob " + fmt(mc.eob_hat) + " +/- " + fmt(3 * sigma_eob) +
                ", mc total " + fmt(mc.total_hat) + " +/- " + fmt(3 * sigma_total) + ", " + fmt(secs, 2) + " s");
}

Outcome clip_topm_oracle() {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(0xC11F);
  int mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(128), d = 1 + rng.below(64), m = 1 + rng.below(n);
    auto f = support::random_unit_rows(rng, n, d);
    auto v = support::random_unit(rng, d);
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += static_cast<double>(f.data[i * d + k]) * v[k];
      ranked.emplace_back(-dot, i);
    }
    std::sort(ranked.begin(), ranked.end());
    std::set<std::size_t> expected;
    for (std::size_t i = 0; i < m; ++i) expected.insert(ranked[i].second);
    auto sel = select_clip_topm(support::numbered_strings(n), f, v, m);
    if (std::set<std::size_t>(sel.chosen_indices.begin(), sel.chosen_indices.end()) != expected) ++mismatches;
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  c.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
  c.require(secs < 10.0, "runtime " + fmt(secs, 2) + " s");
  return c.done("200 instances, 0 mismatches, " + fmt(secs, 2) + " s");
}

Outcome cluster_clip_structure() {
  Check c;
  Rng rng(0xC1057);
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = 1 + rng.below(8);
    const std::size_t n = m + rng.below(129 - m);
    const std::size_t d = 2 + rng.below(63);
    auto f = support::random_unit_rows(rng, n, d);
    auto v = support::random_unit(rng, d);
    const auto seed = rng.next();
    auto sel = select_cluster_clip(support::numbered_strings(n), f, v, m, seed);
    auto km = kmeans(f, m, seed);
    const std::string where = "instance " + std::to_string(t) + ": ";
    if (!sel.cluster_of) {
      c.require(false, where + "no cluster assignment");
      break;
    }
    const auto& cl = *sel.cluster_of;
    c.require(cl == km.assignments, where + "cluster_of differs from kmeans");
    c.require(cl.size() == n, where + "assignment does not cover all candidates");
    std::set<std::size_t> labels(cl.begin(), cl.end());
    c.require(labels.size() == m && *labels.rbegin() == m - 1, where + "clusters do not partition into m groups");
    auto scores = similarity_scores(f, v);
    std::set<std::size_t> hit;
    for (auto pick : sel.chosen_indices) {
      hit.insert(cl[pick]);
      std::size_t best = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (cl[i] == cl[pick] && (best == n || scores[i] > scores[best])) best = i;
      }
      c.require(best == pick, where + "pick " + std::to_string(pick) + " is not its cluster's argmax");
    }
    c.require(hit.size() == m, where + "picks share a cluster");
    for (std::size_t i = 1; i < km.sse_history.size(); ++i) {
      c.require(km.sse_history[i] <= km.sse_history[i - 1] * (1 + 1e-12), where + "SSE increased");
    }
  }
  return c.done("100 instances: per-cluster argmax, partition, distinct clusters, SSE non-increasing");
}

Outcome bias_fixture() {
  Check c;
  support::TempDir dir;
  auto f = support::hand_built_bias_fixture();
  write_predictions(f.records, dir / "predictions.jsonl");
  auto records = read_predictions(dir / "predictions.jsonl");
  auto r = eob_ratios(records, f.samples, {"model-1", "model-2"});
  c.require(r.eob_ratio == 0.7, "eob_ratio " + fmt(r.eob_ratio));
  c.require(r.total_eob_ratio == 0.3, "total_eob_ratio " + fmt(r.total_eob_ratio));
  Rng rng(0xB1A5);
  int violations = 0;
  for (int t = 0; t < 1000; ++t) {
    SampleSet set;
    std::vector<PredictionRecord> recs;
    const int n_samples = 1 + static_cast<int>(rng.below(30));
    const int n_models = 1 + static_cast<int>(rng.below(6));
    std::vector<std::string> models;
    for (int m = 0; m < n_models; ++m) models.push_back("m" + std::to_string(m));
    for (int i = 0; i < n_samples; ++i) {
      const std::size_t n_opts = 2 + rng.below(6);
      auto id = "s" + std::to_string(i);
      set.samples.push_back(support::make_sample(id, support::numbered_strings(n_opts, "o"), rng.below(n_opts)));
      for (const auto& m : models) {
        recs.push_back({id, m, InputMode::VO, rng.below(5) == 0 ? kAbstain : static_cast<int>(rng.below(n_opts)), ""});
      }
    }
    AuditOptions opts;
    opts.mc_trials = 100;
    auto rr = eob_ratios(recs, set, models, opts);
    if (!(rr.total_eob_ratio <= rr.eob_ratio)) ++violations;
  }
  c.require(violations == 0, std::to_string(violations) + " random fixtures with total > eob");
  return c.done("eob 0.7, total 0.3; total <= eob on 1000 random fixtures");
}

struct MockRun {
  bool ok = false;
  std::string failure;
  double seconds = 0.0;
};

const std::vector<std::vector<std::string>> kStages = {
    {"ingest"},   {"caption"}, {"distract"}, {"select"}, {"rebuild"}, {"evaluate", "--set", "groundattack", "--mode", "both"},
    {"audit", "--set", "groundattack"}};

MockRun mock_run(const std::filesystem::path& work) {
  MockRun run;
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = (support::fixture_dir() / "pipeline.json").string();
  for (auto stage : kStages) {
    stage.insert(stage.end(), {"--config", cfg, "--work-dir", work.string(), "--mock-endpoints"});
    std::string err;
    if (run_cli(stage, &err) != 0) {
      run.failure = stage[0] + " failed: " + err;
      return run;
    }
  }
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.ok = true;
  return run;
}

Outcome end_to_end(const std::filesystem::path& work) {
  Check c;
  auto run = mock_run(work);
  if (!run.ok) {
    c.require(false, run.failure);
    return c.done("");
  }
  c.require(run.seconds < 60.0, "runtime " + fmt(run.seconds, 2) + " s");

  auto original = load_samples(work / "samples.jsonl", SampleFormat::canonical);
  auto rebuilt = load_samples(work / "groundattack.jsonl", SampleFormat::canonical);
  c.require(rebuilt.samples.size() == original.samples.size(), "sample count changed");

  std::size_t candidate_sets = 0;
  for (const auto& line : data_lines(work / "candidates.jsonl")) {
    auto cs = candidate_set_from_json(line);
    c.require(cs.candidates.size() == 128, cs.sample_id + ": " + std::to_string(cs.candidates.size()) + " candidates");
    ++candidate_sets;
  }
  c.require(candidate_sets == original.samples.size(), "candidate sets missing");

  std::map<std::string, Selection> selections;
  for (const auto& line : data_lines(work / "selections.jsonl")) {
    auto sel = selection_from_json(line);
    c.require(sel.chosen.size() == 4, sel.sample_id + ": selection size " + std::to_string(sel.chosen.size()));
    selections.emplace(sel.sample_id, sel);
  }

  for (std::size_t i = 0; i < original.samples.size() && i < rebuilt.samples.size(); ++i) {
    const auto& o = original.samples[i];
    const auto& r = rebuilt.samples[i];
    c.require(r.id == o.id && r.visual == o.visual && r.question == o.question && r.answer() == o.answer(),
              o.id + ": (visual, question, answer) not preserved");
    c.require(r.provenance == Provenance::groundattack, o.id + ": provenance not groundattack");
    auto negs = r.negatives();
    auto chosen = selections[o.id].chosen;
    std::sort(negs.begin(), negs.end());
    std::sort(chosen.begin(), chosen.end());
    c.require(negs.size() == 4 && negs == chosen, o.id + ": negatives are not the 4 selected candidates");
    for (const auto& n : negs) {
      for (const auto& old : o.negatives()) {
        c.require(normalize_option(n) != normalize_option(old), o.id + ": negative carried over from the original");
      }
    }
  }

  std::size_t vo_prompts = 0;
  const std::string vo_marker = "Select the option that best matches the visual content.";
  for (const auto& line : data_lines(work / "logs" / "requests.jsonl")) {
    auto j = json::parse(line);
    for (const auto& m : j["messages"]) {
      const auto text = m["text"].get<std::string>();
      if (text.rfind(vo_marker, 0) != 0) continue;
      ++vo_prompts;
      for (const auto& s : rebuilt.samples) c.require(text.find(s.question) == std::string::npos, "VO prompt contains a question");
    }
  }
  c.require(vo_prompts == 2 * rebuilt.samples.size(), "expected " + std::to_string(2 * rebuilt.samples.size()) +
                                                           " VO prompts, saw " + std::to_string(vo_prompts));
  auto predictions = data_lines(work / "predictions" / "groundattack.jsonl");
  c.require(predictions.size() == 4 * rebuilt.samples.size(), "prediction count " + std::to_string(predictions.size()));
  c.require(std::filesystem::exists(work / "reports" / "bias_groundattack.json"), "bias report missing");
  return c.done(std::to_string(rebuilt.samples.size()) + " samples, 128 candidates each, 4 new negatives, " +
                std::to_string(vo_prompts) + " VO prompts without questions, loopback mock only, " +
                fmt(run.seconds, 2) + " s");
}

Outcome determinism(const std::filesystem::path& first, const std::filesystem::path& second) {
  Check c;
  auto run = mock_run(second);
  if (!run.ok) {
    c.require(false, run.failure);
    return c.done("");
  }
  for (const char* name : {"selections.jsonl", "groundattack.jsonl", "permutations.jsonl", "candidates.jsonl"}) {
    c.require(read_text_file(first / name) == read_text_file(second / name), std::string(name) + " differs");
  }
  return c.done("selections, annotations, permutations and candidates byte-identical across two runs");
}

}  // namespace

int main() {
  support::TempDir dir;
  const auto first = dir / "run1";
  const auto second = dir / "run2";

  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"expected_eob_and_monte_carlo", random_guess_expectation},
      {"clip_topm_matches_full_sort_oracle", clip_topm_oracle},
      {"cluster_clip_structure", cluster_clip_structure},
      {"bias_audit_fixture", bias_fixture},
      {"end_to_end_mock_run", [&] { return end_to_end(first); }},
      {"determinism_two_mock_runs", [&] { return determinism(first, second); }},
  };
  int failed = 0;
  for (auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.ok) ++failed;
    std::cout << (o.ok ? "PASS " : "FAIL ") << name << " - " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
