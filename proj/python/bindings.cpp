#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "eobkit/annotations.hpp"
#include "eobkit/bias_audit.hpp"
#include "eobkit/cli.hpp"
#include "eobkit/embedding_store.hpp"
#include "eobkit/error.hpp"
#include "eobkit/eval_harness.hpp"
#include "eobkit/selector.hpp"
#include "json.hpp"

namespace py = pybind11;
using namespace eobkit;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const FloatArray& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data.begin());
  return m;
}

std::vector<float> to_vector(const FloatArray& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-D array");
  return {a.data(), a.data() + a.size()};
}

FloatArray to_array(const std::vector<float>& v) {
  FloatArray out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

py::object json_to_py(const std::string& text) { return py::module_::import("json").attr("loads")(text); }

py::dict selection_dict(const Selection& s) {
  py::dict d;
  d["chosen"] = s.chosen;
  d["chosen_indices"] = s.chosen_indices;
  d["scores"] = s.scores;
  d["cluster_of"] = s.cluster_of ? py::cast(*s.cluster_of) : py::none();
  return d;
}

py::dict sample_dict(const Sample& s) {
  py::dict d;
  d["id"] = s.id;
  d["kind"] = std::string(to_string(s.visual.kind));
  d["uri"] = s.visual.uri;
  d["question"] = s.question;
  d["options"] = s.options;
  d["answer_index"] = s.answer_index;
  d["category"] = s.category;
  d["provenance"] = std::string(to_string(s.provenance));
  return d;
}

}  // namespace

PYBIND11_MODULE(_eobkit, m) {
  m.doc() = "Easy-options bias toolkit: bias audit, negative selection and annotation rebuilding";

  // The module keeps the exception type alive; the translator only borrows it.
  static PyObject* error_type = py::exception<Error>(m, "EobkitError").ptr();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error_type)(std::string(e.kind_name()) + ": " + e.what());
      exc.attr("kind") = std::string(e.kind_name());
      PyErr_SetObject(error_type, exc.ptr());
    }
  });

  m.attr("SCHEMA_VERSION") = std::string(kSchemaVersion);

  m.def("normalize_option", &normalize_option, py::arg("text"));

  m.def("expected_eob", &expected_eob, py::arg("options_count"), py::arg("n_models"), py::arg("lam") = 1);
  m.def(
      "simulate_random_models",
      [](int options, int models, std::uint64_t trials, std::uint64_t seed) {
        auto r = simulate_random_models(options, models, trials, seed);
        py::dict d;
        d["trials"] = r.trials;
        d["eob_hat"] = r.eob_hat;
        d["total_hat"] = r.total_hat;
        d["eob_stderr"] = r.eob_stderr;
        d["total_stderr"] = r.total_stderr;
        return d;
      },
      py::arg("options_count"), py::arg("n_models"), py::arg("trials"), py::arg("seed") = 0);
  m.def(
      "flag_sample",
      [](const std::vector<int>& chosen, std::size_t answer_index) {
        auto f = flag_sample(chosen, answer_index);
        return py::make_tuple(f.any, f.total);
      },
      py::arg("chosen_indices"), py::arg("answer_index"));
  m.def(
      "audit",
      [](const std::filesystem::path& predictions, const std::filesystem::path& samples,
         const std::vector<std::string>& models, int lam, std::uint64_t mc_trials, std::uint64_t mc_seed) {
        auto records = read_predictions(predictions);
        auto set = load_samples(samples, SampleFormat::canonical);
        AuditOptions opts{lam, mc_trials, mc_seed};
        return json_to_py(bias_report_json(eob_ratios(records, set, models, opts)));
      },
      py::arg("predictions"), py::arg("samples"), py::arg("models"), py::arg("lam") = 1,
      py::arg("mc_trials") = 100000, py::arg("mc_seed") = 0,
      "Bias report for a predictions JSONL file against a canonical annotation file.");

  m.def("l2_normalize", [](const FloatArray& v) { return to_array(l2_normalize(to_vector(v))); }, py::arg("v"));
  m.def("temporal_average_pool", [](const FloatArray& frames) { return to_array(temporal_average_pool(to_matrix(frames))); },
        py::arg("frames"));
  m.def(
      "similarity_scores",
      [](const FloatArray& text, const FloatArray& visual) {
        return similarity_scores(to_matrix(text), to_vector(visual));
      },
      py::arg("text_features"), py::arg("visual_feature"));
  m.def(
      "read_embedding_file",
      [](const std::filesystem::path& path) {
        py::list out;
        for (const auto& r : read_embedding_file(path)) out.append(py::make_tuple(r.id, to_array(r.vector)));
        return out;
      },
      py::arg("path"), "List of (id, float32 vector) pairs from an EMB1 file.");
  m.def(
      "write_embedding_file",
      [](const std::vector<std::pair<std::string, FloatArray>>& records, const std::filesystem::path& path) {
        std::vector<EmbeddingRecord> recs;
        for (const auto& [id, v] : records) recs.push_back({id, to_vector(v)});
        write_embedding_file(recs, path);
      },
      py::arg("records"), py::arg("path"));
  m.def("candidate_embedding_id", &candidate_embedding_id, py::arg("sample_id"), py::arg("index"));
  m.def("visual_embedding_id", &visual_embedding_id, py::arg("sample_id"));

  m.def("dedupe_candidates", [](const std::vector<std::string>& c, const std::string& answer) { return dedupe_candidates(c, answer); },
        py::arg("candidates"), py::arg("answer"));
  m.def(
      "select_random",
      [](const std::vector<std::string>& c, std::size_t m_, std::uint64_t seed) { return selection_dict(select_random(c, m_, seed)); },
      py::arg("candidates"), py::arg("m"), py::arg("seed"));
  m.def(
      "select_clip_topm",
      [](const std::vector<std::string>& c, const FloatArray& text, const FloatArray& visual, std::size_t m_) {
        return selection_dict(select_clip_topm(c, to_matrix(text), to_vector(visual), m_));
      },
      py::arg("candidates"), py::arg("text_features"), py::arg("visual_feature"), py::arg("m"));
  m.def(
      "select_cluster_clip",
      [](const std::vector<std::string>& c, const FloatArray& text, const FloatArray& visual, std::size_t m_,
         std::uint64_t seed, int max_iters, double tol) {
        return selection_dict(select_cluster_clip(c, to_matrix(text), to_vector(visual), m_, seed, {max_iters, tol}));
      },
      py::arg("candidates"), py::arg("text_features"), py::arg("visual_feature"), py::arg("m"), py::arg("seed"),
      py::arg("max_iters") = 100, py::arg("tol") = 1e-4);
  m.def(
      "kmeans",
      [](const FloatArray& points, std::size_t k, std::uint64_t seed, int max_iters, double tol) {
        auto r = kmeans(to_matrix(points), k, seed, {max_iters, tol});
        py::dict d;
        d["assignments"] = r.assignments;
        d["sse_history"] = r.sse_history;
        d["iterations"] = r.iterations;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("points"), py::arg("k"), py::arg("seed"), py::arg("max_iters") = 100, py::arg("tol") = 1e-4);

  m.def(
      "load_samples",
      [](const std::filesystem::path& path, const std::string& format) {
        py::list out;
        for (const auto& s : load_samples(path, parse_sample_format(format)).samples) out.append(sample_dict(s));
        return out;
      },
      py::arg("path"), py::arg("format") = "canonical");
  m.def(
      "replace_negatives",
      [](const std::filesystem::path& samples_path, const std::string& sample_id, const std::vector<std::string>& negatives,
         std::uint64_t seed) {
        auto set = load_samples(samples_path, SampleFormat::canonical);
        const Sample* s = set.find(sample_id);
        if (!s) fail(ErrorKind::UnknownSample, "no sample '" + sample_id + "'");
        auto r = replace_negatives(*s, negatives, seed);
        auto d = sample_dict(r.sample);
        d["permutation"] = r.permutation;
        return d;
      },
      py::arg("samples_path"), py::arg("sample_id"), py::arg("negatives"), py::arg("seed"));
  m.def(
      "extract_choice",
      [](const std::string& text, const std::vector<std::string>& options) { return extract_choice(text, options); },
      py::arg("text"), py::arg("options"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"eobkit"};
        full.insert(full.end(), args.begin(), args.end());
        std::vector<const char*> argv;
        for (const auto& a : full) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_subcommand(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs one CLI invocation; returns (exit_code, stdout, stderr).");
}
