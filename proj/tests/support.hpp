#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "eobkit/annotations.hpp"
#include "eobkit/bias_audit.hpp"
#include "eobkit/embedding_store.hpp"
#include "eobkit/util.hpp"

namespace eobkit::support {

inline std::filesystem::path fixture_dir() { return EOBKIT_FIXTURE_DIR; }

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("eobkit_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::vector<float> random_unit(Rng& rng, std::size_t dim) {
  std::vector<float> v(dim);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (auto& x : v) {
      x = static_cast<float>(2.0 * rng.uniform01() - 1.0);
      norm += static_cast<double>(x) * x;
    }
  } while (norm < 1e-6);
  for (auto& x : v) x = static_cast<float>(x / std::sqrt(norm));
  return v;
}

inline Matrix random_unit_rows(Rng& rng, std::size_t rows, std::size_t dim) {
  Matrix m(rows, dim);
  for (std::size_t i = 0; i < rows; ++i) {
    auto v = random_unit(rng, dim);
    std::copy(v.begin(), v.end(), m.row(i).begin());
  }
  return m;
}

inline std::vector<std::string> numbered_strings(std::size_t n, const std::string& prefix = "candidate ") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

inline Sample make_sample(std::string id, std::vector<std::string> options, std::size_t answer_index,
                          std::string category = "causal", MediaKind kind = MediaKind::image) {
  Sample s;
  s.id = std::move(id);
  s.visual.kind = kind;
  s.visual.uri = kind == MediaKind::image ? "images/x.png" : "videos/x";
  s.question = "what happens in " + s.id + "?";
  s.options = std::move(options);
  s.answer_index = answer_index;
  s.category = std::move(category);
  return s;
}

// Ten five-option samples answered by two models under VO: samples 0-2 both
// right, 3-6 exactly one right, 7-9 both wrong.
struct BiasFixture {
  SampleSet samples;
  std::vector<PredictionRecord> records;
};

inline BiasFixture hand_built_bias_fixture() {
  BiasFixture f;
  f.samples.source_name = "hand";
  for (int i = 0; i < 10; ++i) {
    auto id = "s" + std::to_string(i);
    f.samples.samples.push_back(make_sample(id, {"right", "w1", "w2", "w3", "w4"}, 0));
    const bool m1 = i < 3 || i == 3 || i == 4;
    const bool m2 = i < 3 || i == 5 || i == 6;
    f.records.push_back({id, "model-1", InputMode::VO, m1 ? 0 : 1 + i % 4, ""});
    f.records.push_back({id, "model-2", InputMode::VO, m2 ? 0 : (i == 9 ? kAbstain : 2), ""});
    f.records.push_back({id, "model-1", InputMode::VQO, 0, ""});
  }
  return f;
}

}  // namespace eobkit::support
