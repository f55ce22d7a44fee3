#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eobkit {

/// Equality key for answer options: ASCII-lowercased, trimmed, internal
/// whitespace collapsed to one space, trailing periods removed.
std::string normalize_option(std::string_view text);

std::string trim(std::string_view text);

/// Replaces each `{Name}` placeholder found in `values` in a single pass.
/// Substituted text is never rescanned; unknown braces are left untouched.
std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

std::string sha256_hex(std::string_view data);
std::string base64_encode(std::span<const std::uint8_t> bytes);

/// FNV-1a, 64-bit. Stable across platforms, unlike std::hash.
std::uint64_t fnv1a64(std::string_view data);

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for per-item randomness derived from a global seed and an item key.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view key);
std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t index);

/// xoshiro256** seeded through splitmix64. Bounded draws use rejection
/// sampling, so sequences are identical on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t s_[4];
};

std::string read_text_file(const std::filesystem::path& path);
std::vector<std::uint8_t> read_binary_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
void write_text_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Runs fn(i) for i in [0, n) on at most max_workers threads.
/// The first exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t max_workers, const std::function<void(std::size_t)>& fn);

}  // namespace eobkit

namespace eobkit {

inline constexpr std::string_view kSchemaVersion = "1.0";

/// Provenance stamped on every stage artifact. JSONL artifacts carry it as
/// a leading `{"__meta__": {...}}` line that readers skip.
struct ArtifactMeta {
  std::string stage;
  std::string schema_version{kSchemaVersion};
  std::string config_hash;
  std::uint64_t seed = 0;

  std::string to_json_line() const;
  /// Returns true and fills `out` when `line` is a meta line.
  static bool parse_line(std::string_view line, ArtifactMeta* out = nullptr);
};

/// Splits JSONL text into nonblank lines, paired with 1-based line numbers.
std::vector<std::pair<std::size_t, std::string_view>> jsonl_lines(std::string_view text);

}  // namespace eobkit
