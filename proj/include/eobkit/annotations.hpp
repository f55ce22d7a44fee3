#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eobkit/util.hpp"

namespace eobkit {

enum class MediaKind { image, video };
enum class Provenance { original, groundattack };
enum class SampleFormat { canonical, nextqa, mmstar };

std::string_view to_string(MediaKind kind);
std::string_view to_string(Provenance provenance);
std::string_view to_string(SampleFormat format);
MediaKind parse_media_kind(std::string_view text);
Provenance parse_provenance(std::string_view text);
SampleFormat parse_sample_format(std::string_view text);

/// Option letters run A..Z, so no sample may carry more than 26 options.
inline constexpr std::size_t kMaxOptions = 26;

struct VisualRef {
  MediaKind kind = MediaKind::image;
  std::string uri;
  std::optional<int> frame_count_hint;

  bool operator==(const VisualRef&) const = default;
};

struct Sample {
  std::string id;
  VisualRef visual;
  std::string question;
  std::vector<std::string> options;
  std::size_t answer_index = 0;
  std::string category;
  Provenance provenance = Provenance::original;

  const std::string& answer() const { return options.at(answer_index); }
  /// Options other than the correct answer, in their current order.
  std::vector<std::string> negatives() const;

  bool operator==(const Sample&) const = default;
};

struct SampleSet {
  std::vector<Sample> samples;
  std::string source_name;
  std::string schema_version{kSchemaVersion};
  /// Rows rejected by a lenient load (see LoadOptions::skip_invalid).
  std::size_t dropped_rows = 0;

  const Sample* find(std::string_view id) const;
};

/// Throws InvariantViolation on the first broken Sample invariant.
void validate(const Sample& sample);
/// Validates every sample plus id uniqueness. Throws EmptySetError when empty.
void validate(const SampleSet& set);

struct LoadOptions {
  /// Prefix joined onto adapter-built media paths (NExT-QA video ids, MMStar image names).
  std::string media_root;
  /// Drop rows that violate Sample invariants instead of failing. The number
  /// dropped is logged to stderr and kept in SampleSet::dropped_rows.
  bool skip_invalid = false;
};

SampleSet load_samples(const std::filesystem::path& path, SampleFormat format,
                       const LoadOptions& options = {});
/// Parses canonical JSONL text; `source_name` is copied into the result.
SampleSet parse_canonical(std::string_view text, std::string source_name,
                          const LoadOptions& options = {});
SampleSet parse_nextqa_csv(std::string_view text, std::string source_name,
                           const LoadOptions& options = {});
SampleSet parse_mmstar(std::string_view text, std::string source_name,
                       const LoadOptions& options = {});

/// Canonical JSONL: one sample per line, keys in schema order, UTF-8 verbatim.
std::string serialize_samples(const SampleSet& set, const ArtifactMeta* meta = nullptr);
void write_samples(const SampleSet& set, const std::filesystem::path& path,
                   const ArtifactMeta* meta = nullptr);

/// Maps a NExT-QA question type code (CW, TN, DL, ...) to its category.
std::string nextqa_category(std::string_view type_code);
/// Maps an MMStar category name or abbreviation to CP/FP/IR/LR/ST/MA.
std::string mmstar_category(std::string_view name);

struct ReplaceResult {
  Sample sample;
  /// permutation[i] is the source slot of output option i: slot 0 is the
  /// correct answer, slot k >= 1 is new_negatives[k - 1].
  std::vector<std::size_t> permutation;
  std::uint64_t shuffle_seed = 0;
};

/// Swaps in new negatives while keeping visual, question, and answer string.
/// The shuffle seed is derive_seed(global_seed, sample.id).
ReplaceResult replace_negatives(const Sample& sample, std::span<const std::string> new_negatives,
                                std::uint64_t global_seed);

}  // namespace eobkit
