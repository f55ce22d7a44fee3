#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace eobkit {

/// Row-major float matrix; rows are embeddings.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
  /// Throws DimMismatch if the rows disagree in length.
  static Matrix from_rows(const std::vector<std::vector<float>>& rows);

  std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

inline constexpr double kZeroNormEpsilon = 1e-12;
/// Rows fed to similarity scoring must have norm within 1 +/- this.
inline constexpr double kUnitNormTolerance = 1e-3;

std::vector<float> l2_normalize(std::span<const float> v);
/// Normalizes each frame, averages over frames, and re-normalizes the mean.
std::vector<float> temporal_average_pool(const Matrix& frames);
/// Cosine scores of each candidate row against the visual vector. Both
/// sides must already be unit-norm.
std::vector<double> similarity_scores(const Matrix& text_features, std::span<const float> visual_feature);

struct EmbeddingRecord {
  std::string id;
  std::vector<float> vector;

  bool operator==(const EmbeddingRecord&) const = default;
};

// EMB1 layout, little-endian throughout:
//   "EMB1" | u32 count | u32 dim | count x (u16 id_len | id bytes | dim x f32)
inline constexpr char kEmbeddingMagic[4] = {'E', 'M', 'B', '1'};

std::vector<std::uint8_t> encode_embeddings(std::span<const EmbeddingRecord> records);
std::vector<EmbeddingRecord> decode_embeddings(std::span<const std::uint8_t> bytes);
void write_embedding_file(std::span<const EmbeddingRecord> records, const std::filesystem::path& path);
std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path);

/// Sidecar `<file>.meta.json` naming the encoder checkpoint that produced a file.
void write_embedding_metadata(const std::filesystem::path& emb_path, const std::string& model_name);
std::optional<std::string> read_embedding_metadata(const std::filesystem::path& emb_path);

std::string candidate_embedding_id(std::string_view sample_id, std::size_t index);
std::string visual_embedding_id(std::string_view sample_id);

/// Id-indexed view over a loaded EMB1 file.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::vector<EmbeddingRecord> records);
  static EmbeddingTable load(const std::filesystem::path& path);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return records_.size(); }
  const std::vector<float>* find(std::string_view id) const;
  /// Throws MissingEmbedding naming the id.
  const std::vector<float>& at(std::string_view id) const;

 private:
  std::size_t dim_ = 0;
  std::vector<EmbeddingRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace eobkit
