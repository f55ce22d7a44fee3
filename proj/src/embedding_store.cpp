#include "eobkit/embedding_store.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "eobkit/error.hpp"
#include "eobkit/util.hpp"
#include "json.hpp"

namespace eobkit {

Matrix Matrix::from_rows(const std::vector<std::vector<float>>& rows) {
  if (rows.empty()) return {};
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols) {
      fail(ErrorKind::DimMismatch, "row " + std::to_string(i) + " has dimension " + std::to_string(rows[i].size()) +
                                       ", expected " + std::to_string(m.cols));
    }
    std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  }
  return m;
}

namespace {

double norm2(std::span<const float> v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * x;
  return std::sqrt(sum);
}

void require_finite(std::span<const float> v, const std::string& what) {
  for (float x : v) {
    if (!std::isfinite(x)) fail(ErrorKind::NonFinite, what + " contains NaN or Inf");
  }
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size()) {
      fail(ErrorKind::TruncatedFile, std::string("EMB1 file ends inside ") + what);
    }
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32(const char* what) {
    std::uint32_t bits = u32(what);
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
  }
  std::string str(std::size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<float> l2_normalize(std::span<const float> v) {
  require_finite(v, "vector");
  const double n = norm2(v);
  if (!(n > kZeroNormEpsilon)) fail(ErrorKind::ZeroVector, "cannot normalize a zero vector");
  std::vector<float> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
  return out;
}

std::vector<float> temporal_average_pool(const Matrix& frames) {
  if (frames.rows == 0) fail(ErrorKind::EmptyFrames, "no frames to pool");
  if (frames.cols == 0) fail(ErrorKind::DimMismatch, "frames have dimension 0");
  if (frames.data.size() != frames.rows * frames.cols) fail(ErrorKind::DimMismatch, "frame matrix is ragged");
  std::vector<double> mean(frames.cols, 0.0);
  for (std::size_t f = 0; f < frames.rows; ++f) {
    auto unit = l2_normalize(frames.row(f));
    for (std::size_t d = 0; d < frames.cols; ++d) mean[d] += unit[d];
  }
  std::vector<float> pooled(frames.cols);
  for (std::size_t d = 0; d < frames.cols; ++d) pooled[d] = static_cast<float>(mean[d] / static_cast<double>(frames.rows));
  return l2_normalize(pooled);
}

std::vector<double> similarity_scores(const Matrix& text_features, std::span<const float> visual_feature) {
  if (text_features.cols != visual_feature.size()) {
    fail(ErrorKind::DimMismatch, "text features have dimension " + std::to_string(text_features.cols) +
                                     ", visual feature " + std::to_string(visual_feature.size()));
  }
  auto check_unit = [](std::span<const float> v, const std::string& what) {
    require_finite(v, what);
    double n = norm2(v);
    if (std::abs(n - 1.0) > kUnitNormTolerance) {
      fail(ErrorKind::NotNormalized, what + " has norm " + std::to_string(n));
    }
  };
  check_unit(visual_feature, "visual feature");
  std::vector<double> scores(text_features.rows);
  for (std::size_t i = 0; i < text_features.rows; ++i) {
    auto row = text_features.row(i);
    check_unit(row, "text feature row " + std::to_string(i));
    double dot = 0.0;
    for (std::size_t d = 0; d < row.size(); ++d) dot += static_cast<double>(row[d]) * visual_feature[d];
    scores[i] = dot;
  }
  return scores;
}

std::vector<std::uint8_t> encode_embeddings(std::span<const EmbeddingRecord> records) {
  if (records.empty()) fail(ErrorKind::DimMismatch, "cannot encode an empty embedding set (dim unknown)");
  const std::size_t dim = records.front().vector.size();
  if (dim == 0) fail(ErrorKind::DimMismatch, "embedding dimension must be > 0");
  std::vector<std::uint8_t> out(kEmbeddingMagic, kEmbeddingMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(records.size()));
  put_u32(out, static_cast<std::uint32_t>(dim));
  for (const auto& r : records) {
    if (r.vector.size() != dim) {
      fail(ErrorKind::DimMismatch, "record '" + r.id + "' has dimension " + std::to_string(r.vector.size()) +
                                       ", file dimension is " + std::to_string(dim));
    }
    if (r.id.size() > 0xFFFF) fail(ErrorKind::DimMismatch, "record id longer than 65535 bytes");
    require_finite(r.vector, "record '" + r.id + "'");
    put_u16(out, static_cast<std::uint16_t>(r.id.size()));
    out.insert(out.end(), r.id.begin(), r.id.end());
    for (float f : r.vector) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof bits);
      put_u32(out, bits);
    }
  }
  return out;
}

std::vector<EmbeddingRecord> decode_embeddings(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kEmbeddingMagic, 4) != 0) {
    fail(ErrorKind::BadMagic, "not an EMB1 file");
  }
  Reader in(bytes.subspan(4));
  const std::uint32_t count = in.u32("header");
  const std::uint32_t dim = in.u32("header");
  if (dim == 0) fail(ErrorKind::DimMismatch, "EMB1 header declares dimension 0");
  std::vector<EmbeddingRecord> records;
  records.reserve(std::min<std::uint32_t>(count, 1u << 20));
  for (std::uint32_t i = 0; i < count; ++i) {
    EmbeddingRecord r;
    r.id = in.str(in.u16("record id length"), "record id");
    r.vector.resize(dim);
    for (auto& f : r.vector) f = in.f32("record vector");
    require_finite(r.vector, "record '" + r.id + "'");
    records.push_back(std::move(r));
  }
  if (!in.at_end()) fail(ErrorKind::DimMismatch, "EMB1 file has trailing bytes after " + std::to_string(count) + " records");
  return records;
}

void write_embedding_file(std::span<const EmbeddingRecord> records, const std::filesystem::path& path) {
  auto bytes = encode_embeddings(records);
  write_text_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

std::vector<EmbeddingRecord> read_embedding_file(const std::filesystem::path& path) {
  return decode_embeddings(read_binary_file(path));
}

namespace {
std::filesystem::path sidecar_path(const std::filesystem::path& emb_path) {
  auto p = emb_path;
  p += ".meta.json";
  return p;
}
}  // namespace

void write_embedding_metadata(const std::filesystem::path& emb_path, const std::string& model_name) {
  nlohmann::ordered_json j;
  j["model"] = model_name;
  write_text_file_atomic(sidecar_path(emb_path), j.dump() + "\n");
}

std::optional<std::string> read_embedding_metadata(const std::filesystem::path& emb_path) {
  auto p = sidecar_path(emb_path);
  if (!std::filesystem::exists(p)) return std::nullopt;
  auto j = nlohmann::json::parse(read_text_file(p), nullptr, false);
  if (j.is_discarded() || !j.contains("model") || !j["model"].is_string()) return std::nullopt;
  return j["model"].get<std::string>();
}

std::string candidate_embedding_id(std::string_view sample_id, std::size_t index) {
  return std::string(sample_id) + "#cand" + std::to_string(index);
}

std::string visual_embedding_id(std::string_view sample_id) { return std::string(sample_id) + "#vis"; }

EmbeddingTable::EmbeddingTable(std::vector<EmbeddingRecord> records) : records_(std::move(records)) {
  if (!records_.empty()) dim_ = records_.front().vector.size();
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].vector.size() != dim_) fail(ErrorKind::DimMismatch, "record '" + records_[i].id + "' dimension differs");
    index_.emplace(records_[i].id, i);
  }
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) fail(ErrorKind::MissingArtifact, "embedding file " + path.string() + " not found");
  return EmbeddingTable(read_embedding_file(path));
}

const std::vector<float>* EmbeddingTable::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &records_[it->second].vector;
}

const std::vector<float>& EmbeddingTable::at(std::string_view id) const {
  auto* v = find(id);
  if (!v) fail(ErrorKind::MissingEmbedding, "no embedding for id '" + std::string(id) + "'");
  return *v;
}

}  // namespace eobkit
