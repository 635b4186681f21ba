#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace semdist {

enum class Role : std::uint8_t {
  text = 0,
  real_image = 1,
  fake_image = 2,
  fake_caption = 3,
};

std::string_view to_string(Role role);

using RowMatrixXf = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMapXf = Eigen::Map<const RowMatrixXf>;

// Rows whose L2 norm is within this distance of 1 count as unit length.
inline constexpr double kUnitNormTolerance = 1e-3;

/// Immutable count x dim block of float32 embeddings tagged with the role of
/// the encoder output it holds. Construction rejects non-finite entries and
/// shape mismatches; the normalized flag is derived from the row norms.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix(Role role, std::size_t dim, std::size_t count, std::vector<float> data);

  // Build from a dense matrix (values are rounded to float32).
  static EmbeddingMatrix from_eigen(Role role, const Eigen::MatrixXd& rows);

  Role role() const noexcept { return role_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return count_; }
  bool normalized() const noexcept { return normalized_; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<const float> row(std::size_t i) const;
  float at(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }

  ConstRowMapXf as_eigen() const {
    return ConstRowMapXf(data_.data(), static_cast<Eigen::Index>(count_),
                         static_cast<Eigen::Index>(dim_));
  }

  // New matrix holding rows[indices[0]], rows[indices[1]], ... in that order.
  EmbeddingMatrix gather(std::span<const std::size_t> indices) const;

  EmbeddingMatrix with_role(Role role) const;

  friend bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b);

 private:
  Role role_;
  std::size_t dim_;
  std::size_t count_;
  std::vector<float> data_;
  bool normalized_ = false;
};

// EMB1 binary file: "EMB1", u16 version=1, u8 dtype=0 (f32 LE), u8 role,
// u32 dim, u64 count, then count*dim row-major float32 values. All integers
// little-endian.
inline constexpr std::size_t kEmbHeaderBytes = 4 + 2 + 1 + 1 + 4 + 8;

void write_emb(const EmbeddingMatrix& matrix, const std::filesystem::path& path);
EmbeddingMatrix read_emb(const std::filesystem::path& path);

// Scale every row to unit L2 norm. Rows already unit length to float
// precision are copied untouched, which makes the operation idempotent.
EmbeddingMatrix normalize_rows(const EmbeddingMatrix& matrix);

struct Record {
  std::size_t text = 0;
  std::size_t real = 0;
  std::size_t fake = 0;
  std::string image_id;
  std::string caption_id;

  friend bool operator==(const Record&, const Record&) = default;
};

/// Three embedding matrices bound row-by-row through a list of records. Each
/// record is one evaluation sample.
struct PairedDataset {
  EmbeddingMatrix text;
  EmbeddingMatrix real;
  EmbeddingMatrix fake;
  std::vector<Record> records;

  // Throws shape_mismatch / invalid_data if dims differ, an index is out of
  // range, or records is empty.
  void validate() const;

  std::size_t size() const noexcept { return records.size(); }

  // Per-record aligned copies: row i corresponds to records[i].
  EmbeddingMatrix aligned_text() const;
  EmbeddingMatrix aligned_real() const;
  EmbeddingMatrix aligned_fake() const;
};

// RecordManifest JSON: {"text_file", "real_file", "fake_file",
// "records": [[t, r, f, image_id, caption_id], ...]}. Relative paths resolve
// against the manifest's directory.
PairedDataset load_manifest(const std::filesystem::path& manifest_path);

// Writes the three matrices next to the manifest as <stem>.{text,real,fake}.emb
// and the manifest itself.
void save_dataset(const PairedDataset& dataset, const std::filesystem::path& manifest_path);

// Draws n records uniformly without replacement (records keep their original
// relative order) and restricts each matrix to the rows still referenced.
PairedDataset subsample(const PairedDataset& dataset, std::size_t n, std::uint64_t seed);

}  // namespace semdist
