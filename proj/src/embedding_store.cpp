#include "semdist/embedding_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "json.hpp"
#include "semdist/error.hpp"
#include "semdist/random.hpp"

namespace semdist {
namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {0x45, 0x4D, 0x42, 0x31};
constexpr std::uint16_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(u & 0xFF));
    u = static_cast<U>(u >> 8);
  }
}

template <typename T>
T get_le(const std::uint8_t* p) {
  std::make_unsigned_t<T> u = 0;
  for (std::size_t i = sizeof(T); i-- > 0;) {
    u = static_cast<std::make_unsigned_t<T>>((u << 8) | p[i]);
  }
  return static_cast<T>(u);
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
}

float get_f32(const std::uint8_t* p) { return std::bit_cast<float>(get_le<std::uint32_t>(p)); }

bool rows_are_unit(std::span<const float> data, std::size_t dim, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    double sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double v = data[i * dim + j];
      sq += v * v;
    }
    if (std::abs(std::sqrt(sq) - 1.0) > kUnitNormTolerance) return false;
  }
  return true;
}

std::string record_label(std::size_t i) { return "record " + std::to_string(i); }

std::string id_from_json(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer() || j.is_number_unsigned()) return std::to_string(j.get<long long>());
  throw Error(ErrorKind::parse_error, "manifest ids must be strings or integers");
}

}  // namespace

std::string_view to_string(Role role) {
  switch (role) {
    case Role::text: return "text";
    case Role::real_image: return "real_image";
    case Role::fake_image: return "fake_image";
    case Role::fake_caption: return "fake_caption";
  }
  return "unknown";
}

EmbeddingMatrix::EmbeddingMatrix(Role role, std::size_t dim, std::size_t count,
                                 std::vector<float> data)
    : role_(role), dim_(dim), count_(count), data_(std::move(data)) {
  if (dim_ == 0) throw Error(ErrorKind::invalid_data, "embedding dim must be positive");
  if (count_ > std::numeric_limits<std::size_t>::max() / dim_ || data_.size() != count_ * dim_) {
    throw Error(ErrorKind::shape_mismatch,
                "embedding data holds " + std::to_string(data_.size()) + " values, expected " +
                    std::to_string(count_) + "x" + std::to_string(dim_));
  }
  for (std::size_t k = 0; k < data_.size(); ++k) {
    if (!std::isfinite(data_[k])) {
      throw Error(ErrorKind::invalid_data, "non-finite entry at row " + std::to_string(k / dim_) +
                                               ", column " + std::to_string(k % dim_));
    }
  }
  normalized_ = rows_are_unit(data_, dim_, count_);
}

EmbeddingMatrix EmbeddingMatrix::from_eigen(Role role, const Eigen::MatrixXd& rows) {
  RowMatrixXf f = rows.cast<float>();
  std::vector<float> data(f.data(), f.data() + f.size());
  return EmbeddingMatrix(role, static_cast<std::size_t>(rows.cols()),
                         static_cast<std::size_t>(rows.rows()), std::move(data));
}

std::span<const float> EmbeddingMatrix::row(std::size_t i) const {
  if (i >= count_) {
    throw Error(ErrorKind::invalid_argument, "row " + std::to_string(i) + " out of range");
  }
  return std::span<const float>(data_).subspan(i * dim_, dim_);
}

EmbeddingMatrix EmbeddingMatrix::gather(std::span<const std::size_t> indices) const {
  std::vector<float> out;
  out.reserve(indices.size() * dim_);
  for (std::size_t idx : indices) {
    const auto r = row(idx);
    out.insert(out.end(), r.begin(), r.end());
  }
  return EmbeddingMatrix(role_, dim_, indices.size(), std::move(out));
}

EmbeddingMatrix EmbeddingMatrix::with_role(Role role) const {
  EmbeddingMatrix copy = *this;
  copy.role_ = role;
  return copy;
}

bool operator==(const EmbeddingMatrix& a, const EmbeddingMatrix& b) {
  if (a.role_ != b.role_ || a.dim_ != b.dim_ || a.count_ != b.count_) return false;
  // Bitwise comparison: round-trips must be exact, and -0.0 != 0.0 here.
  return a.data_.empty() ||
         std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0;
}

void write_emb(const EmbeddingMatrix& matrix, const std::filesystem::path& path) {
  for (float v : matrix.data()) {
    if (!std::isfinite(v)) throw Error(ErrorKind::invalid_data, "refusing to write non-finite entry");
  }
  if (matrix.dim() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorKind::invalid_data, "dim does not fit the EMB1 header");
  }

  std::vector<std::uint8_t> bytes;
  bytes.reserve(kEmbHeaderBytes + matrix.data().size() * sizeof(float));
  bytes.insert(bytes.end(), kMagic.begin(), kMagic.end());
  put_le<std::uint16_t>(bytes, kVersion);
  bytes.push_back(kDtypeF32);
  bytes.push_back(static_cast<std::uint8_t>(matrix.role()));
  put_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(matrix.dim()));
  put_le<std::uint64_t>(bytes, static_cast<std::uint64_t>(matrix.count()));
  for (float v : matrix.data()) put_f32(bytes, v);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io_error, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::io_error, "write failed for " + path.string());
}

EmbeddingMatrix read_emb(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw Error(ErrorKind::file_not_found, "embedding file not found: " + path.string());
  }
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error(ErrorKind::io_error, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(in.tellg()));
  in.seekg(0);
  if (!in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()))) {
    throw Error(ErrorKind::io_error, "read failed for " + path.string());
  }
  const std::string where = " (" + path.string() + ")";

  if (bytes.size() < kMagic.size()) throw Error(ErrorKind::truncated, "file shorter than magic" + where);
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw Error(ErrorKind::bad_magic, "bad magic, expected EMB1" + where);
  }
  if (bytes.size() < kEmbHeaderBytes) throw Error(ErrorKind::truncated, "truncated header" + where);

  const auto* p = bytes.data();
  const auto version = get_le<std::uint16_t>(p + 4);
  const std::uint8_t dtype = p[6];
  const std::uint8_t role = p[7];
  const auto dim = get_le<std::uint32_t>(p + 8);
  const auto count = get_le<std::uint64_t>(p + 12);

  if (version != kVersion) {
    throw Error(ErrorKind::unsupported_format, "unsupported EMB version " + std::to_string(version) + where);
  }
  if (dtype != kDtypeF32) {
    throw Error(ErrorKind::unsupported_format, "unsupported dtype " + std::to_string(dtype) + where);
  }
  if (role > static_cast<std::uint8_t>(Role::fake_caption)) {
    throw Error(ErrorKind::unsupported_format, "unknown role byte " + std::to_string(role) + where);
  }
  if (dim == 0) throw Error(ErrorKind::invalid_data, "dim must be positive" + where);

  const std::size_t available = (bytes.size() - kEmbHeaderBytes) / sizeof(float);
  if (count > available / dim) {
    throw Error(ErrorKind::truncated, "header declares " + std::to_string(count) + " rows of dim " +
                                          std::to_string(dim) + " but payload holds " +
                                          std::to_string(available / dim) + where);
  }
  const std::size_t n_values = static_cast<std::size_t>(count) * dim;
  if (bytes.size() != kEmbHeaderBytes + n_values * sizeof(float)) {
    throw Error(ErrorKind::invalid_data, "trailing bytes after payload" + where);
  }

  std::vector<float> data(n_values);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(data.data(), p + kEmbHeaderBytes, n_values * sizeof(float));
  } else {
    for (std::size_t k = 0; k < n_values; ++k) data[k] = get_f32(p + kEmbHeaderBytes + k * sizeof(float));
  }
  return EmbeddingMatrix(static_cast<Role>(role), dim, static_cast<std::size_t>(count), std::move(data));
}

EmbeddingMatrix normalize_rows(const EmbeddingMatrix& matrix) {
  const std::size_t dim = matrix.dim();
  std::vector<float> out(matrix.data().begin(), matrix.data().end());
  for (std::size_t i = 0; i < matrix.count(); ++i) {
    float* r = out.data() + i * dim;
    double sq = 0.0;
    for (std::size_t j = 0; j < dim; ++j) sq += static_cast<double>(r[j]) * r[j];
    if (sq == 0.0) throw Error(ErrorKind::invalid_data, "cannot normalize zero row " + std::to_string(i));
    const double norm = std::sqrt(sq);
    if (std::abs(norm - 1.0) <= 1e-6) continue;
    for (std::size_t j = 0; j < dim; ++j) r[j] = static_cast<float>(r[j] / norm);
  }
  return EmbeddingMatrix(matrix.role(), dim, matrix.count(), std::move(out));
}

void PairedDataset::validate() const {
  if (text.dim() != real.dim() || text.dim() != fake.dim()) {
    throw Error(ErrorKind::shape_mismatch, "text/real/fake dims differ: " + std::to_string(text.dim()) +
                                               "/" + std::to_string(real.dim()) + "/" +
                                               std::to_string(fake.dim()));
  }
  if (records.empty()) throw Error(ErrorKind::invalid_data, "dataset has no records");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Record& r = records[i];
    if (r.text >= text.count() || r.real >= real.count() || r.fake >= fake.count()) {
      throw Error(ErrorKind::invalid_data, record_label(i) + " has an out-of-range index");
    }
  }
}

namespace {
template <typename Member>
EmbeddingMatrix aligned(const EmbeddingMatrix& m, const std::vector<Record>& records, Member member) {
  std::vector<std::size_t> idx;
  idx.reserve(records.size());
  for (const Record& r : records) idx.push_back(r.*member);
  return m.gather(idx);
}
}  // namespace

EmbeddingMatrix PairedDataset::aligned_text() const { return aligned(text, records, &Record::text); }
EmbeddingMatrix PairedDataset::aligned_real() const { return aligned(real, records, &Record::real); }
EmbeddingMatrix PairedDataset::aligned_fake() const { return aligned(fake, records, &Record::fake); }

PairedDataset load_manifest(const std::filesystem::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorKind::file_not_found, "manifest not found: " + manifest_path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::parse_error, "manifest is not valid JSON: " + std::string(e.what()));
  }

  const auto base = manifest_path.parent_path();
  auto file_of = [&](const char* key) {
    if (!doc.contains(key) || !doc[key].is_string()) {
      throw Error(ErrorKind::parse_error, std::string("manifest missing string key '") + key + "'");
    }
    std::filesystem::path p = doc[key].get<std::string>();
    return p.is_absolute() ? p : base / p;
  };
  const auto text_path = file_of("text_file");
  const auto real_path = file_of("real_file");
  const auto fake_path = file_of("fake_file");

  if (!doc.contains("records") || !doc["records"].is_array()) {
    throw Error(ErrorKind::parse_error, "manifest missing 'records' array");
  }
  std::vector<Record> records;
  records.reserve(doc["records"].size());
  for (std::size_t i = 0; i < doc["records"].size(); ++i) {
    const auto& row = doc["records"][i];
    if (!row.is_array() || row.size() != 5 || !row[0].is_number_unsigned() ||
        !row[1].is_number_unsigned() || !row[2].is_number_unsigned()) {
      throw Error(ErrorKind::parse_error,
                  record_label(i) + " must be [text, real, fake, image_id, caption_id]");
    }
    records.push_back(Record{row[0].get<std::size_t>(), row[1].get<std::size_t>(),
                             row[2].get<std::size_t>(), id_from_json(row[3]), id_from_json(row[4])});
  }

  PairedDataset ds{read_emb(text_path), read_emb(real_path), read_emb(fake_path), std::move(records)};
  ds.validate();
  return ds;
}

void save_dataset(const PairedDataset& dataset, const std::filesystem::path& manifest_path) {
  const auto dir = manifest_path.parent_path();
  std::string stem = manifest_path.filename().string();
  if (auto pos = stem.find(".manifest.json"); pos != std::string::npos) {
    stem = stem.substr(0, pos);
  } else {
    stem = manifest_path.stem().string();
  }
  const std::string text_name = stem + ".text.emb";
  const std::string real_name = stem + ".real.emb";
  const std::string fake_name = stem + ".fake.emb";
  write_emb(dataset.text, dir / text_name);
  write_emb(dataset.real, dir / real_name);
  write_emb(dataset.fake, dir / fake_name);

  nlohmann::json doc;
  doc["text_file"] = text_name;
  doc["real_file"] = real_name;
  doc["fake_file"] = fake_name;
  doc["records"] = nlohmann::json::array();
  for (const Record& r : dataset.records) {
    doc["records"].push_back({r.text, r.real, r.fake, r.image_id, r.caption_id});
  }
  std::ofstream out(manifest_path);
  if (!out) throw Error(ErrorKind::io_error, "cannot write " + manifest_path.string());
  out << doc.dump(1) << '\n';
}

PairedDataset subsample(const PairedDataset& dataset, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorKind::invalid_argument, "subsample size must be positive");
  if (n > dataset.records.size()) {
    throw Error(ErrorKind::invalid_argument, "cannot draw " + std::to_string(n) + " of " +
                                                 std::to_string(dataset.records.size()) + " records");
  }
  std::vector<std::size_t> order(dataset.records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed);
  // Partial Fisher-Yates: the first n slots are a uniform draw without replacement.
  for (std::size_t i = 0; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, order.size() - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(n);
  std::sort(order.begin(), order.end());

  // Keep only referenced rows; remap indices in first-use order.
  struct Remap {
    std::unordered_map<std::size_t, std::size_t> index;
    std::vector<std::size_t> rows;
    std::size_t operator()(std::size_t old) {
      auto [it, inserted] = index.try_emplace(old, rows.size());
      if (inserted) rows.push_back(old);
      return it->second;
    }
  } text_map, real_map, fake_map;

  std::vector<Record> records;
  records.reserve(n);
  for (std::size_t k : order) {
    Record r = dataset.records[k];
    r.text = text_map(r.text);
    r.real = real_map(r.real);
    r.fake = fake_map(r.fake);
    records.push_back(std::move(r));
  }
  return PairedDataset{dataset.text.gather(text_map.rows), dataset.real.gather(real_map.rows),
                       dataset.fake.gather(fake_map.rows), std::move(records)};
}

}  // namespace semdist
