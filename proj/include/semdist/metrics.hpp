#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "semdist/embedding_store.hpp"
#include "semdist/gaussian_stats.hpp"

namespace semdist {

enum class TrsvMode { diag, full };

std::string_view to_string(TrsvMode mode);
TrsvMode parse_trsv_mode(std::string_view text);

struct MetricConfig {
  double ridge_scale = 1e-6;
  double omega = 2.5;    // CLIPScore weight
  double scale = 100.0;  // reporting multiplier
  TrsvMode trsv_mode = TrsvMode::diag;
  std::uint64_t seed = 0;
  std::size_t distractors = 99;
};

// Metric names used as report keys.
namespace metric {
inline constexpr std::string_view kSsd = "SSD";
inline constexpr std::string_view kSs = "SS";
inline constexpr std::string_view kDsv = "dSV";
inline constexpr std::string_view kCs = "CS";
inline constexpr std::string_view kCfid = "CFID";
inline constexpr std::string_view kCfidFirstMoment = "CFID_first_moment";
inline constexpr std::string_view kTrsv = "TrSV";
inline constexpr std::string_view kSsdT = "SSD_T";
inline constexpr std::string_view kR = "R";
}  // namespace metric

/// Named metric values. `raw` holds unscaled quantities; `scaled()` applies
/// the report scale to everything except R, which stays a fraction in [0, 1].
struct MetricReport {
  std::map<std::string, double> raw;
  MetricConfig config;
  std::size_t n_records = 0;

  double scaled(std::string_view name) const;
  bool has(std::string_view name) const { return raw.count(std::string(name)) != 0; }
  nlohmann::json to_json() const;
};

struct StabilityPoint {
  std::size_t sample_count = 0;
  double mean_ssd = 0.0;
  double std_ssd = 0.0;
  std::size_t repeats = 0;

  friend bool operator==(const StabilityPoint&, const StabilityPoint&) = default;
};

struct StabilityCurve {
  std::vector<StabilityPoint> points;

  std::string to_csv() const;
  nlohmann::json to_json() const;
};

// 1 - cos(m_f, m_s).
double ss_term(const Vector& m_f, const Vector& m_s);

// ||diag(a) - diag(b)||^2.
double dsv_term(const Matrix& cond_cov_fake, const Matrix& cond_cov_real);

// diag: sum_i (sqrt(a_ii) - sqrt(b_ii))^2.
// full: Tr[a + b - 2 (a^1/2 b a^1/2)^1/2].
double trsv_term(const Matrix& cond_cov_fake, const Matrix& cond_cov_real, TrsvMode mode);

// omega * mean_i max(cos(fake_i, text_i), 0) * scale, rows paired by index.
double clip_score(const EmbeddingMatrix& fake, const EmbeddingMatrix& text, double omega,
                  double scale = 1.0);

struct SsdTerms {
  double ss = 0.0;
  double dsv = 0.0;
  double ssd() const { return ss + dsv; }
};

// SS from the generated and conditioning means, dSV from the two conditional
// covariances. Operates on the moments exactly as given (no normalization).
SsdTerms ssd_terms(const ConditionalMoments& moments);

struct CfidTerms {
  double first_moment = 0.0;
  double trsv = 0.0;
  double cfid() const { return first_moment + trsv; }
};

// Mean over the conditioning rows of ||m_{f|c_i} - m_{r|c_i}||^2 plus TrSV,
// where m_{x|c_i} = m_x + A_x (c_i - m_c). The mean is evaluated exactly from
// the moments, without a pass over the rows.
CfidTerms cfid_terms(const ConditionalMoments& moments, TrsvMode mode);

// Dataset-level metrics. Inputs are aligned per record and row-normalized
// when a matrix is not already unit length.
MetricReport ssd(const PairedDataset& dataset, const MetricConfig& config = {});
MetricReport cfid(const PairedDataset& dataset, const MetricConfig& config = {});
// Captioning variant: dataset.fake holds generated captions, dataset.text the
// reference captions; everything is conditioned on dataset.real (images).
MetricReport ssd_t(const PairedDataset& dataset, const MetricConfig& config = {});
MetricReport clip_score(const PairedDataset& dataset, const MetricConfig& config = {});

// Text rows sampled as negatives for each record, excluding every text row
// associated with the record's image_id. Deterministic per seed.
std::vector<std::vector<std::size_t>> sample_distractors(std::span<const Record> records,
                                                         std::size_t distractors_per_query,
                                                         std::uint64_t seed);

// Fraction of records whose ground-truth text has strictly the highest cosine
// with the fake image among itself and its sampled distractors.
double r_precision(const EmbeddingMatrix& fake, const EmbeddingMatrix& text,
                   std::span<const Record> records, std::size_t distractors_per_query,
                   std::uint64_t seed);

enum class MetricSelection { ssd, cs, cfid, r, ssd_t };

std::set<MetricSelection> parse_metric_selection(std::string_view csv);

// Computes the selected metrics with shared statistics; values agree
// bit-for-bit with the single-metric functions above.
MetricReport evaluate(const PairedDataset& dataset, const std::set<MetricSelection>& selection,
                      const MetricConfig& config = {});

// For each count, the scaled SSD over `repeats` independent subsamples. The
// std is the sample standard deviation (0 when repeats == 1).
StabilityCurve stability_sweep(const PairedDataset& dataset, std::span<const std::size_t> sample_counts,
                               std::size_t repeats, std::uint64_t seed, const MetricConfig& config = {});

}  // namespace semdist
