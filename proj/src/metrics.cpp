#include "semdist/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "semdist/error.hpp"
#include "semdist/parallel.hpp"
#include "semdist/random.hpp"

namespace semdist {
namespace {

struct Prepared {
  EmbeddingMatrix text;
  EmbeddingMatrix real;
  EmbeddingMatrix fake;
};

EmbeddingMatrix unit_rows(EmbeddingMatrix m) { return m.normalized() ? m : normalize_rows(m); }

Prepared prepare(const PairedDataset& dataset) {
  dataset.validate();
  if (dataset.size() < 2) throw Error(ErrorKind::invalid_argument, "metrics need at least 2 records");
  return Prepared{unit_rows(dataset.aligned_text()), unit_rows(dataset.aligned_real()),
                  unit_rows(dataset.aligned_fake())};
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    dot += static_cast<double>(a[j]) * b[j];
    na += static_cast<double>(a[j]) * a[j];
    nb += static_cast<double>(b[j]) * b[j];
  }
  if (na == 0.0 || nb == 0.0) throw Error(ErrorKind::invalid_data, "cosine of a zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

void require_nonzero_rows(const EmbeddingMatrix& m, const char* what) {
  for (std::size_t i = 0; i < m.count(); ++i) {
    const auto r = m.row(i);
    if (std::all_of(r.begin(), r.end(), [](float v) { return v == 0.0f; })) {
      throw Error(ErrorKind::invalid_data, std::string(what) + " row " + std::to_string(i) + " is zero");
    }
  }
}

void check_config(const MetricConfig& config) {
  if (!(config.scale > 0.0)) throw Error(ErrorKind::invalid_argument, "scale must be positive");
  if (!(config.omega > 0.0)) throw Error(ErrorKind::invalid_argument, "omega must be positive");
  if (!(config.ridge_scale >= 0.0)) throw Error(ErrorKind::invalid_argument, "ridge_scale must be non-negative");
}

// Clamped diagonal of a conditional covariance; rejects clearly negative entries.
Vector psd_diagonal(const Matrix& m) {
  Vector d = m.diagonal();
  const double tol = 1e-8 * std::max(1.0, d.cwiseAbs().maxCoeff());
  if (d.size() > 0 && d.minCoeff() < -tol) {
    throw Error(ErrorKind::numerical, "covariance diagonal entry " + std::to_string(d.minCoeff()) +
                                          " is negative beyond tolerance");
  }
  return d.cwiseMax(0.0);
}

void put_ssd(MetricReport& report, const SsdTerms& t, std::string_view total_key) {
  report.raw[std::string(metric::kSs)] = t.ss;
  report.raw[std::string(metric::kDsv)] = t.dsv;
  report.raw[std::string(total_key)] = t.ssd();
}

void put_cfid(MetricReport& report, const CfidTerms& t) {
  report.raw[std::string(metric::kCfidFirstMoment)] = t.first_moment;
  report.raw[std::string(metric::kTrsv)] = t.trsv;
  report.raw[std::string(metric::kCfid)] = t.cfid();
}

MetricReport empty_report(const PairedDataset& dataset, const MetricConfig& config) {
  check_config(config);
  MetricReport report;
  report.config = config;
  report.n_records = dataset.size();
  return report;
}

}  // namespace

std::string_view to_string(TrsvMode mode) { return mode == TrsvMode::diag ? "diag" : "full"; }

TrsvMode parse_trsv_mode(std::string_view text) {
  if (text == "diag") return TrsvMode::diag;
  if (text == "full") return TrsvMode::full;
  throw Error(ErrorKind::invalid_argument, "trsv mode must be 'diag' or 'full', got '" + std::string(text) + "'");
}

double MetricReport::scaled(std::string_view name) const {
  const auto it = raw.find(std::string(name));
  if (it == raw.end()) throw Error(ErrorKind::invalid_argument, "report has no metric " + std::string(name));
  return name == metric::kR ? it->second : it->second * config.scale;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["config"] = {{"ridge_scale", config.ridge_scale}, {"omega", config.omega},
                 {"scale", config.scale},             {"trsv_mode", to_string(config.trsv_mode)},
                 {"seed", config.seed},               {"distractors", config.distractors},
                 {"n_records", n_records}};
  j["n_records"] = n_records;
  j["scale"] = config.scale;
  j["values"] = nlohmann::json::object();
  j["raw"] = nlohmann::json::object();
  for (const auto& [name, value] : raw) {
    j["values"][name] = scaled(name);
    j["raw"][name] = value;
  }
  return j;
}

std::string StabilityCurve::to_csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "sample_count,mean_ssd,std_ssd,repeats\n";
  for (const auto& p : points) {
    out << p.sample_count << ',' << p.mean_ssd << ',' << p.std_ssd << ',' << p.repeats << '\n';
  }
  return out.str();
}

nlohmann::json StabilityCurve::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& p : points) {
    j.push_back({{"sample_count", p.sample_count}, {"mean_ssd", p.mean_ssd},
                 {"std_ssd", p.std_ssd}, {"repeats", p.repeats}});
  }
  return j;
}

double ss_term(const Vector& m_f, const Vector& m_s) {
  if (m_f.size() != m_s.size()) throw Error(ErrorKind::shape_mismatch, "ss_term: mean sizes differ");
  const double nf = m_f.norm();
  const double ns = m_s.norm();
  if (nf == 0.0 || ns == 0.0) throw Error(ErrorKind::invalid_argument, "ss_term: zero mean vector");
  return 1.0 - m_f.dot(m_s) / (nf * ns);
}

double dsv_term(const Matrix& cond_cov_fake, const Matrix& cond_cov_real) {
  if (cond_cov_fake.rows() != cond_cov_real.rows() || cond_cov_fake.cols() != cond_cov_real.cols() ||
      cond_cov_fake.rows() != cond_cov_fake.cols()) {
    throw Error(ErrorKind::shape_mismatch, "dsv_term: covariance shapes differ");
  }
  return (cond_cov_fake.diagonal() - cond_cov_real.diagonal()).squaredNorm();
}

double trsv_term(const Matrix& cond_cov_fake, const Matrix& cond_cov_real, TrsvMode mode) {
  if (cond_cov_fake.rows() != cond_cov_real.rows() || cond_cov_fake.cols() != cond_cov_real.cols() ||
      cond_cov_fake.rows() != cond_cov_fake.cols()) {
    throw Error(ErrorKind::shape_mismatch, "trsv_term: covariance shapes differ");
  }
  if (mode == TrsvMode::diag) {
    const Vector a = psd_diagonal(cond_cov_fake).cwiseSqrt();
    const Vector b = psd_diagonal(cond_cov_real).cwiseSqrt();
    return (a - b).squaredNorm();
  }
  const Matrix root_a = matrix_sqrt_psd(cond_cov_fake);
  Matrix inner = root_a * cond_cov_real * root_a;
  inner = 0.5 * (inner + inner.transpose());
  return cond_cov_fake.trace() + cond_cov_real.trace() - 2.0 * matrix_sqrt_psd(inner).trace();
}

double clip_score(const EmbeddingMatrix& fake, const EmbeddingMatrix& text, double omega, double scale) {
  if (fake.count() != text.count() || fake.dim() != text.dim()) {
    throw Error(ErrorKind::shape_mismatch, "clip_score: fake and text must be row-aligned");
  }
  if (fake.count() == 0) throw Error(ErrorKind::invalid_argument, "clip_score: no pairs");
  require_nonzero_rows(fake, "fake");
  require_nonzero_rows(text, "text");
  const double total = chunked_sum(fake.count(), [&](std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t i = b; i < e; ++i) s += std::max(cosine(fake.row(i), text.row(i)), 0.0);
    return s;
  });
  return omega * (total / static_cast<double>(fake.count())) * scale;
}

SsdTerms ssd_terms(const ConditionalMoments& moments) {
  return SsdTerms{ss_term(moments.fake.mean, moments.condition.mean),
                  dsv_term(moments.conditional.cond_cov_fake, moments.conditional.cond_cov_real)};
}

CfidTerms cfid_terms(const ConditionalMoments& moments, TrsvMode mode) {
  const auto& cs = moments.conditional;
  // mean_i ||shift + D (c_i - m_c)||^2 with sum_i (c_i - m_c) = 0 reduces to
  // ||shift||^2 + (n - 1) / n * Tr(D C_cc D^T).
  const Matrix diff = cs.coeff_fake - cs.coeff_real;
  const Vector shift = moments.fake.mean - moments.real.mean;
  const double n = static_cast<double>(moments.condition.n);
  const double spread = ((diff * moments.condition.cov).array() * diff.array()).sum();
  return CfidTerms{shift.squaredNorm() + (n - 1.0) / n * spread,
                   trsv_term(cs.cond_cov_fake, cs.cond_cov_real, mode)};
}

MetricReport ssd(const PairedDataset& dataset, const MetricConfig& config) {
  return evaluate(dataset, {MetricSelection::ssd}, config);
}

MetricReport cfid(const PairedDataset& dataset, const MetricConfig& config) {
  return evaluate(dataset, {MetricSelection::cfid}, config);
}

MetricReport ssd_t(const PairedDataset& dataset, const MetricConfig& config) {
  return evaluate(dataset, {MetricSelection::ssd_t}, config);
}

MetricReport clip_score(const PairedDataset& dataset, const MetricConfig& config) {
  return evaluate(dataset, {MetricSelection::cs}, config);
}

std::vector<std::vector<std::size_t>> sample_distractors(std::span<const Record> records,
                                                         std::size_t distractors_per_query,
                                                         std::uint64_t seed) {
  if (distractors_per_query == 0) throw Error(ErrorKind::invalid_argument, "distractors must be positive");

  // Distinct text rows, each tagged with the image of the first record using it.
  std::vector<std::size_t> texts;
  std::vector<std::size_t> text_image;  // index into `images`
  std::unordered_map<std::size_t, std::size_t> seen_text;
  std::unordered_map<std::string, std::size_t> image_index;
  std::vector<std::size_t> texts_per_image;
  for (const Record& r : records) {
    auto [img, new_image] = image_index.try_emplace(r.image_id, texts_per_image.size());
    if (new_image) texts_per_image.push_back(0);
    if (seen_text.try_emplace(r.text, texts.size()).second) {
      texts.push_back(r.text);
      text_image.push_back(img->second);
      ++texts_per_image[img->second];
    }
  }

  std::vector<std::vector<std::size_t>> out(records.size());
  for (std::size_t q = 0; q < records.size(); ++q) {
    const std::size_t image = image_index.at(records[q].image_id);
    const std::size_t gt_slot = seen_text.at(records[q].text);
    auto eligible = [&](std::size_t slot) { return text_image[slot] != image && slot != gt_slot; };
    const std::size_t n_eligible =
        texts.size() - texts_per_image[image] - (text_image[gt_slot] != image ? 1 : 0);
    if (n_eligible < distractors_per_query) {
      throw Error(ErrorKind::invalid_argument,
                  "record " + std::to_string(q) + " has only " + std::to_string(n_eligible) +
                      " distinct distractor texts, " + std::to_string(distractors_per_query) + " requested");
    }

    Rng rng = make_rng(seed, q);
    std::vector<std::size_t>& chosen = out[q];
    chosen.reserve(distractors_per_query);
    if (4 * distractors_per_query <= n_eligible) {
      std::uniform_int_distribution<std::size_t> pick(0, texts.size() - 1);
      std::vector<std::size_t> slots;
      while (slots.size() < distractors_per_query) {
        const std::size_t s = pick(rng);
        if (eligible(s) && std::find(slots.begin(), slots.end(), s) == slots.end()) slots.push_back(s);
      }
      for (std::size_t s : slots) chosen.push_back(texts[s]);
    } else {
      std::vector<std::size_t> pool;
      pool.reserve(n_eligible);
      for (std::size_t s = 0; s < texts.size(); ++s) {
        if (eligible(s)) pool.push_back(s);
      }
      for (std::size_t i = 0; i < distractors_per_query; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
        std::swap(pool[i], pool[pick(rng)]);
        chosen.push_back(texts[pool[i]]);
      }
    }
  }
  return out;
}

double r_precision(const EmbeddingMatrix& fake, const EmbeddingMatrix& text, std::span<const Record> records,
                   std::size_t distractors_per_query, std::uint64_t seed) {
  if (records.empty()) throw Error(ErrorKind::invalid_argument, "r_precision: no records");
  if (fake.dim() != text.dim()) throw Error(ErrorKind::shape_mismatch, "r_precision: dims differ");
  for (const Record& r : records) {
    if (r.fake >= fake.count() || r.text >= text.count()) {
      throw Error(ErrorKind::invalid_data, "r_precision: record index out of range");
    }
  }
  require_nonzero_rows(fake, "fake");
  require_nonzero_rows(text, "text");
  const auto distractors = sample_distractors(records, distractors_per_query, seed);
  const double hits = chunked_sum(records.size(), [&](std::size_t b, std::size_t e) {
    double s = 0.0;
    for (std::size_t q = b; q < e; ++q) {
      const auto image = fake.row(records[q].fake);
      const double gt = cosine(image, text.row(records[q].text));
      bool best = true;
      for (std::size_t t : distractors[q]) {
        if (cosine(image, text.row(t)) >= gt) {
          best = false;
          break;
        }
      }
      s += best ? 1.0 : 0.0;
    }
    return s;
  });
  return hits / static_cast<double>(records.size());
}

std::set<MetricSelection> parse_metric_selection(std::string_view csv) {
  std::set<MetricSelection> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t end = std::min(csv.find(',', start), csv.size());
    const std::string_view item = csv.substr(start, end - start);
    if (item == "ssd") out.insert(MetricSelection::ssd);
    else if (item == "cs") out.insert(MetricSelection::cs);
    else if (item == "cfid") out.insert(MetricSelection::cfid);
    else if (item == "r") out.insert(MetricSelection::r);
    else if (item == "ssd_t") out.insert(MetricSelection::ssd_t);
    else if (!item.empty()) throw Error(ErrorKind::invalid_argument, "unknown metric '" + std::string(item) + "'");
    start = end + 1;
  }
  if (out.empty()) throw Error(ErrorKind::invalid_argument, "metric selection is empty");
  return out;
}

MetricReport evaluate(const PairedDataset& dataset, const std::set<MetricSelection>& selection,
                      const MetricConfig& config) {
  if (selection.empty()) throw Error(ErrorKind::invalid_argument, "metric selection is empty");
  const bool want_ssd = selection.count(MetricSelection::ssd) != 0;
  const bool want_cfid = selection.count(MetricSelection::cfid) != 0;
  const bool want_ssd_t = selection.count(MetricSelection::ssd_t) != 0;
  if (want_ssd_t && (want_ssd || want_cfid)) {
    throw Error(ErrorKind::invalid_argument,
                "ssd_t conditions on images and cannot be combined with ssd/cfid in one report");
  }
  MetricReport report = empty_report(dataset, config);
  const Prepared p = prepare(dataset);

  if (want_ssd || want_cfid) {
    const ConditionalMoments moments = conditional_moments(p.fake, p.real, p.text, config.ridge_scale);
    if (want_ssd) put_ssd(report, ssd_terms(moments), metric::kSsd);
    if (want_cfid) put_cfid(report, cfid_terms(moments, config.trsv_mode));
  }
  if (want_ssd_t) {
    // Generated captions vs reference captions, both given the real image.
    const ConditionalMoments moments = conditional_moments(p.fake, p.text, p.real, config.ridge_scale);
    put_ssd(report, ssd_terms(moments), metric::kSsdT);
  }
  if (selection.count(MetricSelection::cs) != 0) {
    report.raw[std::string(metric::kCs)] = clip_score(p.fake, p.text, config.omega, 1.0);
  }
  if (selection.count(MetricSelection::r) != 0) {
    report.raw[std::string(metric::kR)] =
        r_precision(dataset.fake, dataset.text, dataset.records, config.distractors, config.seed);
  }
  return report;
}

StabilityCurve stability_sweep(const PairedDataset& dataset, std::span<const std::size_t> sample_counts,
                               std::size_t repeats, std::uint64_t seed, const MetricConfig& config) {
  if (repeats == 0) throw Error(ErrorKind::invalid_argument, "repeats must be positive");
  if (sample_counts.empty()) throw Error(ErrorKind::invalid_argument, "no sample counts given");
  for (std::size_t i = 0; i < sample_counts.size(); ++i) {
    if (i > 0 && sample_counts[i] <= sample_counts[i - 1]) {
      throw Error(ErrorKind::invalid_argument, "sample counts must be strictly increasing");
    }
    if (sample_counts[i] > dataset.size()) {
      throw Error(ErrorKind::invalid_argument, "sample count " + std::to_string(sample_counts[i]) +
                                                   " exceeds " + std::to_string(dataset.size()) + " records");
    }
  }

  StabilityCurve curve;
  for (std::size_t c = 0; c < sample_counts.size(); ++c) {
    std::vector<double> values;
    values.reserve(repeats);
    for (std::size_t k = 0; k < repeats; ++k) {
      const PairedDataset sub = subsample(dataset, sample_counts[c], mix_seed(mix_seed(seed, c), k));
      values.push_back(ssd(sub, config).scaled(metric::kSsd));
    }
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(repeats);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    const double sd = repeats > 1 ? std::sqrt(var / static_cast<double>(repeats - 1)) : 0.0;
    curve.points.push_back({sample_counts[c], mean, sd, repeats});
  }
  return curve;
}

}  // namespace semdist
