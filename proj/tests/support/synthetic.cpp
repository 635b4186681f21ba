#include "synthetic.hpp"

#include <cmath>

#include <Eigen/Cholesky>

namespace semdist::testing {
namespace {

Eigen::MatrixXd normalized_rows(Eigen::MatrixXd m) {
  m.rowwise().normalize();
  return m;
}

Eigen::MatrixXd normal_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double sd) {
  std::normal_distribution<double> g(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

}  // namespace

Eigen::MatrixXd gaussian_rows(Rng& rng, std::size_t n, const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol) {
  const Eigen::MatrixXd z = normal_matrix(rng, static_cast<Eigen::Index>(n), mean.size(), 1.0);
  Eigen::MatrixXd x = z * chol.transpose();
  x.rowwise() += mean.transpose();
  return x;
}

Eigen::MatrixXd random_spd(Rng& rng, Eigen::Index d, double jitter) {
  const Eigen::MatrixXd b = normal_matrix(rng, d, d, 1.0 / std::sqrt(static_cast<double>(d)));
  Eigen::MatrixXd a = b.transpose() * b;
  a.diagonal().array() += jitter;
  return 0.5 * (a + a.transpose());
}

Eigen::VectorXd random_normal(Rng& rng, Eigen::Index d) { return normal_matrix(rng, d, 1, 1.0).col(0); }

Eigen::VectorXd random_unit(Rng& rng, Eigen::Index d) { return random_normal(rng, d).normalized(); }

JointGaussianModel JointGaussianModel::random(Eigen::Index d, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  JointGaussianModel m;
  m.mean_s = random_normal(rng, d);
  m.cov_s = random_spd(rng, d, 0.2);
  m.coupling_f = 0.8 * Eigen::MatrixXd::Identity(d, d) + normal_matrix(rng, d, d, 0.1);
  m.coupling_r = 0.7 * Eigen::MatrixXd::Identity(d, d) + normal_matrix(rng, d, d, 0.1);
  m.offset_f = 0.3 * random_normal(rng, d);
  m.offset_r = 0.3 * random_normal(rng, d);
  m.noise_f = 0.5 * random_spd(rng, d, 0.3);
  m.noise_r = random_spd(rng, d, 0.1);
  return m;
}

double JointGaussianModel::analytic_ss() const {
  const Eigen::VectorXd mf = mean_f();
  return 1.0 - mf.dot(mean_s) / (mf.norm() * mean_s.norm());
}

double JointGaussianModel::analytic_dsv() const { return (noise_f.diagonal() - noise_r.diagonal()).squaredNorm(); }

double JointGaussianModel::analytic_cfid_first_moment() const {
  const Eigen::MatrixXd diff = coupling_f - coupling_r;
  return (mean_f() - mean_r()).squaredNorm() + (diff * cov_s * diff.transpose()).trace();
}

double JointGaussianModel::analytic_trsv_diag() const {
  return (noise_f.diagonal().cwiseSqrt() - noise_r.diagonal().cwiseSqrt()).squaredNorm();
}

Triple sample(const JointGaussianModel& model, std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const Eigen::Index d = model.mean_s.size();
  const Eigen::MatrixXd s = gaussian_rows(rng, n, model.mean_s, model.cov_s.llt().matrixL());
  const Eigen::MatrixXd nf = gaussian_rows(rng, n, Eigen::VectorXd::Zero(d), model.noise_f.llt().matrixL());
  const Eigen::MatrixXd nr = gaussian_rows(rng, n, Eigen::VectorXd::Zero(d), model.noise_r.llt().matrixL());
  Eigen::MatrixXd f = s * model.coupling_f.transpose() + nf;
  f.rowwise() += model.offset_f.transpose();
  Eigen::MatrixXd r = s * model.coupling_r.transpose() + nr;
  r.rowwise() += model.offset_r.transpose();
  return Triple{EmbeddingMatrix::from_eigen(Role::fake_image, f), EmbeddingMatrix::from_eigen(Role::real_image, r),
                EmbeddingMatrix::from_eigen(Role::text, s)};
}

std::vector<Record> identity_records(std::size_t n) {
  std::vector<Record> records;
  records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) records.push_back({i, i, i, std::to_string(i), std::to_string(i)});
  return records;
}

PairedDataset make_dataset(EmbeddingMatrix text, EmbeddingMatrix real, EmbeddingMatrix fake) {
  const std::size_t n = text.count();
  return PairedDataset{std::move(text), std::move(real), std::move(fake), identity_records(n)};
}

PairedDataset clip_like_dataset(std::size_t n, Eigen::Index d, std::uint64_t seed, double fake_noise) {
  Rng rng = make_rng(seed);
  const double unit = 1.0 / std::sqrt(static_cast<double>(d));
  const Eigen::VectorXd mu = random_unit(rng, d);
  const Eigen::VectorXd gap = 0.8 * random_unit(rng, d);
  const auto rows = static_cast<Eigen::Index>(n);

  Eigen::MatrixXd text = normal_matrix(rng, rows, d, 0.7 * unit);
  text.rowwise() += mu.transpose();
  text = normalized_rows(text);

  Eigen::MatrixXd real = text + normal_matrix(rng, rows, d, 0.35 * unit);
  real.rowwise() += gap.transpose();
  Eigen::MatrixXd fake = text + normal_matrix(rng, rows, d, fake_noise * unit);
  fake.rowwise() += gap.transpose();

  return make_dataset(EmbeddingMatrix::from_eigen(Role::text, text),
                      EmbeddingMatrix::from_eigen(Role::real_image, normalized_rows(real)),
                      EmbeddingMatrix::from_eigen(Role::fake_image, normalized_rows(fake)));
}

PairedDataset with_noisy_fake(const PairedDataset& ds, double sigma, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  const Eigen::Index d = static_cast<Eigen::Index>(ds.real.dim());
  const Eigen::MatrixXd base = ds.fake.as_eigen().cast<double>();
  const Eigen::MatrixXd fake =
      normalized_rows(base + normal_matrix(rng, base.rows(), d, sigma / std::sqrt(static_cast<double>(d))));
  return PairedDataset{ds.text, ds.real, EmbeddingMatrix::from_eigen(Role::fake_image, fake), ds.records};
}

BagOfTokensWorld BagOfTokensWorld::create(Eigen::Index dim, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  BagOfTokensWorld w;
  w.dim = dim;
  const struct {
    const char* prefix;
    Pos pos;
    int count;
  } groups[] = {{"noun", Pos::noun, 60}, {"verb", Pos::verb, 25}, {"adj", Pos::adj, 40}, {"stop", Pos::other, 15}};
  for (const auto& g : groups) {
    for (int i = 0; i < g.count; ++i) {
      w.vocabulary.push_back(std::string(g.prefix) + std::to_string(i));
      w.lexicon.add(w.vocabulary.back(), g.pos);
      w.token_vectors.push_back(random_normal(rng, dim) / std::sqrt(static_cast<double>(dim)));
    }
  }
  return w;
}

std::string BagOfTokensWorld::random_caption(Rng& rng) const {
  std::uniform_int_distribution<int> length(14, 22);
  std::discrete_distribution<int> pos_pick({0.35, 0.15, 0.30, 0.20});
  std::string caption;
  const int len = length(rng);
  for (int k = 0; k < len; ++k) {
    const auto& pool = lexicon.pool(static_cast<Pos>(pos_pick(rng)));
    std::uniform_int_distribution<std::size_t> tok(0, pool.size() - 1);
    if (k) caption += ' ';
    caption += pool[tok(rng)];
  }
  return caption;
}

std::size_t BagOfTokensWorld::token_id(const std::string& token) const {
  for (std::size_t i = 0; i < vocabulary.size(); ++i) {
    if (vocabulary[i] == token) return i;
  }
  return vocabulary.size();
}

Eigen::VectorXd BagOfTokensWorld::embed_caption(const std::vector<std::string>& tokens) const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  for (const auto& t : tokens) sum += token_vectors.at(token_id(t));
  return sum;
}

CaptionCorpus make_caption_corpus(const BagOfTokensWorld& world, std::size_t n, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> g(0.0, 0.6 / std::sqrt(static_cast<double>(world.dim)));
  std::vector<std::string> captions;
  Eigen::MatrixXd images(static_cast<Eigen::Index>(n), world.dim);
  Eigen::MatrixXd texts(static_cast<Eigen::Index>(n), world.dim);
  for (std::size_t i = 0; i < n; ++i) {
    captions.push_back(world.random_caption(rng));
    const Eigen::VectorXd sum = world.embed_caption(tokenize(captions.back(), world.lexicon).tokens);
    const auto row = static_cast<Eigen::Index>(i);
    texts.row(row) = sum.normalized().transpose();
    Eigen::VectorXd img = sum.normalized();
    for (Eigen::Index j = 0; j < world.dim; ++j) img(j) += g(rng);
    images.row(row) = img.normalized().transpose();
  }
  return CaptionCorpus{std::move(captions), EmbeddingMatrix::from_eigen(Role::real_image, images),
                       EmbeddingMatrix::from_eigen(Role::text, texts)};
}

EmbeddingMatrix corrupted_caption_embeddings(const BagOfTokensWorld& world, const CaptionCorpus& corpus,
                                             double ratio, std::uint64_t seed) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(corpus.captions.size()), world.dim);
  for (std::size_t i = 0; i < corpus.captions.size(); ++i) {
    const auto tokens = tokenize(corpus.captions[i], world.lexicon);
    const auto neg = construct_hard_negative(tokens, world.lexicon, ratio, mix_seed(seed, i));
    out.row(static_cast<Eigen::Index>(i)) = world.embed_caption(neg.tokens).normalized().transpose();
  }
  return EmbeddingMatrix::from_eigen(Role::fake_caption, out);
}

}  // namespace semdist::testing
