#include "semdist/gaussian_stats.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "gtest/gtest.h"
#include "oracles.hpp"
#include "semdist/error.hpp"
#include "synthetic.hpp"

namespace semdist {
namespace {

double rel_frobenius(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

EmbeddingMatrix rows_of(const Matrix& m, Role role = Role::text) { return EmbeddingMatrix::from_eigen(role, m); }

TEST(Summarize, TwoRowsByHand) {
  const auto s = summarize(EmbeddingMatrix(Role::text, 2, 2, {1, 0, -1, 0}));
  EXPECT_EQ(s.n, 2u);
  EXPECT_EQ(s.mean, Vector::Zero(2));
  Matrix expected(2, 2);
  expected << 2, 0, 0, 0;
  EXPECT_EQ(s.cov, expected);
}

TEST(Summarize, IdenticalRowsGiveZeroCov) {
  std::vector<float> data;
  for (int i = 0; i < 50; ++i) data.insert(data.end(), {0.25f, -3.0f, 7.5f});
  const auto s = summarize(EmbeddingMatrix(Role::text, 3, 50, data));
  EXPECT_EQ(s.cov, Matrix::Zero(3, 3));
}

TEST(Summarize, MatchesNaiveLoops) {
  Rng rng = make_rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const auto d = 3 + trial;
    const Matrix x = testing::gaussian_rows(rng, 5000 + 37 * trial, testing::random_normal(rng, d),
                                            testing::random_spd(rng, d).llt().matrixL());
    const auto m = rows_of(x);
    const auto s = summarize(m);
    const auto mu = oracle::mean(m);
    for (Eigen::Index j = 0; j < d; ++j) EXPECT_NEAR(s.mean(j), mu[j], 1e-12);
    EXPECT_LT((s.cov - oracle::cross_cov(m, m)).norm(), 1e-10 * s.cov.norm());
  }
}

TEST(Summarize, LargeSampleMatchesKnownDiagonalGaussian) {
  Rng rng = make_rng(1);
  Vector std_dev(4);
  std_dev << 0.5, 1.0, 2.0, 0.1;
  const Matrix chol = std_dev.asDiagonal();
  const Matrix truth = (std_dev.array().square()).matrix().asDiagonal();
  const auto s = summarize(rows_of(testing::gaussian_rows(rng, 200000, Vector::Zero(4), chol)));
  EXPECT_LT(rel_frobenius(s.cov, truth), 0.02);
}

TEST(CrossCovariance, SelfEqualsCov) {
  const auto ds = testing::clip_like_dataset(300, 6, 2);
  EXPECT_LT((cross_covariance(ds.text, ds.text) - summarize(ds.text).cov).norm(), 1e-15);
}

TEST(CrossCovariance, Bilinear) {
  const auto ds = testing::clip_like_dataset(300, 6, 2);
  const Matrix doubled = 2.0 * ds.text.as_eigen().cast<double>();
  const Matrix c = cross_covariance(ds.text, rows_of(doubled));
  EXPECT_LT((c - 2.0 * summarize(ds.text).cov).norm(), 1e-12);
}

TEST(CrossCovariance, IndependentSamplesNearZero) {
  Rng rng = make_rng(3);
  const Matrix eye = Matrix::Identity(4, 4);
  const auto x = rows_of(testing::gaussian_rows(rng, 200000, Vector::Zero(4), eye));
  const auto y = rows_of(testing::gaussian_rows(rng, 200000, Vector::Zero(4), eye));
  EXPECT_LT(cross_covariance(x, y).cwiseAbs().maxCoeff(), 0.02);
}

TEST(CrossCovariance, MismatchedCountsThrow) {
  EXPECT_THROW(cross_covariance(EmbeddingMatrix(Role::text, 1, 2, {1, 2}), EmbeddingMatrix(Role::text, 1, 3, {1, 2, 3})),
               Error);
}

TEST(ConditionalCovariance, NoCouplingReturnsCxx) {
  Rng rng = make_rng(4);
  const Matrix c_xx = testing::random_spd(rng, 5);
  const Matrix c_ss = testing::random_spd(rng, 5);
  EXPECT_EQ(conditional_covariance(c_xx, Matrix::Zero(5, 5), c_ss, 1e-6), c_xx);
}

TEST(ConditionalCovariance, SelfConditioningIsZero) {
  Rng rng = make_rng(5);
  const Matrix c = testing::random_spd(rng, 6, 0.5);
  EXPECT_LT(conditional_covariance(c, c, c, 0.0).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ConditionalCovariance, MatchesExplicitInverse) {
  Rng rng = make_rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index d = 2 + trial % 7;
    const Matrix joint = testing::random_spd(rng, 2 * d, 0.3);
    const Matrix c_xx = joint.topLeftCorner(d, d);
    const Matrix c_xs = joint.topRightCorner(d, d);
    const Matrix c_ss = joint.bottomRightCorner(d, d);
    const Matrix got = conditional_covariance(c_xx, c_xs, c_ss, 0.0);
    EXPECT_LT((got - oracle::conditional_cov(c_xx, c_xs, c_ss)).norm(), 1e-10 * c_xx.norm());
    EXPECT_TRUE(is_symmetric(got));
  }
}

TEST(ConditionalCovariance, RidgeMakesSingularConditionSolvable) {
  Matrix c_ss = Matrix::Zero(3, 3);
  c_ss(0, 0) = 1.0;
  EXPECT_THROW(conditional_covariance(Matrix::Identity(3, 3), Matrix::Zero(3, 3), c_ss, 0.0), Error);
  EXPECT_NO_THROW(conditional_covariance(Matrix::Identity(3, 3), Matrix::Zero(3, 3), c_ss, 1e-6));
  EXPECT_DOUBLE_EQ(ridge_epsilon(c_ss, 1e-6), 1e-6 / 3.0);
}

TEST(ConditionalCovariance, GaussianModelWithinTwoPercent) {
  const auto model = testing::JointGaussianModel::random(8, 77);
  const auto t = testing::sample(model, 200000, 78);
  const auto m = conditional_moments(t.fake, t.real, t.text, 1e-6);
  EXPECT_LT(rel_frobenius(m.conditional.cond_cov_fake, model.noise_f), 0.02);
  EXPECT_LT(rel_frobenius(m.conditional.cond_cov_real, model.noise_r), 0.02);
  EXPECT_LT(rel_frobenius(m.conditional.coeff_fake, model.coupling_f), 0.02);
}

TEST(ConditionalMoments, AgreesWithSeparateEstimators) {
  const auto model = testing::JointGaussianModel::random(5, 8);
  const auto t = testing::sample(model, 9000, 9);
  const auto m = conditional_moments(t.fake, t.real, t.text, 1e-6);
  const Matrix c_ss = summarize(t.text).cov;
  const Matrix expect_f =
      conditional_covariance(summarize(t.fake).cov, cross_covariance(t.fake, t.text), c_ss, 1e-6);
  EXPECT_LT((m.conditional.cond_cov_fake - expect_f).norm(), 1e-10 * expect_f.norm());
  EXPECT_LT((m.fake.mean - row_mean(t.fake)).norm(), 1e-12);
  EXPECT_DOUBLE_EQ(m.conditional.ridge_used, ridge_epsilon(c_ss, 1e-6));
}

TEST(ConditionalMeanOffsets, ZeroAndIdentity) {
  const auto ds = testing::clip_like_dataset(20, 4, 10);
  const Vector mu = row_mean(ds.text);
  EXPECT_EQ(conditional_mean_offsets(Matrix::Zero(4, 4), ds.text, mu), Matrix::Zero(20, 4));
  const Matrix centered = conditional_mean_offsets(Matrix::Identity(4, 4), ds.text, mu);
  for (Eigen::Index i = 0; i < 20; ++i)
    for (Eigen::Index j = 0; j < 4; ++j)
      EXPECT_NEAR(centered(i, j), ds.text.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) - mu(j), 1e-15);
}

TEST(ConditionalMeanOffsets, MatchesManualMatvec) {
  Rng rng = make_rng(11);
  const auto ds = testing::clip_like_dataset(15, 4, 12);
  const Matrix coeff = testing::random_spd(rng, 4) - Matrix::Identity(4, 4);
  const Vector mu = row_mean(ds.text);
  const Matrix got = conditional_mean_offsets(coeff, ds.text, mu);
  for (std::size_t i = 0; i < 15; ++i) {
    for (Eigen::Index a = 0; a < 4; ++a) {
      double acc = 0;
      for (Eigen::Index b = 0; b < 4; ++b) acc += coeff(a, b) * (ds.text.at(i, static_cast<std::size_t>(b)) - mu(b));
      EXPECT_NEAR(got(static_cast<Eigen::Index>(i), a), acc, 1e-14);
    }
  }
}

TEST(MatrixSqrt, SmallCases) {
  EXPECT_LT((matrix_sqrt_psd(Matrix::Identity(3, 3)) - Matrix::Identity(3, 3)).norm(), 1e-15);
  Matrix a = Eigen::Vector2d(4, 9).asDiagonal();
  Matrix expected = Eigen::Vector2d(2, 3).asDiagonal();
  EXPECT_LT((matrix_sqrt_psd(a) - expected).norm(), 1e-14);
}

TEST(MatrixSqrt, ReconstructsRandomPsd) {
  Rng rng = make_rng(13);
  for (Eigen::Index d : {2, 5, 16, 40}) {
    const Matrix b = testing::random_spd(rng, d, 0.0);  // B^T B, possibly ill-conditioned
    const Matrix s = matrix_sqrt_psd(b);
    EXPECT_LT((s * s - b).norm() / b.norm(), 1e-8) << d;
    EXPECT_TRUE(is_symmetric(s));
  }
}

TEST(MatrixSqrt, RankDeficientAndRejections) {
  Rng rng = make_rng(14);
  const Matrix v = testing::random_normal(rng, 6);
  const Matrix rank1 = v * v.transpose();
  const Matrix s = matrix_sqrt_psd(rank1);
  EXPECT_LT((s * s - rank1).norm() / rank1.norm(), 1e-8);

  Matrix neg = Matrix::Identity(2, 2);
  neg(1, 1) = -0.5;
  EXPECT_THROW(matrix_sqrt_psd(neg), Error);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.3;
  EXPECT_THROW(matrix_sqrt_psd(asym), Error);
}

TEST(SolveSpd, Cases) {
  const Matrix b = Eigen::Vector2d(7, -3);
  EXPECT_EQ(solve_spd(Matrix::Identity(2, 2), b), b);
  const Matrix a = Eigen::Vector2d(2, 4).asDiagonal();
  EXPECT_LT((solve_spd(a, Eigen::Vector2d(2, 4)) - Eigen::Vector2d(1, 1)).norm(), 1e-15);

  Rng rng = make_rng(15);
  const Matrix spd = testing::random_spd(rng, 32);
  const Matrix rhs = testing::random_normal(rng, 32);
  const Matrix x = solve_spd(spd, rhs);
  EXPECT_LT((spd * x - rhs).norm() / rhs.norm(), 1e-8);

  EXPECT_THROW(solve_spd(-Matrix::Identity(2, 2), b), Error);
}

}  // namespace
}  // namespace semdist
