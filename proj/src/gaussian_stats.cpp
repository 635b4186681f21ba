#include "semdist/gaussian_stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "semdist/error.hpp"

namespace semdist {
namespace {

// Rows per block when streaming float32 storage into double products. Fixed so
// that the accumulation order never depends on anything but the input size.
constexpr Eigen::Index kBlockRows = 4096;

Matrix centered_block(const EmbeddingMatrix& m, Eigen::Index begin, Eigen::Index rows,
                      const Vector& mean) {
  Matrix block = m.as_eigen().middleRows(begin, rows).cast<double>();
  block.rowwise() -= mean.transpose();
  return block;
}

void require_samples(const EmbeddingMatrix& m, const char* what) {
  if (m.count() < 2) {
    throw Error(ErrorKind::invalid_argument,
                std::string(what) + " needs at least 2 samples, got " + std::to_string(m.count()));
  }
}

void require_aligned(const EmbeddingMatrix& x, const EmbeddingMatrix& y) {
  if (x.count() != y.count() || x.dim() != y.dim()) {
    throw Error(ErrorKind::shape_mismatch,
                "matrices differ in shape: " + std::to_string(x.count()) + "x" + std::to_string(x.dim()) +
                    " vs " + std::to_string(y.count()) + "x" + std::to_string(y.dim()));
  }
}

void require_square(const Matrix& a, Eigen::Index dim, const char* what) {
  if (a.rows() != dim || a.cols() != dim) {
    throw Error(ErrorKind::shape_mismatch, std::string(what) + " must be " + std::to_string(dim) +
                                               "x" + std::to_string(dim));
  }
}

Eigen::LLT<Matrix> factor_ridged(const Matrix& c_ss, double ridge_scale) {
  if (ridge_scale < 0.0) throw Error(ErrorKind::invalid_argument, "ridge_scale must be non-negative");
  Matrix ridged = c_ss;
  ridged.diagonal().array() += ridge_epsilon(c_ss, ridge_scale);
  Eigen::LLT<Matrix> llt(ridged);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::numerical, "conditioning covariance is not positive definite; raise ridge_scale");
  }
  return llt;
}

Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

Vector row_mean(const EmbeddingMatrix& matrix) {
  if (matrix.count() == 0) throw Error(ErrorKind::invalid_argument, "mean of an empty matrix");
  Vector sum = Vector::Zero(static_cast<Eigen::Index>(matrix.dim()));
  const auto n = static_cast<Eigen::Index>(matrix.count());
  for (Eigen::Index b = 0; b < n; b += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, n - b);
    sum += matrix.as_eigen().middleRows(b, rows).cast<double>().colwise().sum().transpose();
  }
  return sum / static_cast<double>(n);
}

GaussianSummary summarize(const EmbeddingMatrix& matrix) {
  require_samples(matrix, "covariance");
  const auto n = static_cast<Eigen::Index>(matrix.count());
  const auto d = static_cast<Eigen::Index>(matrix.dim());
  GaussianSummary out{row_mean(matrix), Matrix::Zero(d, d), matrix.count()};
  for (Eigen::Index b = 0; b < n; b += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, n - b);
    const Matrix block = centered_block(matrix, b, rows, out.mean);
    out.cov.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
  }
  out.cov.triangularView<Eigen::StrictlyUpper>() = out.cov.transpose();
  out.cov /= static_cast<double>(n - 1);
  return out;
}

Matrix cross_covariance(const EmbeddingMatrix& x, const EmbeddingMatrix& y) {
  require_aligned(x, y);
  require_samples(x, "cross-covariance");
  const auto n = static_cast<Eigen::Index>(x.count());
  const auto d = static_cast<Eigen::Index>(x.dim());
  const Vector mx = row_mean(x);
  const Vector my = row_mean(y);
  Matrix acc = Matrix::Zero(d, d);
  for (Eigen::Index b = 0; b < n; b += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, n - b);
    acc.noalias() += centered_block(x, b, rows, mx).transpose() * centered_block(y, b, rows, my);
  }
  return acc / static_cast<double>(n - 1);
}

double ridge_epsilon(const Matrix& c_ss, double ridge_scale) {
  if (c_ss.rows() == 0) return 0.0;
  return ridge_scale * c_ss.trace() / static_cast<double>(c_ss.rows());
}

Matrix conditional_covariance(const Matrix& c_xx, const Matrix& c_xs, const Matrix& c_ss,
                              double ridge_scale) {
  const Eigen::Index d = c_ss.rows();
  require_square(c_ss, d, "c_ss");
  require_square(c_xx, d, "c_xx");
  require_square(c_xs, d, "c_xs");
  const auto llt = factor_ridged(c_ss, ridge_scale);
  // With C_ss = L L^T, C_xs C_ss^-1 C_sx = W^T W for W = L^-1 C_sx.
  const Matrix w = llt.matrixL().solve(c_xs.transpose());
  Matrix out = c_xx;
  out.noalias() -= w.transpose() * w;
  return symmetrized(out);
}

Matrix regression_coefficients(const Matrix& c_xs, const Matrix& c_ss, double ridge_scale) {
  const Eigen::Index d = c_ss.rows();
  require_square(c_ss, d, "c_ss");
  require_square(c_xs, d, "c_xs");
  // A = C_xs C_ss^-1  <=>  C_ss A^T = C_sx.
  return factor_ridged(c_ss, ridge_scale).solve(c_xs.transpose()).transpose();
}

Matrix conditional_mean_offsets(const Matrix& coeff, const EmbeddingMatrix& conditions,
                                const Vector& cond_mean) {
  const auto d = static_cast<Eigen::Index>(conditions.dim());
  if (coeff.cols() != d || cond_mean.size() != d) {
    throw Error(ErrorKind::shape_mismatch, "coefficient / mean shapes do not match condition dim " +
                                               std::to_string(d));
  }
  const auto n = static_cast<Eigen::Index>(conditions.count());
  Matrix out(n, coeff.rows());
  for (Eigen::Index b = 0; b < n; b += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, n - b);
    out.middleRows(b, rows).noalias() = centered_block(conditions, b, rows, cond_mean) * coeff.transpose();
  }
  return out;
}

bool is_symmetric(const Matrix& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  if (a.size() == 0) return true;
  const double scale = a.cwiseAbs().maxCoeff();
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

Matrix matrix_sqrt_psd(const Matrix& a) {
  if (!is_symmetric(a)) throw Error(ErrorKind::numerical, "matrix_sqrt_psd: input is not symmetric");
  if (a.size() == 0) return a;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrized(a));
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::numerical, "eigendecomposition failed");
  Vector lambda = eig.eigenvalues();
  const double norm = lambda.cwiseAbs().maxCoeff();
  if (lambda.minCoeff() < -1e-8 * norm) {
    throw Error(ErrorKind::numerical, "matrix_sqrt_psd: eigenvalue " + std::to_string(lambda.minCoeff()) +
                                          " violates positive semi-definiteness");
  }
  lambda = lambda.cwiseMax(0.0).cwiseSqrt();
  const Matrix& v = eig.eigenvectors();
  return symmetrized(v * lambda.asDiagonal() * v.transpose());
}

Matrix solve_spd(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols() || b.rows() != a.rows()) {
    throw Error(ErrorKind::shape_mismatch, "solve_spd: incompatible shapes");
  }
  if (!is_symmetric(a)) throw Error(ErrorKind::numerical, "solve_spd: matrix is not symmetric");
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::numerical, "solve_spd: matrix is not positive definite");
  return llt.solve(b);
}

ConditionalMoments conditional_moments(const EmbeddingMatrix& fake, const EmbeddingMatrix& real,
                                       const EmbeddingMatrix& condition, double ridge_scale) {
  require_aligned(fake, condition);
  require_aligned(real, condition);
  require_samples(condition, "conditional moments");

  const auto n = static_cast<Eigen::Index>(condition.count());
  const auto d = static_cast<Eigen::Index>(condition.dim());
  ConditionalMoments out;
  out.fake = {row_mean(fake), Matrix::Zero(d, d), fake.count()};
  out.real = {row_mean(real), Matrix::Zero(d, d), real.count()};
  out.condition = {row_mean(condition), Matrix::Zero(d, d), condition.count()};
  Matrix c_fc = Matrix::Zero(d, d);
  Matrix c_rc = Matrix::Zero(d, d);

  // Single pass over the rows: each block is converted and centered once.
  for (Eigen::Index b = 0; b < n; b += kBlockRows) {
    const Eigen::Index rows = std::min(kBlockRows, n - b);
    const Matrix f = centered_block(fake, b, rows, out.fake.mean);
    const Matrix r = centered_block(real, b, rows, out.real.mean);
    const Matrix c = centered_block(condition, b, rows, out.condition.mean);
    out.fake.cov.selfadjointView<Eigen::Lower>().rankUpdate(f.transpose());
    out.real.cov.selfadjointView<Eigen::Lower>().rankUpdate(r.transpose());
    out.condition.cov.selfadjointView<Eigen::Lower>().rankUpdate(c.transpose());
    c_fc.noalias() += f.transpose() * c;
    c_rc.noalias() += r.transpose() * c;
  }
  const double denom = static_cast<double>(n - 1);
  for (GaussianSummary* g : {&out.fake, &out.real, &out.condition}) {
    g->cov.triangularView<Eigen::StrictlyUpper>() = g->cov.transpose();
    g->cov /= denom;
  }
  c_fc /= denom;
  c_rc /= denom;

  auto& cs = out.conditional;
  cs.ridge_used = ridge_epsilon(out.condition.cov, ridge_scale);
  cs.cond_cov_fake = conditional_covariance(out.fake.cov, c_fc, out.condition.cov, ridge_scale);
  cs.cond_cov_real = conditional_covariance(out.real.cov, c_rc, out.condition.cov, ridge_scale);
  cs.coeff_fake = regression_coefficients(c_fc, out.condition.cov, ridge_scale);
  cs.coeff_real = regression_coefficients(c_rc, out.condition.cov, ridge_scale);
  return out;
}

}  // namespace semdist
