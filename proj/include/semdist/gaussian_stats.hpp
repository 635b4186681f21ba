#pragma once

#include <cstddef>

#include <Eigen/Core>

#include "semdist/embedding_store.hpp"

namespace semdist {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

struct GaussianSummary {
  Vector mean;
  Matrix cov;  // unbiased, divides by n - 1
  std::size_t n = 0;
};

// Moments of a generated set and a reference set, both conditioned on a third
// (aligned) set. For text-to-image evaluation that is fake / real images given
// text; for captioning, fake captions / real captions given real images.
struct ConditionalSummary {
  Matrix cond_cov_fake;  // C_gg|c
  Matrix cond_cov_real;  // C_rr|c
  Matrix coeff_fake;     // C_gc (C_cc + eps I)^-1
  Matrix coeff_real;     // C_rc (C_cc + eps I)^-1
  double ridge_used = 0.0;
};

struct ConditionalMoments {
  GaussianSummary fake;
  GaussianSummary real;
  GaussianSummary condition;
  ConditionalSummary conditional;
};

Vector row_mean(const EmbeddingMatrix& matrix);

GaussianSummary summarize(const EmbeddingMatrix& matrix);

// Unbiased sample cross-covariance E[(x - mx)(y - my)^T], dim x dim.
Matrix cross_covariance(const EmbeddingMatrix& x, const EmbeddingMatrix& y);

// Ridge added to c_ss: ridge_scale * trace(c_ss) / dim.
double ridge_epsilon(const Matrix& c_ss, double ridge_scale);

// c_xx - c_xs (c_ss + eps I)^-1 c_xs^T, symmetrized. Uses a Cholesky
// factorization of the ridged c_ss; throws numerical if it is not PD.
Matrix conditional_covariance(const Matrix& c_xx, const Matrix& c_xs, const Matrix& c_ss,
                              double ridge_scale);

// Regression coefficients c_xs (c_ss + eps I)^-1.
Matrix regression_coefficients(const Matrix& c_xs, const Matrix& c_ss, double ridge_scale);

// Row i is coeff * (conditions[i] - cond_mean).
Matrix conditional_mean_offsets(const Matrix& coeff, const EmbeddingMatrix& conditions,
                                const Vector& cond_mean);

// Symmetric square root through an eigendecomposition. Eigenvalues in
// [-1e-8 * ||a||, 0) are clamped to zero; anything more negative, or an
// asymmetric input, throws numerical.
Matrix matrix_sqrt_psd(const Matrix& a);

// Solves a X = b for SPD a via LLT; throws numerical on non-PD input.
Matrix solve_spd(const Matrix& a, const Matrix& b);

bool is_symmetric(const Matrix& a, double rel_tol = 1e-9);

// All first and second moments needed by the SSD family, from three aligned
// matrices with equal counts (>= 2) and dims.
ConditionalMoments conditional_moments(const EmbeddingMatrix& fake, const EmbeddingMatrix& real,
                                       const EmbeddingMatrix& condition, double ridge_scale);

}  // namespace semdist
