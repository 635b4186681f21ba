#pragma once

// Independent reference computations for tests: straight loops and explicit
// inverses, deliberately sharing no code path with the library.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "semdist/embedding_store.hpp"

namespace semdist::oracle {

inline std::vector<double> mean(const EmbeddingMatrix& m) {
  std::vector<double> mu(m.dim(), 0.0);
  for (std::size_t i = 0; i < m.count(); ++i)
    for (std::size_t j = 0; j < m.dim(); ++j) mu[j] += m.at(i, j);
  for (double& v : mu) v /= static_cast<double>(m.count());
  return mu;
}

inline Eigen::MatrixXd cross_cov(const EmbeddingMatrix& x, const EmbeddingMatrix& y) {
  const auto mx = mean(x);
  const auto my = mean(y);
  const auto d = static_cast<Eigen::Index>(x.dim());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < x.count(); ++i)
    for (std::size_t a = 0; a < x.dim(); ++a)
      for (std::size_t b = 0; b < y.dim(); ++b)
        c(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += (x.at(i, a) - mx[a]) * (y.at(i, b) - my[b]);
  return c / static_cast<double>(x.count() - 1);
}

// C_xx - C_xs C_ss^-1 C_sx with an explicit LU-based inverse.
inline Eigen::MatrixXd conditional_cov(const Eigen::MatrixXd& c_xx, const Eigen::MatrixXd& c_xs,
                                       const Eigen::MatrixXd& c_ss) {
  const Eigen::MatrixXd inv = c_ss.fullPivLu().inverse();
  return c_xx - c_xs * inv * c_xs.transpose();
}

inline double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    dot += double(a[j]) * b[j];
    na += double(a[j]) * a[j];
    nb += double(b[j]) * b[j];
  }
  return dot / std::sqrt(na * nb);
}

// Exhaustive argmax over {ground truth} + candidates; success only if the
// ground truth is the unique maximizer.
inline double r_precision(const EmbeddingMatrix& fake, const EmbeddingMatrix& text, std::span<const Record> records,
                          const std::vector<std::vector<std::size_t>>& candidates) {
  std::size_t hits = 0;
  for (std::size_t q = 0; q < records.size(); ++q) {
    std::vector<std::size_t> pool = {records[q].text};
    pool.insert(pool.end(), candidates[q].begin(), candidates[q].end());
    std::size_t best = 0;
    bool unique = true;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < pool.size(); ++k) {
      const double s = cosine(fake.row(records[q].fake), text.row(pool[k]));
      if (s > best_score) {
        best_score = s;
        best = k;
        unique = true;
      } else if (s == best_score) {
        unique = false;
      }
    }
    if (best == 0 && unique) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(records.size());
}

// Minimizer of ||v - s|| over an n x n grid covering [c - half, c + half]^2,
// restricted to <a, v> >= 0. Returns the best grid point.
inline Eigen::Vector2d grid_projection(const Eigen::Vector2d& a, const Eigen::Vector2d& s, const Eigen::Vector2d& c,
                                       double half, int n) {
  Eigen::Vector2d best = c;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d v(c.x() - half + 2 * half * i / (n - 1), c.y() - half + 2 * half * j / (n - 1));
      if (a.dot(v) < 0) continue;
      const double dist = (v - s).norm();
      if (dist < best_dist) {
        best_dist = dist;
        best = v;
      }
    }
  }
  return best;
}

// Exact ceil(p/q * m) for a ratio given as a fraction.
inline std::size_t ceil_fraction(std::size_t p, std::size_t q, std::size_t m) { return (p * m + q - 1) / q; }

}  // namespace semdist::oracle
