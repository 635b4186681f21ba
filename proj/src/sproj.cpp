#include "semdist/sproj.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "semdist/error.hpp"

namespace semdist {
namespace {

void validate(const GradientPair& pair) {
  if (pair.delta_a.size() != pair.delta_s.size()) {
    throw Error(ErrorKind::shape_mismatch, "gradient dimensions differ: " + std::to_string(pair.delta_a.size()) +
                                               " vs " + std::to_string(pair.delta_s.size()));
  }
  if (!pair.delta_a.allFinite() || !pair.delta_s.allFinite()) {
    throw Error(ErrorKind::invalid_data, "gradients must be finite");
  }
  if (pair.delta_a.squaredNorm() == 0.0) {
    throw Error(ErrorKind::invalid_argument, "adversarial gradient is the zero vector");
  }
}

bool triggered(double inner, ProjectionTrigger trigger) {
  return trigger == ProjectionTrigger::on_conflict ? inner < 0.0 : inner >= 0.0;
}

}  // namespace

ProjectionResult project(const GradientPair& pair, ProjectionTrigger trigger) {
  validate(pair);
  const auto& a = pair.delta_a;
  ProjectionResult out;
  out.inner_before = a.dot(pair.delta_s);
  out.conflicted = triggered(out.inner_before, trigger);
  out.projected = pair.delta_s;
  const double a2 = a.squaredNorm();
  if (out.conflicted) {
    out.projected -= (out.inner_before / a2) * a;
    // Rounding can leave a residue along delta_a that is large relative to a
    // small result. Refinement passes remove it until it has the right sign;
    // the step doubles each pass because an exact correction of a residue
    // near one ulp often rounds to a no-op.
    double step = 1.0;
    for (int pass = 0; pass < 64; ++pass, step *= 2.0) {
      const double residue = a.dot(out.projected);
      if (residue == 0.0 || (trigger == ProjectionTrigger::on_conflict) == (residue > 0.0)) break;
      out.projected -= (step * residue / a2) * a;
    }
  }
  out.inner_after = a.dot(out.projected);
  return out;
}

QpSolution project_onto_constraints(const Eigen::VectorXd& gradient, const Eigen::MatrixXd& constraints,
                                    double tolerance) {
  if (constraints.cols() != gradient.size()) {
    throw Error(ErrorKind::shape_mismatch, "constraint rows must match the gradient dimension");
  }
  const Eigen::Index m = constraints.rows();
  QpSolution sol;
  sol.multipliers = Eigen::VectorXd::Zero(m);
  if (m == 0) {
    sol.projected = gradient;
    return sol;
  }

  const Eigen::MatrixXd p = constraints * constraints.transpose();
  const Eigen::VectorXd q = constraints * gradient;
  if (p.diagonal().minCoeff() <= 0.0) throw Error(ErrorKind::invalid_argument, "zero constraint gradient");

  const double scale = std::max({1.0, q.cwiseAbs().maxCoeff(), p.diagonal().maxCoeff()});
  auto kkt_residual = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& grad) {
    double r = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      r = std::max(r, v(i) > 0.0 ? std::abs(grad(i)) : std::max(0.0, -grad(i)));
    }
    return r;
  };

  Eigen::VectorXd& v = sol.multipliers;
  Eigen::VectorXd grad = q;  // P v + q
  const std::size_t max_sweeps = 10 * static_cast<std::size_t>(std::max<Eigen::Index>(gradient.size(), m));
  sol.kkt_residual = kkt_residual(v, grad);
  while (sol.kkt_residual > tolerance * scale) {
    if (sol.sweeps == max_sweeps) {
      throw Error(ErrorKind::numerical, "projection QP did not converge (KKT residual " +
                                            std::to_string(sol.kkt_residual) + ")");
    }
    for (Eigen::Index i = 0; i < m; ++i) {
      const double updated = std::max(0.0, v(i) - grad(i) / p(i, i));
      const double step = updated - v(i);
      if (step != 0.0) {
        v(i) = updated;
        grad += step * p.col(i);
      }
    }
    ++sol.sweeps;
    sol.kkt_residual = kkt_residual(v, grad);
  }
  sol.projected = constraints.transpose() * v + gradient;
  return sol;
}

ProjectionResult project_qp(const GradientPair& pair, ProjectionTrigger trigger) {
  validate(pair);
  const double sign = trigger == ProjectionTrigger::on_conflict ? 1.0 : -1.0;
  const Eigen::MatrixXd constraint = sign * pair.delta_a.transpose();
  const QpSolution sol = project_onto_constraints(pair.delta_s, constraint);

  ProjectionResult out;
  out.inner_before = pair.delta_a.dot(pair.delta_s);
  out.conflicted = triggered(out.inner_before, trigger);
  out.projected = sol.projected;
  out.inner_after = pair.delta_a.dot(out.projected);
  return out;
}

std::vector<ProjectionResult> batched_project(std::span<const GradientPair> pairs, ProjectionTrigger trigger) {
  std::vector<ProjectionResult> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0 && pairs[i].delta_a.size() != pairs[0].delta_a.size()) {
      throw Error(ErrorKind::shape_mismatch, "pair " + std::to_string(i) + ": dimension differs from pair 0");
    }
    try {
      out.push_back(project(pairs[i], trigger));
    } catch (const Error& e) {
      throw Error(e.kind(), "pair " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace semdist
