#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace semdist {

/// Adversarial gradient delta_a and semantic gradient delta_s of one step.
struct GradientPair {
  Eigen::VectorXd delta_a;
  Eigen::VectorXd delta_s;
};

struct ProjectionResult {
  Eigen::VectorXd projected;
  bool conflicted = false;
  double inner_before = 0.0;  // <delta_a, delta_s>
  double inner_after = 0.0;   // <delta_a, projected>
};

// When the semantic gradient gets re-projected.
//  on_conflict: <delta_a, delta_s> < 0; the result is the nearest vector with
//    a non-negative inner product against delta_a.
//  paper_sign: <delta_a, delta_s> >= 0, with the constraint gradient negated;
//    the aligned component is removed instead. Kept for literal replication.
enum class ProjectionTrigger { on_conflict, paper_sign };

// Closed-form single-constraint projection.
ProjectionResult project(const GradientPair& pair,
                         ProjectionTrigger trigger = ProjectionTrigger::on_conflict);

// Same projection computed through the dual quadratic program
//   min_v 1/2 v^T (G G^T) v + delta_s^T G^T v,  v >= 0,   result = G^T v + delta_s
// with G = delta_a^T (or -delta_a^T under paper_sign).
ProjectionResult project_qp(const GradientPair& pair,
                            ProjectionTrigger trigger = ProjectionTrigger::on_conflict);

struct QpSolution {
  Eigen::VectorXd projected;
  Eigen::VectorXd multipliers;
  std::size_t sweeps = 0;
  double kkt_residual = 0.0;
};

// Multi-constraint form: nearest vector to `gradient` with non-negative inner
// product against every row of `constraints`. Projected coordinate descent on
// the dual; throws numerical if the KKT residual is not below tolerance
// within 10 * max(dim, constraint count) sweeps.
QpSolution project_onto_constraints(const Eigen::VectorXd& gradient, const Eigen::MatrixXd& constraints,
                                    double tolerance = 1e-12);

// Element-wise project(); failures are rethrown with the pair index.
std::vector<ProjectionResult> batched_project(std::span<const GradientPair> pairs,
                                              ProjectionTrigger trigger = ProjectionTrigger::on_conflict);

}  // namespace semdist
