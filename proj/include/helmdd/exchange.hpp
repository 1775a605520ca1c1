#pragma once

// The exchange operator Pi: reflection across the single-trace subspace in
// the t_h geometry, realized by one SPD solve on the skeleton.

#include <Eigen/Dense>

#include "helmdd/impedance.hpp"
#include "helmdd/skeleton.hpp"

namespace helmdd {

/// Skeleton coefficients of the t_h-orthogonal projection of q onto the
/// single-trace space: v = T_Sigma^-1 sum_j Q_j^* T_j q_j.
inline Eigen::VectorXcd project_single_trace_coefficients(const SkeletonMap& skeleton,
                                                          const ImpedanceMatrices& imp,
                                                          const MultiTrace& q) {
  Eigen::VectorXcd g = Eigen::VectorXcd::Zero(skeleton.n_sigma);
  for (int j = 0; j < q.num_blocks(); ++j)
    g += skeleton.inject_adjoint(j, linsolve::apply_real(imp.t_blocks[j], q.blocks[j]));
  return imp.t_sigma_chol.solve(g);
}

/// Pi(q) = -q + 2p with p the t_h-orthogonal projection onto V_h(Sigma).
/// Involution and isometry for the t_h scalar product.
inline MultiTrace apply_pi(const SkeletonMap& skeleton, const ImpedanceMatrices& imp,
                           const MultiTrace& q) {
  const Eigen::VectorXcd v = project_single_trace_coefficients(skeleton, imp, q);
  MultiTrace out = q;
  for (int j = 0; j < q.num_blocks(); ++j)
    out.blocks[j] = -q.blocks[j] + 2.0 * skeleton.restrict_to(j, v);
  return out;
}

/// (q + Pi(q))/2: the projection itself; idempotent, output single-trace.
inline MultiTrace project_single_trace(const SkeletonMap& skeleton, const ImpedanceMatrices& imp,
                                       const MultiTrace& q) {
  const Eigen::VectorXcd v = project_single_trace_coefficients(skeleton, imp, q);
  MultiTrace out = q;
  for (int j = 0; j < q.num_blocks(); ++j) out.blocks[j] = skeleton.restrict_to(j, v);
  return out;
}

}  // namespace helmdd
