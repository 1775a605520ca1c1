#pragma once

// The optimized Schwarz engine: factorized local Robin problems, the
// scattering operator S_h, the skeleton operator Id + Pi S_h with its
// right-hand side, Richardson and restarted-GMRES drivers, volume
// reconstruction, and the gamma_h spectral diagnostic.

#include <Eigen/Dense>
#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "helmdd/assembly.hpp"
#include "helmdd/exchange.hpp"
#include "helmdd/impedance.hpp"
#include "helmdd/linsolve.hpp"
#include "helmdd/skeleton.hpp"

namespace helmdd {

/// Factorization of A_j - i B_j^* T_j B_j, reused across iterations.
class RobinOperator {
 public:
  RobinOperator(const LocalProblem& local, const Eigen::MatrixXd& t_block)
      : space_(&local.space), t_(&t_block), factor_(build_matrix(local, t_block)) {}

  /// (A_j - i B^* T B)^-1 rhs.
  Eigen::VectorXcd solve(const Eigen::VectorXcd& rhs) const { return factor_.solve(rhs); }

  /// B^* T p lifted to volume dofs.
  Eigen::VectorXcd lift_impedance(const Eigen::VectorXcd& p) const {
    return space_->inject(linsolve::apply_real(*t_, p));
  }

  const SubdomainSpace& space() const { return *space_; }
  const Eigen::MatrixXd& t_block() const { return *t_; }

 private:
  static SparseMatrixXcd build_matrix(const LocalProblem& local, const Eigen::MatrixXd& t_block) {
    const int nb = local.space.num_boundary_dofs();
    std::vector<Eigen::Triplet<Complex>> triplets;
    triplets.reserve(local.a.nonZeros() + nb * nb);
    for (int col = 0; col < local.a.outerSize(); ++col)
      for (SparseMatrixXcd::InnerIterator it(local.a, col); it; ++it)
        triplets.emplace_back(it.row(), col, it.value());
    const Complex minus_i(0.0, -1.0);
    for (int r = 0; r < nb; ++r)
      for (int c = 0; c < nb; ++c)
        if (t_block(r, c) != 0.0)
          triplets.emplace_back(local.space.boundary_local[r], local.space.boundary_local[c],
                                minus_i * t_block(r, c));
    SparseMatrixXcd m(local.space.num_volume_dofs(), local.space.num_volume_dofs());
    m.setFromTriplets(triplets.begin(), triplets.end());
    return m;
  }

  const SubdomainSpace* space_;
  const Eigen::MatrixXd* t_;
  linsolve::SparseLu factor_;
};

/// Everything needed to run the skeleton formulation on one configuration.
/// References to mesh-level inputs must outlive the operator.
class DdmOperator {
 public:
  DdmOperator(const Mesh& mesh, const Partition& partition, const Material& material,
              const Source& source, const ImpedanceSpec& spec)
      : mesh_(&mesh), partition_(&partition), material_(&material) {
    for (int j = 0; j < partition.num_subdomains; ++j)
      locals_.push_back(assemble_local(mesh, partition, j, material, source));
    std::vector<SubdomainSpace> spaces;
    for (const auto& local : locals_) spaces.push_back(local.space);
    skeleton_ = build_skeleton_map(mesh, spaces);
    impedance_ = assemble_impedance(mesh, spaces, skeleton_, spec, material.kappa_inf);
    for (std::size_t j = 0; j < locals_.size(); ++j)
      robin_.emplace_back(locals_[j], impedance_.t_blocks[j]);
  }

  int num_subdomains() const { return static_cast<int>(locals_.size()); }
  const SkeletonMap& skeleton() const { return skeleton_; }
  const ImpedanceMatrices& impedance() const { return impedance_; }
  const std::vector<LocalProblem>& locals() const { return locals_; }
  const RobinOperator& robin(int j) const { return robin_[j]; }
  const Mesh& mesh() const { return *mesh_; }
  const Partition& partition() const { return *partition_; }
  const Material& material() const { return *material_; }

  std::vector<SubdomainSpace> spaces() const {
    std::vector<SubdomainSpace> out;
    for (const auto& local : locals_) out.push_back(local.space);
    return out;
  }

  MultiTrace zero_trace() const { return skeleton_.zero(); }

  MultiTrace apply_pi(const MultiTrace& q) const { return helmdd::apply_pi(skeleton_, impedance_, q); }

  /// S_h p: per-subdomain Robin solve, outgoing trace p_j + 2i B_j w_j.
  MultiTrace apply_scattering(const MultiTrace& p) const {
    const Complex two_i(0.0, 2.0);
    MultiTrace out = p;
    for (int j = 0; j < num_subdomains(); ++j) {
      const Eigen::VectorXcd w = robin_[j].solve(robin_[j].lift_impedance(p.blocks[j]));
      out.blocks[j] = p.blocks[j] + two_i * locals_[j].space.trace(w);
    }
    return out;
  }

  /// One application of Id + Pi S_h, fused as in the matrix-form algorithm:
  /// local solves, local scattering accumulation, one global exchange.
  MultiTrace skeleton_matvec(const MultiTrace& p) const {
    const Complex two_i(0.0, 2.0);
    MultiTrace q = p;
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(skeleton_.n_sigma);
    for (int j = 0; j < num_subdomains(); ++j) {
      const Eigen::VectorXcd u = robin_[j].solve(robin_[j].lift_impedance(p.blocks[j]));
      const Eigen::VectorXcd bu = locals_[j].space.trace(u);
      q.blocks[j] = -two_i * bu;
      g += skeleton_.inject_adjoint(
          j, linsolve::apply_real(impedance_.t_blocks[j], Eigen::VectorXcd(p.blocks[j] + two_i * bu)));
    }
    const Eigen::VectorXcd v = impedance_.t_sigma_chol.solve(g);
    for (int j = 0; j < num_subdomains(); ++j) q.blocks[j] += 2.0 * skeleton_.restrict_to(j, v);
    return q;
  }

  /// Right-hand side of the skeleton equation, equal to -2i Pi(u_*|_Sigma).
  MultiTrace skeleton_rhs() const {
    const Complex two_i(0.0, 2.0);
    MultiTrace b = zero_trace();
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(skeleton_.n_sigma);
    for (int j = 0; j < num_subdomains(); ++j) {
      const Eigen::VectorXcd u = robin_[j].solve(locals_[j].load);
      const Eigen::VectorXcd bu = locals_[j].space.trace(u);
      b.blocks[j] = two_i * bu;
      g += two_i * skeleton_.inject_adjoint(j, linsolve::apply_real(impedance_.t_blocks[j], bu));
    }
    const Eigen::VectorXcd v = impedance_.t_sigma_chol.solve(g);
    for (int j = 0; j < num_subdomains(); ++j) b.blocks[j] -= 2.0 * skeleton_.restrict_to(j, v);
    return b;
  }

  /// u_j = (A_j - i B^* T B)^-1 (B^* T p_j + f_j) for all subdomains.
  std::vector<Eigen::VectorXcd> reconstruct_volume(const MultiTrace& p) const {
    std::vector<Eigen::VectorXcd> u(num_subdomains());
    for (int j = 0; j < num_subdomains(); ++j)
      u[j] = robin_[j].solve(robin_[j].lift_impedance(p.blocks[j]) + locals_[j].load);
    return u;
  }

  Complex th(const MultiTrace& p, const MultiTrace& q) const { return th_inner(impedance_, p, q); }
  double th_norm_of(const MultiTrace& p) const { return th_norm(impedance_, p); }

 private:
  const Mesh* mesh_;
  const Partition* partition_;
  const Material* material_;
  std::vector<LocalProblem> locals_;
  SkeletonMap skeleton_;
  ImpedanceMatrices impedance_;
  std::vector<RobinOperator> robin_;
};

/// Reference solution of the undecomposed problem, restricted per subdomain,
/// with the broken H1 machinery used by the relative error of the runs.
struct Reference {
  std::vector<Eigen::VectorXcd> u_blocks;
  std::shared_ptr<BrokenH1Norm> norm;
  double norm_of_reference = 0.0;

  double relative_error(const std::vector<Eigen::VectorXcd>& u) const {
    return norm->norm_diff(u, u_blocks) / norm_of_reference;
  }
};

inline Reference make_reference(const Mesh& mesh, const std::vector<SubdomainSpace>& spaces,
                                const Material& material, const Eigen::VectorXcd& u_global) {
  Reference ref;
  for (const auto& space : spaces) {
    Eigen::VectorXcd u(space.num_volume_dofs());
    for (int k = 0; k < space.num_volume_dofs(); ++k) u(k) = u_global(space.volume_nodes[k]);
    ref.u_blocks.push_back(std::move(u));
  }
  ref.norm = std::make_shared<BrokenH1Norm>(mesh, spaces, material.kappa_inf);
  ref.norm_of_reference = ref.norm->norm(ref.u_blocks);
  return ref;
}

/// Direct solve of the undecomposed system and restriction per subdomain.
inline Reference compute_reference(const Mesh& mesh, const std::vector<SubdomainSpace>& spaces,
                                   const Material& material, const Source& source) {
  const GlobalProblem global = assemble_global(mesh, material, source);
  const linsolve::SparseLu lu(global.a);
  return make_reference(mesh, spaces, material, lu.solve(global.load));
}

struct SolverConfig {
  double relaxation = 0.5;
  double tol = 1e-8;
  int max_iter = 100000;
  int restart = 20;
  bool error_every_restart_only = false;  // GMRES: sample the volume error per cycle

  void validate() const {
    if (!(relaxation > 0.0) || !(relaxation < 1.0))
      throw std::invalid_argument("solver: relaxation must lie in (0, 1)");
    if (!(tol > 0.0)) throw std::invalid_argument("solver: tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("solver: max_iter must be >= 1");
    if (restart < 1) throw std::invalid_argument("solver: restart must be >= 1");
  }
};

struct IterationRecord {
  int iteration;
  double relative_error;
  double th_residual;
};

struct DDMState {
  MultiTrace p;
  std::vector<Eigen::VectorXcd> u;
  int iterations = 0;
  bool converged = false;
  bool stagnated = false;
  double initial_error = 0.0;
  double final_error = 0.0;
  std::vector<IterationRecord> history;
};

/// Relaxed Richardson iteration on the skeleton equation in its fused
/// matrix form; the volume error is tracked against the direct reference.
inline DDMState richardson_solve(const DdmOperator& op, const SolverConfig& config,
                                 const Reference& reference,
                                 const std::optional<MultiTrace>& initial_p = std::nullopt) {
  config.validate();
  const double r = config.relaxation;
  const Complex two_i(0.0, 2.0);

  DDMState state;
  state.p = initial_p ? *initial_p : op.zero_trace();
  state.u.resize(op.num_subdomains());
  for (int j = 0; j < op.num_subdomains(); ++j)
    state.u[j] = op.robin(j).solve(op.robin(j).lift_impedance(state.p.blocks[j]) + op.locals()[j].load);
  state.initial_error = reference.relative_error(state.u);
  state.final_error = state.initial_error;
  if (state.initial_error <= config.tol) {
    state.converged = true;
    return state;
  }

  const SkeletonMap& skeleton = op.skeleton();
  const ImpedanceMatrices& imp = op.impedance();
  for (int n = 1; n <= config.max_iter; ++n) {
    Eigen::VectorXcd g = Eigen::VectorXcd::Zero(skeleton.n_sigma);
    for (int j = 0; j < op.num_subdomains(); ++j) {
      const Eigen::VectorXcd bu = op.locals()[j].space.trace(state.u[j]);
      g += skeleton.inject_adjoint(
          j, linsolve::apply_real(imp.t_blocks[j], Eigen::VectorXcd(state.p.blocks[j] + two_i * bu)));
    }
    const Eigen::VectorXcd v = imp.t_sigma_chol.solve(g);

    MultiTrace delta = op.zero_trace();
    for (int j = 0; j < op.num_subdomains(); ++j) {
      const Eigen::VectorXcd bu = op.locals()[j].space.trace(state.u[j]);
      delta.blocks[j] = 2.0 * r * (Complex(0.0, 1.0) * bu - skeleton.restrict_to(j, v));
      state.p.blocks[j] += delta.blocks[j];
      state.u[j] = op.robin(j).solve(op.robin(j).lift_impedance(state.p.blocks[j]) + op.locals()[j].load);
    }

    state.iterations = n;
    state.final_error = reference.relative_error(state.u);
    // ||p^n - p^(n-1)||_th / r equals the t_h residual norm at p^(n-1).
    state.history.push_back({n, state.final_error, op.th_norm_of(delta) / r});
    if (state.final_error <= config.tol) {
      state.converged = true;
      break;
    }
  }
  return state;
}

/// Restarted GMRES on the skeleton equation with the Euclidean inner product
/// on concatenated blocks; convergence judged on the volume relative error.
inline DDMState gmres_solve(const DdmOperator& op, const SolverConfig& config,
                            const Reference& reference) {
  config.validate();
  const std::vector<int>& sizes = op.skeleton().block_sizes;

  DDMState state;
  const MultiTrace rhs = op.skeleton_rhs();
  {
    std::vector<Eigen::VectorXcd> u0(op.num_subdomains());
    for (int j = 0; j < op.num_subdomains(); ++j) u0[j] = op.robin(j).solve(op.locals()[j].load);
    state.initial_error = reference.relative_error(u0);
  }

  auto matvec = [&](const Eigen::VectorXcd& x) {
    return op.skeleton_matvec(MultiTrace::unflatten(x, sizes)).flatten();
  };

  auto callback = [&](int iter, const Eigen::VectorXcd& x, const Eigen::VectorXcd& residual) {
    if (config.error_every_restart_only && iter % config.restart != 0) return false;
    const MultiTrace p = MultiTrace::unflatten(x, sizes);
    const std::vector<Eigen::VectorXcd> u = op.reconstruct_volume(p);
    const double err = reference.relative_error(u);
    const double th_res = op.th_norm_of(MultiTrace::unflatten(residual, sizes));
    state.history.push_back({iter, err, th_res});
    return err <= config.tol;
  };

  linsolve::GmresResult result =
      linsolve::gmres(matvec, rhs.flatten(), config.restart, 0.0, config.max_iter, callback);
  state.p = MultiTrace::unflatten(result.x, sizes);
  state.u = op.reconstruct_volume(state.p);
  state.iterations = result.iterations;
  state.stagnated = result.stagnated;
  state.final_error = reference.relative_error(state.u);
  state.converged = state.final_error <= config.tol;
  return state;
}

/// gamma_h = smallest singular value of Id + Pi S_h in the t_h geometry,
/// assembled densely column by column.
inline double estimate_gamma(const DdmOperator& op, Eigen::Index size_cap = 2000) {
  const std::vector<int>& sizes = op.skeleton().block_sizes;
  Eigen::Index dim = 0;
  for (int s : sizes) dim += s;
  if (dim > size_cap)
    throw ResourceError("estimate_gamma: multi-trace dimension " + std::to_string(dim) +
                        " exceeds cap " + std::to_string(size_cap));

  Eigen::MatrixXcd dense(dim, dim);
  for (Eigen::Index c = 0; c < dim; ++c) {
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(dim);
    e(c) = 1.0;
    dense.col(c) = op.skeleton_matvec(MultiTrace::unflatten(e, sizes)).flatten();
  }

  // Convert to the t_h geometry: with blockdiag(T_j) = L L^T, singular values
  // in the t_h norm are those of L^T M L^-T.
  std::vector<Eigen::MatrixXcd> lt_blocks;
  for (const auto& t : op.impedance().t_blocks) {
    const Eigen::LLT<Eigen::MatrixXd> llt(t);
    if (llt.info() != Eigen::Success)
      throw linsolve::SingularMatrixError("estimate_gamma: impedance block is not SPD");
    lt_blocks.emplace_back(Eigen::MatrixXd(llt.matrixL()).transpose().cast<Complex>());
  }
  Eigen::Index at = 0;
  for (std::size_t j = 0; j < lt_blocks.size(); ++j) {
    dense.middleRows(at, sizes[j]) = lt_blocks[j] * dense.middleRows(at, sizes[j]);
    at += sizes[j];
  }
  at = 0;
  for (std::size_t j = 0; j < lt_blocks.size(); ++j) {
    // Right-multiply the block column by L^-T via X = (L^-1 M^T)^T.
    const Eigen::MatrixXcd block = dense.middleCols(at, sizes[j]);
    dense.middleCols(at, sizes[j]) = lt_blocks[j]
                                         .transpose()
                                         .triangularView<Eigen::Lower>()
                                         .solve(block.transpose())
                                         .transpose();
    at += sizes[j];
  }
  return linsolve::dense_min_singular_value(dense);
}

/// Upper bound (1 - r(1-r) gamma_h^2)^(1/2) on the Richardson error
/// contraction factor per iteration.
inline double richardson_rate_bound(double gamma_h, double relaxation) {
  return std::sqrt(std::max(0.0, 1.0 - relaxation * (1.0 - relaxation) * gamma_h * gamma_h));
}

}  // namespace helmdd
