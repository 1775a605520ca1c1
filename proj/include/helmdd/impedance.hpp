#pragma once

// The four impedance scalar products on subdomain boundaries: Despres surface
// mass (M), second-order surface differential (K), screened hypersingular
// integral operator (W), and Schur-complement harmonic-extension energy
// (Lambda); the skeleton Gram matrix T_Sigma and the t_h inner product.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "helmdd/assembly.hpp"
#include "helmdd/bessel.hpp"
#include "helmdd/linsolve.hpp"
#include "helmdd/skeleton.hpp"

namespace helmdd {

enum class ImpedanceKind { Despres, SecondOrder, Hypersingular, Schur };

inline ImpedanceKind parse_impedance_kind(const std::string& name) {
  if (name == "M" || name == "despres") return ImpedanceKind::Despres;
  if (name == "K" || name == "second-order") return ImpedanceKind::SecondOrder;
  if (name == "W" || name == "hypersingular") return ImpedanceKind::Hypersingular;
  if (name == "Lambda" || name == "lambda" || name == "schur") return ImpedanceKind::Schur;
  throw std::invalid_argument("unknown impedance: " + name + " (expected M, K, W or Lambda)");
}

inline std::string impedance_name(ImpedanceKind kind) {
  switch (kind) {
    case ImpedanceKind::Despres: return "M";
    case ImpedanceKind::SecondOrder: return "K";
    case ImpedanceKind::Hypersingular: return "W";
    case ImpedanceKind::Schur: return "Lambda";
  }
  return "?";
}

struct ImpedanceSpec {
  ImpedanceKind kind = ImpedanceKind::Despres;
  double kappa_ref = 1.0;  // M
  double a = 1.0;          // K and W
  double b = 1.0;          // K
  double delta = 1.0;      // W

  static ImpedanceSpec despres(double kappa_ref) {
    ImpedanceSpec spec;
    spec.kind = ImpedanceKind::Despres;
    spec.kappa_ref = kappa_ref;
    spec.validate();
    return spec;
  }
  static ImpedanceSpec second_order(double a, double b) {
    ImpedanceSpec spec;
    spec.kind = ImpedanceKind::SecondOrder;
    spec.a = a;
    spec.b = b;
    spec.validate();
    return spec;
  }
  static ImpedanceSpec hypersingular(double a, double delta) {
    ImpedanceSpec spec;
    spec.kind = ImpedanceKind::Hypersingular;
    spec.a = a;
    spec.delta = delta;
    spec.validate();
    return spec;
  }
  static ImpedanceSpec schur() {
    ImpedanceSpec spec;
    spec.kind = ImpedanceKind::Schur;
    return spec;
  }

  /// Parameter choices used throughout the experiments: kappa_R = kappa for M,
  /// a = 1/(2 kappa), b = kappa for K, a = kappa^2, delta = 1/kappa for W.
  static ImpedanceSpec standard(ImpedanceKind kind, double kappa) {
    switch (kind) {
      case ImpedanceKind::Despres: return despres(kappa);
      case ImpedanceKind::SecondOrder: return second_order(1.0 / (2.0 * kappa), kappa);
      case ImpedanceKind::Hypersingular: return hypersingular(kappa * kappa, 1.0 / kappa);
      case ImpedanceKind::Schur: return schur();
    }
    throw std::invalid_argument("unknown impedance kind");
  }

  void validate() const {
    switch (kind) {
      case ImpedanceKind::Despres:
        if (!(kappa_ref > 0.0)) throw std::invalid_argument("impedance M: kappa_ref must be positive");
        break;
      case ImpedanceKind::SecondOrder:
        if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("impedance K: a, b must be positive");
        break;
      case ImpedanceKind::Hypersingular:
        if (!(a > 0.0) || !(delta > 0.0)) throw std::invalid_argument("impedance W: a, delta must be positive");
        break;
      case ImpedanceKind::Schur:
        break;
    }
  }

  std::string name() const { return impedance_name(kind); }
};

/// T_j = kappa_R x P1 boundary mass on Gamma_j.
inline Eigen::MatrixXd build_despres(const Mesh& mesh, const SubdomainSpace& space, double kappa_ref) {
  if (!(kappa_ref > 0.0)) throw std::invalid_argument("impedance M: kappa_ref must be positive");
  const int n = space.num_boundary_dofs();
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  for (const auto& edge : space.boundary_edges) {
    const double len = (mesh.nodes[edge.global_b] - mesh.nodes[edge.global_a]).norm();
    t(edge.a, edge.a) += kappa_ref * len / 3.0;
    t(edge.b, edge.b) += kappa_ref * len / 3.0;
    t(edge.a, edge.b) += kappa_ref * len / 6.0;
    t(edge.b, edge.a) += kappa_ref * len / 6.0;
  }
  return t;
}

/// T_j = a x tangential P1 stiffness + b x boundary mass on Gamma_j.
inline Eigen::MatrixXd build_second_order(const Mesh& mesh, const SubdomainSpace& space, double a,
                                          double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("impedance K: a, b must be positive");
  const int n = space.num_boundary_dofs();
  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  for (const auto& edge : space.boundary_edges) {
    const double len = (mesh.nodes[edge.global_b] - mesh.nodes[edge.global_a]).norm();
    const double stiff = a / len;
    t(edge.a, edge.a) += stiff + b * len / 3.0;
    t(edge.b, edge.b) += stiff + b * len / 3.0;
    t(edge.a, edge.b) += -stiff + b * len / 6.0;
    t(edge.b, edge.a) += -stiff + b * len / 6.0;
  }
  return t;
}

namespace detail {

// Kernel values beyond this argument of K0 are below 1e-18 and are dropped.
inline constexpr double kKernelCutoff = 40.0;

inline double point_segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                                     const Eigen::Vector2d& b) {
  const Eigen::Vector2d d = b - a;
  const double s = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
  return (p - (a + s * d)).norm();
}

inline double segment_segment_distance(const Eigen::Vector2d& a1, const Eigen::Vector2d& a2,
                                       const Eigen::Vector2d& b1, const Eigen::Vector2d& b2) {
  return std::min(std::min(point_segment_distance(a1, b1, b2), point_segment_distance(a2, b1, b2)),
                  std::min(point_segment_distance(b1, a1, a2), point_segment_distance(b2, a1, a2)));
}

// int_0^1 K0(alpha u) F_w(u) du for several weights at once, by geometric
// composite Gauss toward u = 0 with log subtraction on the innermost cell.
template <std::size_t NW, class F>
std::array<double, NW> integrate_k0_line(double alpha, const F& weights) {
  std::array<double, NW> acc{};
  // Innermost cell [0, h0] with alpha h0 <= 2 so the subtracted series is tame.
  int levels = 0;
  double h0 = 1.0;
  while (alpha * h0 > 2.0 && levels < 60) {
    h0 *= 0.5;
    ++levels;
  }
  // Outer cells [h0 2^m, h0 2^(m+1)], plain Gauss (kernel analytic there).
  double lo = h0;
  for (int m = 0; m < levels; ++m) {
    const double hi = 2.0 * lo;
    const double width = hi - lo;
    for (int q = 0; q < 8; ++q) {
      const double u = lo + width * quad::kGauss8X[q];
      if (alpha * u > kKernelCutoff) continue;
      const double k0 = bessel_k0(alpha * u) * width * quad::kGauss8W[q];
      const auto w = weights(u);
      for (std::size_t i = 0; i < NW; ++i) acc[i] += k0 * w[i];
    }
    lo = hi;
  }
  // Innermost cell: K0(alpha u) = S(alpha u) - log(alpha u) I0(alpha u).
  const double log_ah = std::log(alpha * h0);
  for (int q = 0; q < 8; ++q) {
    const double v = quad::kGauss8X[q];
    const double u = h0 * v;
    const double z = alpha * u;
    const double smooth = bessel_k0_log_subtracted(z) - log_ah * bessel_i0(z);
    const double c = smooth * h0 * quad::kGauss8W[q];
    const auto w = weights(u);
    for (std::size_t i = 0; i < NW; ++i) acc[i] += c * w[i];
  }
  for (int q = 0; q < 8; ++q) {
    const double v = quad::kLogGauss8X[q];
    const double u = h0 * v;
    // The -log(v) part of -log(alpha u), with the log-weighted Gauss rule.
    const double c = bessel_i0(alpha * u) * h0 * quad::kLogGauss8W[q];
    const auto w = weights(u);
    for (std::size_t i = 0; i < NW; ++i) acc[i] += c * w[i];
  }
  return acc;
}

struct WEdge {
  Eigen::Vector2d pa, pb;
  Eigen::Vector2d tangent;
  double len;
  int dof_a, dof_b;
};

// Moments m_w = int int (1/2pi) K0(|x-y|/delta) w(s,t) ds dt over the unit
// parameter square, w in {1, s, t, st}.
using Moments = std::array<double, 4>;

inline Moments self_pair_moments(const WEdge& e, double delta) {
  // Reduce to 1D: the integrand depends on u = |s - t| with polynomial line
  // averages W_w(u).
  const double alpha = e.len / delta;
  auto weights = [](double u) -> Moments {
    const double a = 1.0 - u;
    return {2.0 * a, a, a, 2.0 * a * a * a / 3.0 + u * a * a};
  };
  Moments m = integrate_k0_line<4>(alpha, weights);
  for (double& v : m) v /= 2.0 * M_PI;
  return m;
}

// Shared endpoint at parameter 0 on both (after flips handled by caller via
// the coordinate maps s_of, t_of). Duffy split with the 1D composite rule in
// the radial variable.
template <class SMap, class TMap>
Moments adjacent_pair_moments(const Eigen::Vector2d& leg_e, const Eigen::Vector2d& leg_f,
                              double delta, const SMap& s_of, const TMap& t_of) {
  Moments total{};
  for (int tri = 0; tri < 2; ++tri) {
    for (int qw = 0; qw < 8; ++qw) {
      const double w = quad::kGauss8X[qw];
      const double ww = quad::kGauss8W[qw];
      // (s', t') = (v, v w) on the first triangle, (v w, v) on the second.
      const Eigen::Vector2d dir = (tri == 0) ? (leg_e - w * leg_f).eval() : (w * leg_e - leg_f).eval();
      const double rho = dir.norm();
      if (rho == 0.0) continue;
      const double alpha = rho / delta;
      auto weights = [&](double v) -> Moments {
        const double sp = (tri == 0) ? v : v * w;
        const double tp = (tri == 0) ? v * w : v;
        const double s = s_of(sp), t = t_of(tp);
        return {v, v * s, v * t, v * s * t};  // Duffy Jacobian v included
      };
      const Moments part = integrate_k0_line<4>(alpha, weights);
      for (int i = 0; i < 4; ++i) total[i] += ww * part[i];
    }
  }
  for (double& v : total) v /= 2.0 * M_PI;
  return total;
}

inline Moments disjoint_pair_moments(const WEdge& e, const WEdge& f, double delta, int depth) {
  const int cells = 1 << depth;
  Moments m{};
  for (int ci = 0; ci < cells; ++ci)
    for (int cj = 0; cj < cells; ++cj)
      for (int qi = 0; qi < 8; ++qi)
        for (int qj = 0; qj < 8; ++qj) {
          const double s = (ci + quad::kGauss8X[qi]) / cells;
          const double t = (cj + quad::kGauss8X[qj]) / cells;
          const Eigen::Vector2d x = e.pa + s * (e.pb - e.pa);
          const Eigen::Vector2d y = f.pa + t * (f.pb - f.pa);
          const double z = (x - y).norm() / delta;
          if (z > kKernelCutoff) continue;
          const double c =
              bessel_k0(z) / (2.0 * M_PI) * quad::kGauss8W[qi] * quad::kGauss8W[qj] / (cells * cells);
          m[0] += c;
          m[1] += c * s;
          m[2] += c * t;
          m[3] += c * s * t;
        }
  return m;
}

// Scatter the moment block of an edge pair into T. The bilinear form is
// a int int G_delta [ p'(x) q'(y) + delta^-2 tau(x).tau(y) p(x) q(y) ].
inline void scatter_w_block(Eigen::MatrixXd& t, const WEdge& e, const WEdge& f, const Moments& m,
                            double a, double delta) {
  const double tau_dot = e.tangent.dot(f.tangent);
  const double arc = e.len * f.len;
  // Hat-function products expanded in the {1, s, t, st} moment basis.
  const double phi_aa = m[0] - m[1] - m[2] + m[3];
  const double phi_ab = m[2] - m[3];
  const double phi_ba = m[1] - m[3];
  const double phi_bb = m[3];
  const double mass = a * tau_dot * arc / (delta * delta);
  // Arclength derivatives are -1/len, +1/len; the ds dt factors cancel them.
  const double deriv = a * m[0];
  const int dofs_e[2] = {e.dof_a, e.dof_b};
  const int dofs_f[2] = {f.dof_a, f.dof_b};
  const double phi[2][2] = {{phi_aa, phi_ab}, {phi_ba, phi_bb}};
  const double sign[2] = {-1.0, 1.0};
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      t(dofs_e[i], dofs_f[j]) += sign[i] * sign[j] * deriv + mass * phi[i][j];
}

}  // namespace detail

/// Galerkin matrix of the screened hypersingular form on Gamma_j with the 2D
/// kernel (1/2pi) K0(|x-y|/delta); weakly singular pairs use log-subtracted
/// composite rules, far pairs a tensor Gauss rule with distance cutoff.
inline Eigen::MatrixXd build_hypersingular(const Mesh& mesh, const SubdomainSpace& space, double a,
                                           double delta) {
  if (!(a > 0.0) || !(delta > 0.0)) throw std::invalid_argument("impedance W: a, delta must be positive");
  const int n = space.num_boundary_dofs();

  // The boundary of a resolved subdomain is a union of closed polylines:
  // every boundary dof must have as many incoming as outgoing directed edges.
  {
    std::vector<int> degree(n, 0);
    for (const auto& edge : space.boundary_edges) {
      ++degree[edge.a];
      --degree[edge.b];
    }
    for (int k = 0; k < n; ++k)
      if (degree[k] != 0) throw std::invalid_argument("impedance W: boundary polyline is not closed");
  }

  std::vector<detail::WEdge> edges;
  edges.reserve(space.boundary_edges.size());
  for (const auto& edge : space.boundary_edges) {
    detail::WEdge we;
    we.pa = mesh.nodes[edge.global_a];
    we.pb = mesh.nodes[edge.global_b];
    we.len = (we.pb - we.pa).norm();
    we.tangent = (we.pb - we.pa) / we.len;
    we.dof_a = edge.a;
    we.dof_b = edge.b;
    edges.push_back(we);
  }

  Eigen::MatrixXd t = Eigen::MatrixXd::Zero(n, n);
  const int ne = static_cast<int>(edges.size());
  for (int ie = 0; ie < ne; ++ie) {
    for (int jf = ie; jf < ne; ++jf) {
      const auto& e = edges[ie];
      const auto& f = edges[jf];
      detail::Moments m;
      if (ie == jf) {
        m = detail::self_pair_moments(e, delta);
      } else {
        // Shared endpoint? (conformity excludes sharing both)
        int shared = -1;  // 0: e.a==f.a, 1: e.a==f.b, 2: e.b==f.a, 3: e.b==f.b
        if (e.dof_a == f.dof_a) shared = 0;
        else if (e.dof_a == f.dof_b) shared = 1;
        else if (e.dof_b == f.dof_a) shared = 2;
        else if (e.dof_b == f.dof_b) shared = 3;
        if (shared >= 0) {
          const bool e_flip = (shared == 2 || shared == 3);  // shared point at s=1
          const bool f_flip = (shared == 1 || shared == 3);
          const Eigen::Vector2d leg_e = e_flip ? (e.pa - e.pb).eval() : (e.pb - e.pa).eval();
          const Eigen::Vector2d leg_f = f_flip ? (f.pa - f.pb).eval() : (f.pb - f.pa).eval();
          auto s_of = [e_flip](double sp) { return e_flip ? 1.0 - sp : sp; };
          auto t_of = [f_flip](double tp) { return f_flip ? 1.0 - tp : tp; };
          m = detail::adjacent_pair_moments(leg_e, leg_f, delta, s_of, t_of);
        } else {
          const double dist = detail::segment_segment_distance(e.pa, e.pb, f.pa, f.pb);
          if (dist / delta > detail::kKernelCutoff) continue;
          int depth = 0;
          const double scale = std::max(e.len, f.len);
          if (dist < 0.25 * scale) depth = 2;
          else if (dist < 0.5 * scale) depth = 1;
          m = detail::disjoint_pair_moments(e, f, delta, depth);
        }
      }
      detail::scatter_w_block(t, e, f, m, a, delta);
      if (jf != ie) {
        // The transposed pair has moments with s and t swapped.
        const detail::Moments mt = {m[0], m[2], m[1], m[3]};
        detail::scatter_w_block(t, f, e, mt, a, delta);
      }
    }
  }
  // Symmetrize away quadrature roundoff.
  t = 0.5 * (t + t.transpose()).eval();
  return t;
}

/// Schur-complement impedance: T_j = H_BB - H_BI H_II^-1 H_IB for the
/// kappa_inf-weighted H1 matrix H; the harmonic-extension energy of the trace.
inline Eigen::MatrixXd build_schur(const Mesh& mesh, const SubdomainSpace& space, double kappa_inf) {
  const SparseMatrixXd h = h1_matrix(mesh, space, kappa_inf);
  const int n = space.num_volume_dofs();
  const int nb = space.num_boundary_dofs();

  std::vector<int> role(n, -1);  // boundary dof index, or -(interior index)-2
  for (int k = 0; k < nb; ++k) role[space.boundary_local[k]] = k;
  int ni = 0;
  for (int v = 0; v < n; ++v)
    if (role[v] == -1) role[v] = -(ni++) - 2;

  Eigen::MatrixXd h_bb = Eigen::MatrixXd::Zero(nb, nb);
  Eigen::MatrixXd h_ib = Eigen::MatrixXd::Zero(ni, nb);
  std::vector<Eigen::Triplet<double>> ii_triplets;
  for (int col = 0; col < h.outerSize(); ++col)
    for (SparseMatrixXd::InnerIterator it(h, col); it; ++it) {
      const int r = role[it.row()], c = role[col];
      if (r >= 0 && c >= 0) h_bb(r, c) += it.value();
      else if (r < -1 && c >= 0) h_ib(-r - 2, c) += it.value();
      else if (r < -1 && c < -1) ii_triplets.emplace_back(-r - 2, -c - 2, it.value());
    }

  if (ni == 0) return h_bb;
  SparseMatrixXd h_ii(ni, ni);
  h_ii.setFromTriplets(ii_triplets.begin(), ii_triplets.end());
  const linsolve::SpdCholeskySparse chol(h_ii);
  const Eigen::MatrixXd x = chol.solve(h_ib);
  Eigen::MatrixXd t = h_bb - h_ib.transpose() * x;
  t = 0.5 * (t + t.transpose()).eval();
  return t;
}

inline Eigen::MatrixXd build_impedance_block(const Mesh& mesh, const SubdomainSpace& space,
                                             const ImpedanceSpec& spec, double kappa_inf) {
  switch (spec.kind) {
    case ImpedanceKind::Despres:
      return build_despres(mesh, space, spec.kappa_ref);
    case ImpedanceKind::SecondOrder:
      return build_second_order(mesh, space, spec.a, spec.b);
    case ImpedanceKind::Hypersingular:
      return build_hypersingular(mesh, space, spec.a, spec.delta);
    case ImpedanceKind::Schur:
      return build_schur(mesh, space, kappa_inf);
  }
  throw std::invalid_argument("unknown impedance kind");
}

struct ImpedanceMatrices {
  std::vector<Eigen::MatrixXd> t_blocks;
  Eigen::MatrixXd t_sigma;
  linsolve::SpdCholeskyDense t_sigma_chol;
};

/// T_Sigma = sum_j Q_j^* T_j Q_j with its Cholesky factorization.
inline void assemble_t_sigma(const SkeletonMap& skeleton, ImpedanceMatrices& imp) {
  imp.t_sigma = Eigen::MatrixXd::Zero(skeleton.n_sigma, skeleton.n_sigma);
  for (std::size_t j = 0; j < imp.t_blocks.size(); ++j) {
    const auto& map = skeleton.local_to_sigma[j];
    const auto& t = imp.t_blocks[j];
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) imp.t_sigma(map[r], map[c]) += t(r, c);
  }
  imp.t_sigma_chol = linsolve::SpdCholeskyDense(imp.t_sigma);
}

inline ImpedanceMatrices assemble_impedance(const Mesh& mesh, const std::vector<SubdomainSpace>& spaces,
                                            const SkeletonMap& skeleton, const ImpedanceSpec& spec,
                                            double kappa_inf) {
  ImpedanceMatrices imp;
  for (const auto& space : spaces)
    imp.t_blocks.push_back(build_impedance_block(mesh, space, spec, kappa_inf));
  assemble_t_sigma(skeleton, imp);
  return imp;
}

/// t_h(p, q) = sum_j q_j^* T_j p_j (conjugation on the second argument).
inline Complex th_inner(const std::vector<Eigen::MatrixXd>& t_blocks, const MultiTrace& p,
                        const MultiTrace& q) {
  if (p.num_blocks() != static_cast<int>(t_blocks.size()) || q.num_blocks() != p.num_blocks())
    throw std::invalid_argument("th_inner: block count mismatch");
  Complex sum = 0.0;
  for (int j = 0; j < p.num_blocks(); ++j) {
    if (p.blocks[j].size() != t_blocks[j].rows() || q.blocks[j].size() != t_blocks[j].rows())
      throw std::invalid_argument("th_inner: block length mismatch");
    sum += q.blocks[j].dot(linsolve::apply_real(t_blocks[j], p.blocks[j]));
  }
  return sum;
}

inline double th_norm(const std::vector<Eigen::MatrixXd>& t_blocks, const MultiTrace& p) {
  return std::sqrt(std::max(0.0, std::real(th_inner(t_blocks, p, p))));
}

inline Complex th_inner(const ImpedanceMatrices& imp, const MultiTrace& p, const MultiTrace& q) {
  return th_inner(imp.t_blocks, p, q);
}

inline double th_norm(const ImpedanceMatrices& imp, const MultiTrace& p) {
  return th_norm(imp.t_blocks, p);
}

/// (lambda_minus, lambda_plus): extreme ratios ||w||_th / ||w||_rho over the
/// multi-trace space, from the generalized spectra of (T_j, Schur_j).
inline std::pair<double, double> compute_lambda_bounds(const std::vector<Eigen::MatrixXd>& t_blocks,
                                                       const std::vector<Eigen::MatrixXd>& schur_blocks,
                                                       Eigen::Index size_cap = 6000) {
  if (t_blocks.size() != schur_blocks.size())
    throw std::invalid_argument("compute_lambda_bounds: block count mismatch");
  Eigen::Index total = 0;
  for (const auto& t : t_blocks) total += t.rows();
  if (total > size_cap)
    throw ResourceError("compute_lambda_bounds: multi-trace dimension " + std::to_string(total) +
                        " exceeds cap " + std::to_string(size_cap));
  double lo = std::numeric_limits<double>::max(), hi = 0.0;
  for (std::size_t j = 0; j < t_blocks.size(); ++j) {
    const auto [block_lo, block_hi] = linsolve::dense_sym_generalized_eigs(t_blocks[j], schur_blocks[j]);
    lo = std::min(lo, block_lo);
    hi = std::max(hi, block_hi);
  }
  return {std::sqrt(lo), std::sqrt(hi)};
}

}  // namespace helmdd
