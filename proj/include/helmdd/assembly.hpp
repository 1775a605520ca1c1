#pragma once

// P1 Galerkin assembly of the Helmholtz sesquilinear form with Robin boundary
// condition, per subdomain and globally, with closed-form element matrices.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <complex>
#include <functional>
#include <set>
#include <stdexcept>
#include <vector>

#include "helmdd/bessel.hpp"
#include "helmdd/linsolve.hpp"
#include "helmdd/mesh.hpp"
#include "helmdd/partition.hpp"

namespace helmdd {

struct Material {
  std::vector<double> mu;       // per-element, > 0
  std::vector<Complex> kappa;   // per-element, Re >= 0 and Im >= 0
  double kappa_inf = 1.0;       // max(1, max |kappa|)

  static Material uniform(const Mesh& mesh, Complex kappa, double mu = 1.0) {
    Material mat;
    mat.mu.assign(mesh.triangles.size(), mu);
    mat.kappa.assign(mesh.triangles.size(), kappa);
    mat.kappa_inf = std::max(1.0, std::abs(kappa));
    mat.validate();
    return mat;
  }

  /// Homogeneous wave number, mu = 1 + mu_r inside a centered disk inclusion.
  static Material disk_inclusion(const Mesh& mesh, double kappa, double mu_r,
                                 double inclusion_radius = 0.5) {
    Material mat;
    mat.mu.resize(mesh.triangles.size());
    mat.kappa.assign(mesh.triangles.size(), Complex(kappa, 0.0));
    for (int t = 0; t < mesh.num_triangles(); ++t)
      mat.mu[t] = mesh.centroid(t).norm() < inclusion_radius ? 1.0 + mu_r : 1.0;
    mat.kappa_inf = std::max(1.0, std::abs(kappa));
    mat.validate();
    return mat;
  }

  void validate() const {
    for (double m : mu)
      if (!(m > 0.0)) throw std::invalid_argument("material: mu must be positive");
    for (const Complex& k : kappa)
      if (k.real() < 0.0 || k.imag() < 0.0)
        throw std::invalid_argument("material: kappa must have Re >= 0 and Im >= 0");
  }
};

struct Source {
  std::vector<Complex> f;  // per-element constant; empty means zero
  // Robin data evaluated at edge quadrature points with the outward normal.
  std::function<Complex(const Eigen::Vector2d&, const Eigen::Vector2d&)> g;
};

/// g = (mu d_n - i kappa) u_inc for the incident plane wave exp(i kappa d.x),
/// with mu = 1 on the physical boundary.
inline Source make_plane_wave_source(double kappa, const Eigen::Vector2d& direction = {1.0, 0.0}) {
  Source source;
  const Eigen::Vector2d d = direction.normalized();
  source.g = [kappa, d](const Eigen::Vector2d& x, const Eigen::Vector2d& n) {
    const Complex i(0.0, 1.0);
    return i * kappa * (d.dot(n) - 1.0) * std::exp(i * kappa * d.dot(x));
  };
  return source;
}

/// DOF bookkeeping of one subdomain: volume nodes, boundary trace and the
/// directed boundary polyline (interior kept on the left).
struct SubdomainSpace {
  int subdomain = 0;
  std::vector<int> elements;
  std::vector<int> volume_nodes;       // ascending global node ids
  std::vector<int> node_local;         // global node id -> local volume dof or -1
  std::vector<int> boundary_nodes;     // ascending global node ids on Gamma_j
  std::vector<int> boundary_local;     // boundary dof -> local volume dof

  struct BoundaryEdge {
    int a, b;              // boundary dof indices, directed
    int global_a, global_b;
    int element;           // unique incident owned triangle
    bool on_physical_boundary;
  };
  std::vector<BoundaryEdge> boundary_edges;

  int num_volume_dofs() const { return static_cast<int>(volume_nodes.size()); }
  int num_boundary_dofs() const { return static_cast<int>(boundary_nodes.size()); }

  /// B_j u: restrict a volume vector to boundary trace coefficients.
  Eigen::VectorXcd trace(const Eigen::VectorXcd& u) const {
    Eigen::VectorXcd w(num_boundary_dofs());
    for (int k = 0; k < num_boundary_dofs(); ++k) w(k) = u(boundary_local[k]);
    return w;
  }

  /// B_j^* w: scatter boundary coefficients into a volume vector.
  Eigen::VectorXcd inject(const Eigen::VectorXcd& w) const {
    Eigen::VectorXcd u = Eigen::VectorXcd::Zero(num_volume_dofs());
    for (int k = 0; k < num_boundary_dofs(); ++k) u(boundary_local[k]) = w(k);
    return u;
  }
};

inline SubdomainSpace build_subdomain_space(const Mesh& mesh, const Partition& partition, int j) {
  if (j < 0 || j >= partition.num_subdomains)
    throw std::invalid_argument("subdomain index out of range");
  SubdomainSpace space;
  space.subdomain = j;
  for (int t = 0; t < mesh.num_triangles(); ++t)
    if (partition.element_owner[t] == j) space.elements.push_back(t);
  if (space.elements.empty())
    throw std::invalid_argument("subdomain " + std::to_string(j + 1) + " owns no elements");

  space.node_local.assign(mesh.num_nodes(), -1);
  for (int t : space.elements)
    for (int v : mesh.triangles[t]) space.node_local[v] = 0;
  for (int v = 0; v < mesh.num_nodes(); ++v)
    if (space.node_local[v] == 0) {
      space.node_local[v] = space.num_volume_dofs();
      space.volume_nodes.push_back(v);
    }

  // Directed edges with exactly one incident owned triangle form Gamma_j.
  std::map<std::array<int, 2>, std::array<int, 3>> edge_info;  // undirected -> (count, a, element)
  for (int t : space.elements) {
    const auto& tri = mesh.triangles[t];
    for (int e = 0; e < 3; ++e) {
      const int a = tri[e], b = tri[(e + 1) % 3];
      auto [it, inserted] = edge_info.try_emplace(detail::undirected(a, b), std::array<int, 3>{0, a, t});
      ++it->second[0];
      if (!inserted) it->second = {it->second[0], a, t};
    }
  }
  std::set<std::array<int, 2>> physical;
  for (const auto& e : mesh.boundary_edges) physical.insert(detail::undirected(e[0], e[1]));

  std::vector<std::array<int, 4>> raw_edges;  // (ga, gb, element, physical)
  std::set<int> boundary_globals;
  for (const auto& [key, info] : edge_info) {
    if (info[0] != 1) continue;
    const int ga = info[1];
    const int gb = (key[0] == ga) ? key[1] : key[0];
    raw_edges.push_back({ga, gb, info[2], physical.count(key) ? 1 : 0});
    boundary_globals.insert(ga);
    boundary_globals.insert(gb);
  }
  space.boundary_nodes.assign(boundary_globals.begin(), boundary_globals.end());
  std::vector<int> boundary_index(mesh.num_nodes(), -1);
  for (int k = 0; k < space.num_boundary_dofs(); ++k) {
    boundary_index[space.boundary_nodes[k]] = k;
    space.boundary_local.push_back(space.node_local[space.boundary_nodes[k]]);
  }
  for (const auto& e : raw_edges)
    space.boundary_edges.push_back({boundary_index[e[0]], boundary_index[e[1]], e[0], e[1], e[2], e[3] != 0});
  return space;
}

namespace detail {

struct ElementGeometry {
  double area;
  double b[3], c[3];  // grad lambda_i = (b_i, c_i) / (2 area)
};

inline ElementGeometry element_geometry(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  const Eigen::Vector2d p0 = mesh.nodes[tri[0]], p1 = mesh.nodes[tri[1]], p2 = mesh.nodes[tri[2]];
  ElementGeometry geom;
  geom.area = 0.5 * ((p1.x() - p0.x()) * (p2.y() - p0.y()) - (p2.x() - p0.x()) * (p1.y() - p0.y()));
  geom.b[0] = p1.y() - p2.y();
  geom.b[1] = p2.y() - p0.y();
  geom.b[2] = p0.y() - p1.y();
  geom.c[0] = p2.x() - p1.x();
  geom.c[1] = p0.x() - p2.x();
  geom.c[2] = p1.x() - p0.x();
  return geom;
}

}  // namespace detail

struct LocalProblem {
  SubdomainSpace space;
  SparseMatrixXcd a;       // volume form including the -i kappa Robin term on the physical boundary
  Eigen::VectorXcd load;
};

/// P1 Galerkin matrix of a_{Omega_j} and the load vector on one subdomain.
inline LocalProblem assemble_local(const Mesh& mesh, const Partition& partition, int j,
                                   const Material& material, const Source& source) {
  LocalProblem local;
  local.space = build_subdomain_space(mesh, partition, j);
  const SubdomainSpace& space = local.space;
  const int n = space.num_volume_dofs();
  const Complex imag_unit(0.0, 1.0);

  std::vector<Eigen::Triplet<Complex>> triplets;
  triplets.reserve(space.elements.size() * 9 + space.boundary_edges.size() * 4);
  local.load = Eigen::VectorXcd::Zero(n);

  for (int t : space.elements) {
    const auto geom = detail::element_geometry(mesh, t);
    const auto& tri = mesh.triangles[t];
    const double mu = material.mu[t];
    const Complex k2 = material.kappa[t] * material.kappa[t];
    const Complex f = source.f.empty() ? Complex(0.0) : source.f[t];
    for (int r = 0; r < 3; ++r) {
      const int lr = space.node_local[tri[r]];
      for (int s = 0; s < 3; ++s) {
        const int ls = space.node_local[tri[s]];
        const double stiff = (geom.b[r] * geom.b[s] + geom.c[r] * geom.c[s]) / (4.0 * geom.area);
        const double mass = geom.area / 12.0 * (r == s ? 2.0 : 1.0);
        triplets.emplace_back(lr, ls, mu * stiff - k2 * mass);
      }
      local.load(lr) += f * geom.area / 3.0;
    }
  }

  for (const auto& edge : space.boundary_edges) {
    if (!edge.on_physical_boundary) continue;
    const Eigen::Vector2d pa = mesh.nodes[edge.global_a], pb = mesh.nodes[edge.global_b];
    const double len = (pb - pa).norm();
    const Complex kappa = material.kappa[edge.element];
    const int la = space.boundary_local[edge.a], lb = space.boundary_local[edge.b];
    const Complex diag = -imag_unit * kappa * len / 3.0;
    const Complex off = -imag_unit * kappa * len / 6.0;
    triplets.emplace_back(la, la, diag);
    triplets.emplace_back(lb, lb, diag);
    triplets.emplace_back(la, lb, off);
    triplets.emplace_back(lb, la, off);

    if (source.g) {
      const Eigen::Vector2d dir = (pb - pa) / len;
      const Eigen::Vector2d normal(dir.y(), -dir.x());  // interior on the left
      for (int q = 0; q < 2; ++q) {
        const double s = quad::kGauss2X[q];
        const Eigen::Vector2d x = pa + s * (pb - pa);
        const Complex gval = source.g(x, normal);
        local.load(la) += quad::kGauss2W[q] * len * gval * (1.0 - s);
        local.load(lb) += quad::kGauss2W[q] * len * gval * s;
      }
    }
  }

  local.a.resize(n, n);
  local.a.setFromTriplets(triplets.begin(), triplets.end());
  return local;
}

struct GlobalProblem {
  SparseMatrixXcd a;
  Eigen::VectorXcd load;
};

/// Undecomposed system on the global node numbering.
inline GlobalProblem assemble_global(const Mesh& mesh, const Material& material, const Source& source) {
  Partition whole;
  whole.num_subdomains = 1;
  whole.element_owner.assign(mesh.triangles.size(), 0);
  LocalProblem local = assemble_local(mesh, whole, 0, material, source);
  // With J = 1 the local volume numbering is the global node order.
  return {std::move(local.a), std::move(local.load)};
}

/// Real SPD matrix of int grad u . grad v + kappa_inf^2 int u v on a subdomain;
/// the quadratic form behind the (broken) H1 norm and the harmonic extensions.
inline SparseMatrixXd h1_matrix(const Mesh& mesh, const SubdomainSpace& space, double kappa_inf) {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(space.elements.size() * 9);
  const double k2 = kappa_inf * kappa_inf;
  for (int t : space.elements) {
    const auto geom = detail::element_geometry(mesh, t);
    const auto& tri = mesh.triangles[t];
    for (int r = 0; r < 3; ++r)
      for (int s = 0; s < 3; ++s) {
        const double stiff = (geom.b[r] * geom.b[s] + geom.c[r] * geom.c[s]) / (4.0 * geom.area);
        const double mass = geom.area / 12.0 * (r == s ? 2.0 : 1.0);
        triplets.emplace_back(space.node_local[tri[r]], space.node_local[tri[s]], stiff + k2 * mass);
      }
  }
  SparseMatrixXd h(space.num_volume_dofs(), space.num_volume_dofs());
  h.setFromTriplets(triplets.begin(), triplets.end());
  return h;
}

/// Evaluator of the broken H1 norm over a family of subdomains.
class BrokenH1Norm {
 public:
  BrokenH1Norm(const Mesh& mesh, const std::vector<SubdomainSpace>& spaces, double kappa_inf) {
    for (const auto& space : spaces) h_.push_back(h1_matrix(mesh, space, kappa_inf));
  }

  double squared(const std::vector<Eigen::VectorXcd>& u) const {
    if (u.size() != h_.size()) throw std::invalid_argument("broken H1 norm: block count mismatch");
    double sum = 0.0;
    for (std::size_t j = 0; j < h_.size(); ++j) {
      if (u[j].size() != h_[j].rows())
        throw std::invalid_argument("broken H1 norm: block length mismatch");
      sum += std::real(u[j].dot(h_[j] * u[j]));
    }
    return sum;
  }

  double norm(const std::vector<Eigen::VectorXcd>& u) const { return std::sqrt(squared(u)); }

  double norm_diff(const std::vector<Eigen::VectorXcd>& u, const std::vector<Eigen::VectorXcd>& v) const {
    if (u.size() != v.size()) throw std::invalid_argument("broken H1 norm: block count mismatch");
    std::vector<Eigen::VectorXcd> diff(u.size());
    for (std::size_t j = 0; j < u.size(); ++j) diff[j] = u[j] - v[j];
    return norm(diff);
  }

  const std::vector<SparseMatrixXd>& matrices() const { return h_; }

 private:
  std::vector<SparseMatrixXd> h_;
};

inline double broken_h1_norm(const Mesh& mesh, const std::vector<SubdomainSpace>& spaces,
                             const Material& material, const std::vector<Eigen::VectorXcd>& u) {
  return BrokenH1Norm(mesh, spaces, material.kappa_inf).norm(u);
}

}  // namespace helmdd
