#pragma once

// Skeleton DOF numbering N(Sigma), the boolean injections Q_j between local
// boundary traces and skeleton coefficients, multi-trace arithmetic, and the
// classical interface swap operator X for cross-point-free partitions.

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <vector>

#include "helmdd/assembly.hpp"
#include "helmdd/mesh.hpp"
#include "helmdd/partition.hpp"

namespace helmdd {

/// One complex coefficient vector per subdomain boundary Gamma_j.
struct MultiTrace {
  std::vector<Eigen::VectorXcd> blocks;

  static MultiTrace zero(const std::vector<int>& sizes) {
    MultiTrace w;
    for (int s : sizes) w.blocks.emplace_back(Eigen::VectorXcd::Zero(s));
    return w;
  }

  int num_blocks() const { return static_cast<int>(blocks.size()); }

  Eigen::Index total_size() const {
    Eigen::Index n = 0;
    for (const auto& b : blocks) n += b.size();
    return n;
  }

  Eigen::VectorXcd flatten() const {
    Eigen::VectorXcd out(total_size());
    Eigen::Index at = 0;
    for (const auto& b : blocks) {
      out.segment(at, b.size()) = b;
      at += b.size();
    }
    return out;
  }

  static MultiTrace unflatten(const Eigen::VectorXcd& v, const std::vector<int>& sizes) {
    MultiTrace w;
    Eigen::Index at = 0;
    for (int s : sizes) {
      w.blocks.emplace_back(v.segment(at, s));
      at += s;
    }
    if (at != v.size()) throw std::invalid_argument("multi-trace: flat vector length mismatch");
    return w;
  }

  MultiTrace& operator+=(const MultiTrace& o) {
    for (int j = 0; j < num_blocks(); ++j) blocks[j] += o.blocks[j];
    return *this;
  }
  MultiTrace& operator-=(const MultiTrace& o) {
    for (int j = 0; j < num_blocks(); ++j) blocks[j] -= o.blocks[j];
    return *this;
  }
  MultiTrace& operator*=(Complex s) {
    for (auto& b : blocks) b *= s;
    return *this;
  }

  friend MultiTrace operator+(MultiTrace a, const MultiTrace& b) { return a += b; }
  friend MultiTrace operator-(MultiTrace a, const MultiTrace& b) { return a -= b; }
  friend MultiTrace operator*(Complex s, MultiTrace a) { return a *= s; }
};

/// Global skeleton numbering and the injection maps Q_j. Skeleton DOFs are
/// mesh nodes on Sigma in ascending node order, independent of the partition.
struct SkeletonMap {
  int n_sigma = 0;
  std::vector<int> sigma_node;                 // skeleton dof -> global mesh node
  std::vector<std::vector<int>> local_to_sigma;  // j -> boundary dof -> skeleton dof
  std::vector<int> block_sizes;

  /// Q_j v: skeleton coefficients restricted to boundary dofs of Gamma_j.
  Eigen::VectorXcd restrict_to(int j, const Eigen::VectorXcd& v) const {
    if (v.size() != n_sigma) throw std::invalid_argument("restrict: skeleton vector length mismatch");
    const auto& map = local_to_sigma[j];
    Eigen::VectorXcd out(map.size());
    for (std::size_t k = 0; k < map.size(); ++k) out(k) = v(map[k]);
    return out;
  }

  /// Q_j^* w: boundary coefficients scattered into a skeleton vector.
  Eigen::VectorXcd inject_adjoint(int j, const Eigen::VectorXcd& w) const {
    const auto& map = local_to_sigma[j];
    if (w.size() != static_cast<Eigen::Index>(map.size()))
      throw std::invalid_argument("inject: boundary vector length mismatch");
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n_sigma);
    for (std::size_t k = 0; k < map.size(); ++k) out(map[k]) += w(k);
    return out;
  }

  /// Number of subdomain boundaries containing each skeleton dof.
  std::vector<int> multiplicity() const {
    std::vector<int> mult(n_sigma, 0);
    for (const auto& map : local_to_sigma)
      for (int s : map) ++mult[s];
    return mult;
  }

  MultiTrace zero() const { return MultiTrace::zero(block_sizes); }
};

inline SkeletonMap build_skeleton_map(const Mesh& mesh, const std::vector<SubdomainSpace>& spaces) {
  SkeletonMap map;
  std::vector<int> sigma_index(mesh.num_nodes(), -1);
  for (const auto& space : spaces)
    for (int v : space.boundary_nodes) sigma_index[v] = 0;
  for (int v = 0; v < mesh.num_nodes(); ++v)
    if (sigma_index[v] == 0) {
      sigma_index[v] = map.n_sigma++;
      map.sigma_node.push_back(v);
    }
  for (const auto& space : spaces) {
    std::vector<int> local(space.num_boundary_dofs());
    for (int k = 0; k < space.num_boundary_dofs(); ++k) local[k] = sigma_index[space.boundary_nodes[k]];
    map.local_to_sigma.push_back(std::move(local));
    map.block_sizes.push_back(space.num_boundary_dofs());
  }
  return map;
}

/// Pairing of interface twins for the classical swap; only well defined when
/// the partition has no cross-points.
struct InterfacePairing {
  // twin[j][k] = (j2, k2) for interface dofs, (j, k) itself for dofs on the
  // physical boundary (fixed points of the swap).
  std::vector<std::vector<std::pair<int, int>>> twin;
};

inline InterfacePairing build_interface_pairing(const Mesh& mesh, const Partition& partition,
                                                const SkeletonMap& skeleton) {
  const CrossPointReport report = detect_cross_points(mesh, partition);
  if (!report.empty())
    throw std::invalid_argument("swap operator requires a partition without cross-points");

  std::vector<std::vector<std::pair<int, int>>> images(skeleton.n_sigma);
  for (std::size_t j = 0; j < skeleton.local_to_sigma.size(); ++j)
    for (std::size_t k = 0; k < skeleton.local_to_sigma[j].size(); ++k)
      images[skeleton.local_to_sigma[j][k]].emplace_back(static_cast<int>(j), static_cast<int>(k));

  InterfacePairing pairing;
  pairing.twin.resize(skeleton.local_to_sigma.size());
  for (std::size_t j = 0; j < skeleton.local_to_sigma.size(); ++j)
    pairing.twin[j].resize(skeleton.local_to_sigma[j].size());

  std::vector<bool> on_boundary(mesh.num_nodes(), false);
  for (const auto& e : mesh.boundary_edges) on_boundary[e[0]] = on_boundary[e[1]] = true;

  for (int s = 0; s < skeleton.n_sigma; ++s) {
    const auto& img = images[s];
    if (img.size() == 1) {
      if (!on_boundary[skeleton.sigma_node[s]])
        throw std::invalid_argument("skeleton dof with a single image off the physical boundary");
      pairing.twin[img[0].first][img[0].second] = img[0];
    } else if (img.size() == 2) {
      pairing.twin[img[0].first][img[0].second] = img[1];
      pairing.twin[img[1].first][img[1].second] = img[0];
    } else {
      throw std::invalid_argument("skeleton dof shared by more than two subdomains");
    }
  }
  return pairing;
}

/// X w: swap interface traces between twin dofs, keep physical-boundary dofs.
inline MultiTrace swap_apply(const InterfacePairing& pairing, const MultiTrace& w) {
  MultiTrace v = w;
  for (std::size_t j = 0; j < pairing.twin.size(); ++j)
    for (std::size_t k = 0; k < pairing.twin[j].size(); ++k) {
      const auto [j2, k2] = pairing.twin[j][k];
      v.blocks[j](k) = w.blocks[j2](k2);
    }
  return v;
}

}  // namespace helmdd
