#pragma once

// Element-based subdomain partitions: greedy BFS graph growing, recursive
// coordinate bisection, concentric onion bands, owner-file import/export,
// and cross-point detection.

#include <algorithm>
#include <deque>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "helmdd/mesh.hpp"

namespace helmdd {

struct Partition {
  int num_subdomains = 0;
  std::vector<int> element_owner;  // 0-based owner per triangle
};

enum class PartitionMethod { GraphGrowing, CoordinateBisection, Onion, FromFile };

inline PartitionMethod parse_partition_method(const std::string& name) {
  if (name == "graph-growing") return PartitionMethod::GraphGrowing;
  if (name == "coordinate-bisection" || name == "bisection") return PartitionMethod::CoordinateBisection;
  if (name == "onion") return PartitionMethod::Onion;
  if (name == "from-file" || name == "file") return PartitionMethod::FromFile;
  throw std::invalid_argument("unknown partition method: " + name);
}

inline void validate_partition(const Mesh& mesh, const Partition& partition) {
  if (partition.num_subdomains < 1) throw std::invalid_argument("partition: J must be >= 1");
  if (partition.element_owner.size() != mesh.triangles.size())
    throw std::invalid_argument("partition: owner list size does not match triangle count");
  std::vector<int> count(partition.num_subdomains, 0);
  for (int owner : partition.element_owner) {
    if (owner < 0 || owner >= partition.num_subdomains)
      throw std::invalid_argument("partition: owner index out of range");
    ++count[owner];
  }
  for (int j = 0; j < partition.num_subdomains; ++j)
    if (count[j] == 0)
      throw std::invalid_argument("partition: subdomain " + std::to_string(j + 1) + " owns no elements");
}

namespace detail {

// Triangle adjacency across shared edges.
inline std::vector<std::array<int, 3>> element_adjacency(const Mesh& mesh) {
  std::map<std::array<int, 2>, std::array<int, 2>> edge_tris;
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int e = 0; e < 3; ++e) {
      auto key = undirected(tri[e], tri[(e + 1) % 3]);
      auto [it, inserted] = edge_tris.try_emplace(key, std::array<int, 2>{t, -1});
      if (!inserted) it->second[1] = t;
    }
  }
  std::vector<std::array<int, 3>> adj(mesh.num_triangles(), {-1, -1, -1});
  std::vector<int> degree(mesh.num_triangles(), 0);
  for (const auto& [edge, tris] : edge_tris) {
    (void)edge;
    if (tris[1] < 0) continue;
    adj[tris[0]][degree[tris[0]]++] = tris[1];
    adj[tris[1]][degree[tris[1]]++] = tris[0];
  }
  return adj;
}

// Deterministic farthest-point seeds over element centroids.
inline std::vector<int> spread_seeds(const Mesh& mesh, int J) {
  const int m = mesh.num_triangles();
  std::vector<Eigen::Vector2d> c(m);
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  for (int t = 0; t < m; ++t) {
    c[t] = mesh.centroid(t);
    mean += c[t];
  }
  mean /= m;
  std::vector<int> seeds;
  int first = 0;
  double best = -1.0;
  for (int t = 0; t < m; ++t) {
    const double d = (c[t] - mean).squaredNorm();
    if (d > best) {
      best = d;
      first = t;
    }
  }
  seeds.push_back(first);
  std::vector<double> min_dist(m, std::numeric_limits<double>::max());
  while (static_cast<int>(seeds.size()) < J) {
    for (int t = 0; t < m; ++t)
      min_dist[t] = std::min(min_dist[t], (c[t] - c[seeds.back()]).squaredNorm());
    int next = 0;
    best = -1.0;
    for (int t = 0; t < m; ++t)
      if (min_dist[t] > best) {
        best = min_dist[t];
        next = t;
      }
    seeds.push_back(next);
  }
  return seeds;
}

inline Partition partition_graph_growing(const Mesh& mesh, int J) {
  const int m = mesh.num_triangles();
  const auto adj = element_adjacency(mesh);
  const auto seeds = spread_seeds(mesh, J);

  Partition partition;
  partition.num_subdomains = J;
  partition.element_owner.assign(m, -1);

  std::vector<std::deque<int>> frontier(J);
  std::vector<int> count(J, 0);
  int assigned = 0;
  for (int j = 0; j < J; ++j) {
    if (partition.element_owner[seeds[j]] >= 0) {
      // Seed stolen by an earlier subdomain on tiny meshes; pick any free one.
      int alt = -1;
      for (int t = 0; t < m; ++t)
        if (partition.element_owner[t] < 0) {
          alt = t;
          break;
        }
      if (alt < 0) throw std::invalid_argument("partition: J exceeds number of triangles");
      partition.element_owner[alt] = j;
      frontier[j].push_back(alt);
    } else {
      partition.element_owner[seeds[j]] = j;
      frontier[j].push_back(seeds[j]);
    }
    ++count[j];
    ++assigned;
  }

  // Grow the currently smallest subdomain by one adjacent element at a time;
  // keeps element counts within one of each other while frontiers last.
  while (assigned < m) {
    int j_min = -1;
    for (int j = 0; j < J; ++j)
      if (!frontier[j].empty() && (j_min < 0 || count[j] < count[j_min])) j_min = j;
    if (j_min < 0) {
      // Disconnected leftovers: attach to the smallest adjacent subdomain.
      for (int t = 0; t < m; ++t) {
        if (partition.element_owner[t] >= 0) continue;
        int pick = -1;
        for (int nb : adj[t])
          if (nb >= 0 && partition.element_owner[nb] >= 0) {
            const int j = partition.element_owner[nb];
            if (pick < 0 || count[j] < count[pick]) pick = j;
          }
        if (pick >= 0) {
          partition.element_owner[t] = pick;
          frontier[pick].push_back(t);
          ++count[pick];
          ++assigned;
        }
      }
      continue;
    }
    bool grew = false;
    while (!frontier[j_min].empty()) {
      const int t = frontier[j_min].front();
      int pick = -1;
      for (int nb : adj[t])
        if (nb >= 0 && partition.element_owner[nb] < 0) {
          pick = nb;
          break;
        }
      if (pick < 0) {
        frontier[j_min].pop_front();
        continue;
      }
      partition.element_owner[pick] = j_min;
      frontier[j_min].push_back(pick);
      ++count[j_min];
      ++assigned;
      grew = true;
      break;
    }
    (void)grew;
  }
  return partition;
}

inline void bisect_recursive(const std::vector<Eigen::Vector2d>& centroids, std::vector<int>& owners,
                             std::vector<int>& elements, int J, int first_label) {
  if (J == 1) {
    for (int t : elements) owners[t] = first_label;
    return;
  }
  Eigen::Vector2d lo(std::numeric_limits<double>::max(), std::numeric_limits<double>::max());
  Eigen::Vector2d hi = -lo;
  for (int t : elements) {
    lo = lo.cwiseMin(centroids[t]);
    hi = hi.cwiseMax(centroids[t]);
  }
  const int axis = (hi.x() - lo.x() >= hi.y() - lo.y()) ? 0 : 1;
  std::stable_sort(elements.begin(), elements.end(), [&](int a, int b) {
    if (centroids[a][axis] != centroids[b][axis]) return centroids[a][axis] < centroids[b][axis];
    return a < b;
  });
  const int j_left = J / 2;
  const auto n_left = static_cast<std::ptrdiff_t>(
      std::llround(static_cast<double>(elements.size()) * j_left / J));
  std::vector<int> left(elements.begin(), elements.begin() + n_left);
  std::vector<int> right(elements.begin() + n_left, elements.end());
  bisect_recursive(centroids, owners, left, j_left, first_label);
  bisect_recursive(centroids, owners, right, J - j_left, first_label + j_left);
}

inline Partition partition_bisection(const Mesh& mesh, int J) {
  const int m = mesh.num_triangles();
  std::vector<Eigen::Vector2d> centroids(m);
  for (int t = 0; t < m; ++t) centroids[t] = mesh.centroid(t);
  std::vector<int> elements(m);
  std::iota(elements.begin(), elements.end(), 0);
  Partition partition;
  partition.num_subdomains = J;
  partition.element_owner.assign(m, -1);
  bisect_recursive(centroids, partition.element_owner, elements, J, 0);
  return partition;
}

// Concentric bands of element-centroid radius. Band cuts are placed near the
// count quantiles but snapped to the widest radius gap in a small window, so
// cuts fall between mesh layers rather than through one.
inline Partition partition_onion(const Mesh& mesh, int J) {
  const int m = mesh.num_triangles();
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> radius(m);
  for (int t = 0; t < m; ++t) radius[t] = mesh.centroid(t).norm();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (radius[a] != radius[b]) return radius[a] < radius[b];
    return a < b;
  });

  std::vector<int> cuts;  // positions into `order`, band k = [cuts[k], cuts[k+1])
  cuts.push_back(0);
  for (int k = 1; k < J; ++k) {
    const int target = static_cast<int>(std::llround(static_cast<double>(m) * k / J));
    const int window = std::max(1, m / (8 * J));
    int best_pos = target;
    double best_gap = -1.0;
    for (int p = std::max(cuts.back() + 1, target - window); p <= std::min(m - (J - k), target + window); ++p) {
      const double gap = radius[order[p]] - radius[order[p - 1]];
      if (gap > best_gap) {
        best_gap = gap;
        best_pos = p;
      }
    }
    cuts.push_back(best_pos);
  }
  cuts.push_back(m);

  Partition partition;
  partition.num_subdomains = J;
  partition.element_owner.assign(m, -1);
  for (int k = 0; k < J; ++k) {
    if (cuts[k + 1] <= cuts[k])
      throw std::invalid_argument("partition: onion band " + std::to_string(k + 1) + " is empty");
    for (int p = cuts[k]; p < cuts[k + 1]; ++p) partition.element_owner[order[p]] = k;
  }
  return partition;
}

}  // namespace detail

/// Owner file: line i holds the 1-based owner of triangle i.
inline Partition read_partition(const Mesh& mesh, std::istream& in) {
  Partition partition;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream rec(line);
    int owner;
    if (!(rec >> owner))
      throw std::invalid_argument("owner file: malformed line " + std::to_string(line_no));
    if (owner < 1)
      throw std::invalid_argument("owner file: owner must be >= 1 at line " + std::to_string(line_no));
    partition.element_owner.push_back(owner - 1);
    partition.num_subdomains = std::max(partition.num_subdomains, owner);
  }
  validate_partition(mesh, partition);
  return partition;
}

inline Partition read_partition_file(const Mesh& mesh, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open owner file: " + path);
  return read_partition(mesh, in);
}

inline void write_partition(const Partition& partition, std::ostream& out) {
  for (int owner : partition.element_owner) out << (owner + 1) << "\n";
}

inline Partition partition_mesh(const Mesh& mesh, int J, PartitionMethod method,
                                const std::string& owner_file = {}) {
  if (J < 1) throw std::invalid_argument("partition: J must be >= 1");
  if (J > mesh.num_triangles())
    throw std::invalid_argument("partition: J exceeds number of triangles");
  Partition partition;
  switch (method) {
    case PartitionMethod::GraphGrowing:
      partition = detail::partition_graph_growing(mesh, J);
      break;
    case PartitionMethod::CoordinateBisection:
      partition = detail::partition_bisection(mesh, J);
      break;
    case PartitionMethod::Onion:
      partition = detail::partition_onion(mesh, J);
      break;
    case PartitionMethod::FromFile:
      return read_partition_file(mesh, owner_file);
  }
  validate_partition(mesh, partition);
  return partition;
}

struct CrossPointReport {
  std::vector<int> interior_cross_points;  // nodes where >= 3 subdomains meet
  std::vector<int> boundary_cross_points;  // nodes on the physical boundary shared by >= 2

  bool empty() const { return interior_cross_points.empty() && boundary_cross_points.empty(); }
};

inline CrossPointReport detect_cross_points(const Mesh& mesh, const Partition& partition) {
  validate_partition(mesh, partition);
  std::vector<std::vector<int>> owners(mesh.num_nodes());
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const int j = partition.element_owner[t];
    for (int v : mesh.triangles[t]) {
      auto& list = owners[v];
      if (std::find(list.begin(), list.end(), j) == list.end()) list.push_back(j);
    }
  }
  std::vector<bool> on_boundary(mesh.num_nodes(), false);
  for (const auto& e : mesh.boundary_edges) on_boundary[e[0]] = on_boundary[e[1]] = true;

  CrossPointReport report;
  for (int v = 0; v < mesh.num_nodes(); ++v) {
    if (owners[v].size() >= 3) report.interior_cross_points.push_back(v);
    if (on_boundary[v] && owners[v].size() >= 2) report.boundary_cross_points.push_back(v);
  }
  return report;
}

}  // namespace helmdd
