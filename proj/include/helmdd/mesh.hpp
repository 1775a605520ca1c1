#pragma once

// Conforming 2D triangulations: structured disk generation, Gmsh MSH v2.2
// ASCII input/output, and eager conformity validation.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace helmdd {

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Mesh {
  std::vector<Eigen::Vector2d> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<std::array<int, 2>> boundary_edges;
  std::vector<int> element_region;

  int num_nodes() const { return static_cast<int>(nodes.size()); }
  int num_triangles() const { return static_cast<int>(triangles.size()); }

  double signed_area(int t) const {
    const auto& tri = triangles[t];
    const Eigen::Vector2d a = nodes[tri[0]], b = nodes[tri[1]], c = nodes[tri[2]];
    return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
  }

  Eigen::Vector2d centroid(int t) const {
    const auto& tri = triangles[t];
    return (nodes[tri[0]] + nodes[tri[1]] + nodes[tri[2]]) / 3.0;
  }
};

namespace detail {

inline std::array<int, 2> undirected(int a, int b) {
  return a < b ? std::array<int, 2>{a, b} : std::array<int, 2>{b, a};
}

// Map undirected edge -> incident triangle count.
inline std::map<std::array<int, 2>, int> edge_incidence(const Mesh& mesh) {
  std::map<std::array<int, 2>, int> count;
  for (const auto& tri : mesh.triangles)
    for (int e = 0; e < 3; ++e) ++count[undirected(tri[e], tri[(e + 1) % 3])];
  return count;
}

}  // namespace detail

/// Edges incident to exactly one triangle, sorted.
inline std::vector<std::array<int, 2>> boundary_edges_from_incidence(const Mesh& mesh) {
  std::vector<std::array<int, 2>> out;
  for (const auto& [edge, count] : detail::edge_incidence(mesh))
    if (count == 1) out.push_back(edge);
  return out;
}

/// Flip triangles with negative signed area into positive orientation.
inline void orient_positive(Mesh& mesh) {
  for (int t = 0; t < mesh.num_triangles(); ++t)
    if (mesh.signed_area(t) < 0.0) std::swap(mesh.triangles[t][1], mesh.triangles[t][2]);
}

/// Eager conformity validation; throws MeshError on the first violation.
inline void validate_mesh(const Mesh& mesh) {
  const int n = mesh.num_nodes();
  if (mesh.triangles.empty()) throw MeshError("mesh has no triangles");
  if (mesh.element_region.size() != mesh.triangles.size())
    throw MeshError("element_region size does not match triangle count");
  for (int t = 0; t < mesh.num_triangles(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int v : tri)
      if (v < 0 || v >= n) throw MeshError("triangle " + std::to_string(t) + " references invalid node");
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw MeshError("triangle " + std::to_string(t) + " is degenerate");
    if (!(mesh.signed_area(t) > 0.0))
      throw MeshError("triangle " + std::to_string(t) + " has non-positive area");
  }
  const auto incidence = detail::edge_incidence(mesh);
  for (const auto& [edge, count] : incidence)
    if (count > 2)
      throw MeshError("edge (" + std::to_string(edge[0]) + "," + std::to_string(edge[1]) +
                      ") shared by more than two triangles");
  std::vector<std::array<int, 2>> stored;
  stored.reserve(mesh.boundary_edges.size());
  for (const auto& e : mesh.boundary_edges) stored.push_back(detail::undirected(e[0], e[1]));
  std::sort(stored.begin(), stored.end());
  if (std::adjacent_find(stored.begin(), stored.end()) != stored.end())
    throw MeshError("duplicate boundary edge");
  const auto derived = boundary_edges_from_incidence(mesh);
  if (stored != derived)
    throw MeshError("stored boundary edges do not match triangle incidence");
  // Hanging node on the boundary: a node lying strictly inside a boundary edge.
  for (const auto& e : derived) {
    const Eigen::Vector2d a = mesh.nodes[e[0]], b = mesh.nodes[e[1]];
    const double len2 = (b - a).squaredNorm();
    for (int v = 0; v < n; ++v) {
      if (v == e[0] || v == e[1]) continue;
      const Eigen::Vector2d p = mesh.nodes[v];
      const double s = (p - a).dot(b - a) / len2;
      if (s <= 1e-12 || s >= 1.0 - 1e-12) continue;
      const Eigen::Vector2d foot = a + s * (b - a);
      if ((p - foot).squaredNorm() < 1e-24 * len2)
        throw MeshError("hanging node " + std::to_string(v) + " on boundary edge");
    }
  }
}

/// Structured triangulation of a disk: concentric rings of nodes at spacing
/// <= target_h, fan at the center, two-pointer merge between rings.
inline Mesh generate_disk_mesh(double radius, double target_h, std::size_t node_cap = 4000000) {
  if (!(radius > 0.0)) throw std::invalid_argument("generate_disk_mesh: radius must be positive");
  if (!(target_h > 0.0) || !(target_h < radius))
    throw std::invalid_argument("generate_disk_mesh: target_h must satisfy 0 < target_h < radius");

  const int n_rings = static_cast<int>(std::ceil(radius / target_h));
  const double dr = radius / n_rings;

  Mesh mesh;
  mesh.nodes.emplace_back(0.0, 0.0);
  std::vector<int> ring_start(n_rings + 1, 0), ring_count(n_rings + 1, 1);
  std::size_t expected = 1;
  for (int i = 1; i <= n_rings; ++i) {
    // Size each ring for its outer neighbour's radius: the two-pointer merge
    // below can lag by one inner-ring step, and the corresponding chord at the
    // outer radius must stay below target_h so that no edge exceeds
    // sqrt(dr^2 + target_h^2) <= 1.5 target_h.
    const double r_sizing = dr * std::min(i + 1, n_rings);
    const int m = std::max(3, static_cast<int>(std::ceil(2.0 * M_PI * r_sizing / target_h)));
    ring_start[i] = static_cast<int>(expected);
    ring_count[i] = m;
    expected += static_cast<std::size_t>(m);
    if (expected > node_cap)
      throw ResourceError("generate_disk_mesh: node count exceeds cap (" + std::to_string(node_cap) + ")");
  }
  for (int i = 1; i <= n_rings; ++i) {
    const double r = dr * i;
    const int m = ring_count[i];
    for (int k = 0; k < m; ++k) {
      const double theta = 2.0 * M_PI * k / m;
      mesh.nodes.emplace_back(r * std::cos(theta), r * std::sin(theta));
    }
  }

  auto ring_node = [&](int ring, int k) {
    if (ring == 0) return 0;
    return ring_start[ring] + (k % ring_count[ring]);
  };
  auto ring_angle = [&](int ring, int k) { return 2.0 * M_PI * k / ring_count[ring]; };

  for (int i = 1; i <= n_rings; ++i) {
    const int ma = ring_count[i - 1], mb = ring_count[i];
    if (i == 1) {
      for (int k = 0; k < mb; ++k)
        mesh.triangles.push_back({0, ring_node(1, k), ring_node(1, k + 1)});
      continue;
    }
    // Merge inner ring a and outer ring b by advancing whichever pointer has
    // the smaller next angle.
    int ia = 0, ib = 0;
    while (ia < ma || ib < mb) {
      const double next_a = ia < ma ? ring_angle(i - 1, ia + 1) : 1e30;
      const double next_b = ib < mb ? ring_angle(i, ib + 1) : 1e30;
      if (next_a <= next_b) {
        mesh.triangles.push_back({ring_node(i - 1, ia), ring_node(i - 1, ia + 1), ring_node(i, ib)});
        ++ia;
      } else {
        mesh.triangles.push_back({ring_node(i, ib + 1), ring_node(i, ib), ring_node(i - 1, ia)});
        ++ib;
      }
    }
  }

  mesh.element_region.assign(mesh.triangles.size(), 0);
  orient_positive(mesh);
  mesh.boundary_edges = boundary_edges_from_incidence(mesh);
  validate_mesh(mesh);
  return mesh;
}

struct MshReadStats {
  int skipped_elements = 0;
};

/// Gmsh MSH v2.2 ASCII reader. Element type 2 -> triangles (physical tag kept
/// as region), type 1 -> boundary edges, anything else counts as skipped.
inline Mesh read_msh(std::istream& in, MshReadStats* stats = nullptr) {
  Mesh mesh;
  MshReadStats local_stats;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) -> void {
    throw MeshError("MSH parse error at line " + std::to_string(line_no) + ": " + what);
  };
  auto next_line = [&](std::string& out) {
    if (!std::getline(in, out)) return false;
    ++line_no;
    if (!out.empty() && out.back() == '\r') out.pop_back();
    return true;
  };

  bool seen_format = false, seen_nodes = false, seen_elements = false;
  std::map<std::int64_t, int> node_id_map;
  std::vector<std::array<int, 2>> file_edges;

  while (next_line(line)) {
    if (line.empty()) continue;
    if (line == "$MeshFormat") {
      if (!next_line(line)) fail("unexpected end of file in $MeshFormat");
      std::istringstream fmt(line);
      std::string version;
      int file_type = 0, data_size = 0;
      if (!(fmt >> version >> file_type >> data_size)) fail("malformed $MeshFormat record");
      if (version != "2.2") fail("unsupported MSH version " + version);
      if (file_type != 0) fail("binary MSH files are not supported");
      if (!next_line(line) || line != "$EndMeshFormat") fail("missing $EndMeshFormat");
      seen_format = true;
    } else if (line == "$Nodes") {
      if (!seen_format) fail("$Nodes before $MeshFormat");
      if (!next_line(line)) fail("unexpected end of file in $Nodes");
      std::int64_t count = 0;
      try {
        count = std::stoll(line);
      } catch (...) {
        fail("malformed node count");
      }
      for (std::int64_t k = 0; k < count; ++k) {
        if (!next_line(line)) fail("unexpected end of file in $Nodes");
        std::istringstream rec(line);
        std::int64_t id;
        double x, y, z;
        if (!(rec >> id >> x >> y >> z)) fail("malformed node record");
        if (node_id_map.count(id)) fail("duplicate node id " + std::to_string(id));
        node_id_map[id] = mesh.num_nodes();
        mesh.nodes.emplace_back(x, y);
      }
      if (!next_line(line) || line != "$EndNodes") fail("missing $EndNodes");
      for (const auto& [id, idx] : node_id_map) {
        (void)idx;
        if (id < 1 || id > count) fail("non-contiguous node ids");
      }
      seen_nodes = true;
    } else if (line == "$Elements") {
      if (!seen_nodes) fail("$Elements before $Nodes");
      if (!next_line(line)) fail("unexpected end of file in $Elements");
      std::int64_t count = 0;
      try {
        count = std::stoll(line);
      } catch (...) {
        fail("malformed element count");
      }
      auto map_node = [&](std::int64_t id) {
        auto it = node_id_map.find(id);
        if (it == node_id_map.end()) fail("element references unknown node " + std::to_string(id));
        return it->second;
      };
      for (std::int64_t k = 0; k < count; ++k) {
        if (!next_line(line)) fail("unexpected end of file in $Elements");
        std::istringstream rec(line);
        std::int64_t id;
        int type = 0, ntags = 0;
        if (!(rec >> id >> type >> ntags)) fail("malformed element record");
        std::vector<int> tags(ntags);
        for (int& tag : tags)
          if (!(rec >> tag)) fail("malformed element tags");
        if (type == 2) {
          std::int64_t a, b, c;
          if (!(rec >> a >> b >> c)) fail("malformed triangle connectivity");
          mesh.triangles.push_back({map_node(a), map_node(b), map_node(c)});
          mesh.element_region.push_back(tags.empty() ? 0 : tags[0]);
        } else if (type == 1) {
          std::int64_t a, b;
          if (!(rec >> a >> b)) fail("malformed line connectivity");
          file_edges.push_back({map_node(a), map_node(b)});
        } else {
          ++local_stats.skipped_elements;
        }
      }
      if (!next_line(line) || line != "$EndElements") fail("missing $EndElements");
      seen_elements = true;
    } else if (line[0] == '$') {
      // Unknown section: skip to its end marker.
      const std::string end = "$End" + line.substr(1);
      bool closed = false;
      while (next_line(line))
        if (line == end) {
          closed = true;
          break;
        }
      if (!closed) fail("unterminated section");
    } else {
      fail("unexpected content outside a section");
    }
  }
  if (!seen_format || !seen_nodes || !seen_elements)
    throw MeshError("MSH parse error: missing $MeshFormat, $Nodes or $Elements section");

  orient_positive(mesh);
  mesh.boundary_edges = boundary_edges_from_incidence(mesh);
  if (!file_edges.empty()) {
    std::vector<std::array<int, 2>> given;
    given.reserve(file_edges.size());
    for (const auto& e : file_edges) given.push_back(detail::undirected(e[0], e[1]));
    std::sort(given.begin(), given.end());
    given.erase(std::unique(given.begin(), given.end()), given.end());
    if (given != mesh.boundary_edges)
      throw MeshError("MSH line elements do not match the triangulation boundary");
  }
  validate_mesh(mesh);
  if (stats) *stats = local_stats;
  return mesh;
}

inline Mesh read_msh_file(const std::string& path, MshReadStats* stats = nullptr) {
  std::ifstream in(path);
  if (!in) throw MeshError("cannot open mesh file: " + path);
  return read_msh(in, stats);
}

/// Write MSH v2.2 ASCII: boundary edges as type 1, triangles as type 2.
inline void write_msh(const Mesh& mesh, std::ostream& out) {
  out << "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n";
  out << "$Nodes\n" << mesh.num_nodes() << "\n";
  out.precision(17);
  for (int i = 0; i < mesh.num_nodes(); ++i)
    out << (i + 1) << " " << mesh.nodes[i].x() << " " << mesh.nodes[i].y() << " 0\n";
  out << "$EndNodes\n$Elements\n"
      << (mesh.boundary_edges.size() + mesh.triangles.size()) << "\n";
  std::int64_t id = 1;
  for (const auto& e : mesh.boundary_edges)
    out << id++ << " 1 2 0 0 " << (e[0] + 1) << " " << (e[1] + 1) << "\n";
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    out << id++ << " 2 2 " << mesh.element_region[t] << " 0 " << (tri[0] + 1) << " "
        << (tri[1] + 1) << " " << (tri[2] + 1) << "\n";
  }
  out << "$EndElements\n";
}

inline void write_msh_file(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw MeshError("cannot open mesh file for writing: " + path);
  write_msh(mesh, out);
}

}  // namespace helmdd
