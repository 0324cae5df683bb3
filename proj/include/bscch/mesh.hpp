#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bscch/error.hpp"

namespace bscch {

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

/// Triangulated planar domain whose boundary polygon doubles as the surface mesh.
struct TriMesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;  // counterclockwise
  std::vector<int> boundary_loop;             // counterclockwise, closed implicitly

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }
  std::size_t num_boundary() const { return boundary_loop.size(); }

  /// Edge e joins boundary_loop[e] and boundary_loop[(e+1) % B].
  std::pair<int, int> boundary_edge(std::size_t e) const {
    return {boundary_loop[e], boundary_loop[(e + 1) % boundary_loop.size()]};
  }
  double boundary_edge_length(std::size_t e) const {
    const auto [a, b] = boundary_edge(e);
    return std::hypot(vertices[b].x - vertices[a].x, vertices[b].y - vertices[a].y);
  }

  bool operator==(const TriMesh&) const = default;
};

inline double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

/// Throws ValidationError if the mesh breaks any structural invariant.
inline void validate(const TriMesh& m) {
  const int V = static_cast<int>(m.vertices.size());
  if (V < 3 || m.triangles.empty()) throw ValidationError("mesh needs at least one triangle");
  for (const auto& p : m.vertices) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ValidationError("non-finite vertex coordinate");
  }
  // Edge -> count of adjacent triangles; boundary edges have exactly one.
  std::map<std::pair<int, int>, int> edge_count;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tri = m.triangles[t];
    for (int v : tri) {
      if (v < 0 || v >= V) throw ValidationError("triangle " + std::to_string(t) + " has an out-of-range index");
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      throw ValidationError("triangle " + std::to_string(t) + " repeats a vertex");
    }
    if (!(signed_area(m.vertices[tri[0]], m.vertices[tri[1]], m.vertices[tri[2]]) > 0.0)) {
      throw ValidationError("triangle " + std::to_string(t) + " has nonpositive signed area");
    }
    for (int k = 0; k < 3; ++k) {
      int a = tri[k], b = tri[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++edge_count[{a, b}];
    }
  }
  std::map<std::pair<int, int>, int> open_edges;
  for (const auto& [e, n] : edge_count) {
    if (n > 2) throw ValidationError("edge shared by more than two triangles");
    if (n == 1) open_edges.insert({e, 0});
  }
  const auto& loop = m.boundary_loop;
  if (loop.size() < 3) throw ValidationError("boundary loop needs at least three vertices");
  std::vector<char> seen(V, 0);
  for (int v : loop) {
    if (v < 0 || v >= V) throw ValidationError("boundary loop index out of range");
    if (seen[v]) throw ValidationError("boundary loop visits a vertex twice");
    seen[v] = 1;
  }
  for (std::size_t e = 0; e < loop.size(); ++e) {
    int a = loop[e], b = loop[(e + 1) % loop.size()];
    if (a > b) std::swap(a, b);
    auto it = open_edges.find({a, b});
    if (it == open_edges.end()) {
      throw ValidationError("boundary loop edge " + std::to_string(e) + " is not a boundary edge of exactly one triangle");
    }
    ++it->second;
  }
  if (open_edges.size() != loop.size()) {
    throw ValidationError("boundary is not a single closed loop (" + std::to_string(open_edges.size()) +
                          " boundary edges, loop has " + std::to_string(loop.size()) + ")");
  }
  double twice_area = 0.0;
  for (std::size_t e = 0; e < loop.size(); ++e) {
    const Point& a = m.vertices[loop[e]];
    const Point& b = m.vertices[loop[(e + 1) % loop.size()]];
    twice_area += a.x * b.y - b.x * a.y;
  }
  if (!(twice_area > 0.0)) throw ValidationError("boundary loop is not counterclockwise");
}

/// Polar triangulation of the unit disk: center vertex plus nr rings of nb vertices each.
inline TriMesh generate_disk_mesh(int nb, int nr) {
  if (nb < 8 || nb % 2 != 0) throw InvalidArgument("nb must be even and at least 8, got " + std::to_string(nb));
  if (nr < 1) throw InvalidArgument("nr must be at least 1, got " + std::to_string(nr));
  TriMesh m;
  m.vertices.reserve(1 + static_cast<std::size_t>(nb) * nr);
  m.vertices.push_back({0.0, 0.0});
  for (int k = 1; k <= nr; ++k) {
    const double rad = static_cast<double>(k) / nr;
    for (int j = 0; j < nb; ++j) {
      const double ang = 2.0 * std::numbers::pi * j / nb;
      if (k == nr) {
        // Exact unit modulus up to rounding of cos/sin themselves.
        m.vertices.push_back({std::cos(ang), std::sin(ang)});
      } else {
        m.vertices.push_back({rad * std::cos(ang), rad * std::sin(ang)});
      }
    }
  }
  auto ring = [nb](int k, int j) { return 1 + (k - 1) * nb + ((j % nb) + nb) % nb; };
  for (int j = 0; j < nb; ++j) m.triangles.push_back({0, ring(1, j), ring(1, j + 1)});
  for (int k = 1; k < nr; ++k) {
    for (int j = 0; j < nb; ++j) {
      const int a = ring(k, j), b = ring(k, j + 1), c = ring(k + 1, j), d = ring(k + 1, j + 1);
      // Alternate the diagonal to avoid a global bias.
      if ((j + k) % 2 == 0) {
        m.triangles.push_back({a, c, d});
        m.triangles.push_back({a, d, b});
      } else {
        m.triangles.push_back({a, c, b});
        m.triangles.push_back({b, c, d});
      }
    }
  }
  for (int j = 0; j < nb; ++j) m.boundary_loop.push_back(ring(nr, j));
  return m;
}

inline void write_mesh(const TriMesh& m, std::ostream& os) {
  validate(m);
  os << "bscch-mesh 1\n" << m.vertices.size() << ' ' << m.triangles.size() << ' ' << m.boundary_loop.size() << '\n';
  os << std::setprecision(17);
  for (const auto& p : m.vertices) os << p.x << ' ' << p.y << '\n';
  for (const auto& t : m.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  for (int v : m.boundary_loop) os << v << '\n';
}

inline void write_mesh(const TriMesh& m, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot open '" + path + "' for writing");
  write_mesh(m, os);
}

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}
  // Next non-blank line as a token stream; throws at end of input.
  std::istringstream next(const char* what) {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return std::istringstream(line);
    }
    throw ParseError(std::string("unexpected end of file, expected ") + what, line_ + 1);
  }
  int line() const { return line_; }
  template <class... T>
  void read(const char* what, T&... out) {
    auto ss = next(what);
    if (!(ss >> ... >> out)) throw ParseError(std::string("malformed ") + what, line_);
    std::string extra;
    if (ss >> extra) throw ParseError(std::string("trailing tokens after ") + what, line_);
  }

 private:
  std::istream& is_;
  int line_ = 0;
};

}  // namespace detail

inline TriMesh read_mesh(std::istream& is) {
  detail::LineReader in(is);
  {
    std::string magic;
    int version = 0;
    in.read("header", magic, version);
    if (magic != "bscch-mesh" || version != 1) throw ParseError("expected header 'bscch-mesh 1'", in.line());
  }
  long long V = 0, T = 0, B = 0;
  in.read("counts 'V T B'", V, T, B);
  if (V < 0 || T < 0 || B < 0 || V > (1LL << 31) - 1) throw ParseError("invalid counts", in.line());
  TriMesh m;
  m.vertices.resize(V);
  m.triangles.resize(T);
  m.boundary_loop.resize(B);
  for (auto& p : m.vertices) in.read("vertex 'x y'", p.x, p.y);
  for (auto& t : m.triangles) in.read("triangle 'i j k'", t[0], t[1], t[2]);
  for (auto& b : m.boundary_loop) in.read("boundary index", b);
  validate(m);
  return m;
}

inline TriMesh read_mesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot open mesh file '" + path + "'");
  return read_mesh(is);
}

struct MeshStats {
  double h_max = 0.0;
  double area = 0.0;
  double perimeter = 0.0;
  double min_angle = 0.0;  // degrees
};

inline MeshStats mesh_stats(const TriMesh& m) {
  MeshStats s;
  s.min_angle = 180.0;
  for (const auto& t : m.triangles) {
    const Point& a = m.vertices[t[0]];
    const Point& b = m.vertices[t[1]];
    const Point& c = m.vertices[t[2]];
    s.area += signed_area(a, b, c);
    const double la = std::hypot(b.x - c.x, b.y - c.y);
    const double lb = std::hypot(a.x - c.x, a.y - c.y);
    const double lc = std::hypot(a.x - b.x, a.y - b.y);
    s.h_max = std::max({s.h_max, la, lb, lc});
    auto angle = [](double opp, double u, double v) {
      const double cosv = std::clamp((u * u + v * v - opp * opp) / (2.0 * u * v), -1.0, 1.0);
      return std::acos(cosv) * 180.0 / std::numbers::pi;
    };
    s.min_angle = std::min({s.min_angle, angle(la, lb, lc), angle(lb, la, lc), angle(lc, la, lb)});
  }
  for (std::size_t e = 0; e < m.boundary_loop.size(); ++e) s.perimeter += m.boundary_edge_length(e);
  return s;
}

}  // namespace bscch
