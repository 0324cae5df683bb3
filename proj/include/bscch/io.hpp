#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "bscch/diagnostics.hpp"
#include "bscch/error.hpp"
#include "bscch/mesh.hpp"
#include "bscch/model.hpp"

namespace bscch {

inline void write_csv(std::ostream& os, const std::vector<DiagnosticsRecord>& records) {
  os << DiagnosticsRecord::csv_header << '\n';
  os << std::setprecision(17);
  for (const auto& r : records) {
    os << r.t << ',' << r.mass_bulk << ',' << r.mass_surf << ',' << r.mass_combined << ',' << r.energy << ','
       << r.diss_bulk << ',' << r.diss_surf << ',' << r.diss_robin << ',' << r.conv_power_bulk << ','
       << r.conv_power_surf << ',' << r.energy_residual << ',' << r.sep_margin_bulk << ',' << r.sep_margin_surf
       << ',' << r.newton_iters << '\n';
  }
}

inline void write_csv(const std::filesystem::path& path, const std::vector<DiagnosticsRecord>& records) {
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write '" + path.string() + "'");
  write_csv(os, records);
}

/// Legacy ASCII unstructured grid with point scalars phi and mu.
inline void write_vtk_bulk(std::ostream& os, const TriMesh& m, const State& s) {
  os << std::setprecision(17);
  os << "# vtk DataFile Version 3.0\nbscch bulk t=" << s.t << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  os << "POINTS " << m.vertices.size() << " double\n";
  for (const auto& p : m.vertices) os << p.x << ' ' << p.y << " 0\n";
  os << "CELLS " << m.triangles.size() << ' ' << 4 * m.triangles.size() << '\n';
  for (const auto& t : m.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "CELL_TYPES " << m.triangles.size() << '\n';
  for (std::size_t k = 0; k < m.triangles.size(); ++k) os << "5\n";
  os << "POINT_DATA " << m.vertices.size() << '\n';
  for (const auto& [name, v] : {std::pair<const char*, const Vector*>{"phi", &s.phi}, {"mu", &s.mu}}) {
    os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index i = 0; i < v->size(); ++i) os << (*v)[i] << '\n';
  }
}

/// Legacy ASCII polydata: the boundary loop as one closed polyline with scalars psi and theta.
inline void write_vtk_surface(std::ostream& os, const TriMesh& m, const State& s) {
  const auto B = m.boundary_loop.size();
  os << std::setprecision(17);
  os << "# vtk DataFile Version 3.0\nbscch surface t=" << s.t << "\nASCII\nDATASET POLYDATA\n";
  os << "POINTS " << B << " double\n";
  for (int v : m.boundary_loop) os << m.vertices[v].x << ' ' << m.vertices[v].y << " 0\n";
  os << "LINES 1 " << B + 2 << '\n' << B + 1;
  for (std::size_t e = 0; e < B; ++e) os << ' ' << e;
  os << " 0\n";
  os << "POINT_DATA " << B << '\n';
  for (const auto& [name, v] : {std::pair<const char*, const Vector*>{"psi", &s.psi}, {"theta", &s.theta}}) {
    os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (Eigen::Index i = 0; i < v->size(); ++i) os << (*v)[i] << '\n';
  }
}

inline void write_vtk_snapshot(const std::filesystem::path& dir, int index, const TriMesh& m, const State& s) {
  std::ostringstream stem;
  stem << "snap_" << std::setw(6) << std::setfill('0') << index;
  std::ofstream b(dir / (stem.str() + "_bulk.vtk"));
  std::ofstream g(dir / (stem.str() + "_surf.vtk"));
  if (!b || !g) throw InvalidArgument("cannot write VTK snapshot in '" + dir.string() + "'");
  write_vtk_bulk(b, m, s);
  write_vtk_surface(g, m, s);
}

}  // namespace bscch
