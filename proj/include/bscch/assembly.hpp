#pragma once

// P1 finite-element forms on the bulk triangulation and on its boundary polygon.
//
// Pair vectors are stored as [bulk (V entries); surface (B entries)], the surface
// part indexed by position in the boundary loop.

#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "bscch/common.hpp"
#include "bscch/error.hpp"
#include "bscch/mesh.hpp"

namespace bscch {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Vector = Eigen::VectorXd;
using Triplets = std::vector<Eigen::Triplet<double>>;

/// Coupling parameters (K, L, alpha, beta); K and L may be +inf.
struct CouplingParams {
  double K = 1.0;
  double L = 1.0;
  double alpha = 1.0;
  double beta = 1.0;

  static double sigma(double x) { return (x > 0.0 && std::isfinite(x)) ? 1.0 / x : 0.0; }
  double sigma_K() const { return sigma(K); }
  double sigma_L() const { return sigma(L); }

  /// Throws InvalidArgument when the parameters are out of range or (A2) fails for the given measures.
  void validate(double area, double perimeter) const {
    if (std::isnan(K) || K < 0.0) throw InvalidArgument("K must lie in [0, inf]");
    if (std::isnan(L) || L < 0.0) throw InvalidArgument("L must lie in [0, inf]");
    if (!std::isfinite(alpha) || !std::isfinite(beta)) throw InvalidArgument("alpha and beta must be finite");
    if (alpha * beta * area + perimeter == 0.0) {
      throw InvalidArgument("alpha*beta*|Omega| + |Gamma| must be nonzero");
    }
  }
};

struct FormsBundle {
  SparseMatrix M_bulk, A_bulk;  // V x V
  SparseMatrix M_surf, A_surf;  // B x B
  SparseMatrix trace;           // B x V, selects the bulk value at each loop position
  Vector lumped_bulk, lumped_surf;
  double area = 0.0;
  double perimeter = 0.0;
  std::vector<int> interior;    // bulk vertices not on the boundary, ascending

  Eigen::Index nv() const { return M_bulk.rows(); }
  Eigen::Index nb() const { return M_surf.rows(); }
  Eigen::Index n_pair() const { return nv() + nb(); }
};

namespace detail {

struct P1Element {
  double area;
  double gx[3], gy[3];  // gradients of the barycentric basis
};

inline P1Element p1_element(const TriMesh& m, const std::array<int, 3>& t) {
  const Point& a = m.vertices[t[0]];
  const Point& b = m.vertices[t[1]];
  const Point& c = m.vertices[t[2]];
  P1Element e;
  e.area = signed_area(a, b, c);
  const double inv = 1.0 / (2.0 * e.area);
  e.gx[0] = (b.y - c.y) * inv;
  e.gy[0] = (c.x - b.x) * inv;
  e.gx[1] = (c.y - a.y) * inv;
  e.gy[1] = (a.x - c.x) * inv;
  e.gx[2] = (a.y - b.y) * inv;
  e.gy[2] = (b.x - a.x) * inv;
  return e;
}

inline SparseMatrix from_triplets(Eigen::Index rows, Eigen::Index cols, const Triplets& t) {
  SparseMatrix A(rows, cols);
  A.setFromTriplets(t.begin(), t.end());
  A.makeCompressed();
  return A;
}

inline SparseMatrix bulk_stiffness(const TriMesh& m, const std::vector<double>& coef) {
  Triplets t;
  t.reserve(9 * m.triangles.size());
  for (std::size_t k = 0; k < m.triangles.size(); ++k) {
    const auto& tri = m.triangles[k];
    const auto e = p1_element(m, tri);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        t.emplace_back(tri[i], tri[j], coef[k] * e.area * (e.gx[i] * e.gx[j] + e.gy[i] * e.gy[j]));
      }
    }
  }
  const auto V = static_cast<Eigen::Index>(m.num_vertices());
  return from_triplets(V, V, t);
}

inline SparseMatrix surface_stiffness(const TriMesh& m, const std::vector<double>& coef) {
  const auto B = static_cast<Eigen::Index>(m.num_boundary());
  Triplets t;
  t.reserve(4 * B);
  for (Eigen::Index e = 0; e < B; ++e) {
    const auto a = e, b = (e + 1) % B;
    const double k = coef[e] / m.boundary_edge_length(e);
    t.emplace_back(a, a, k);
    t.emplace_back(b, b, k);
    t.emplace_back(a, b, -k);
    t.emplace_back(b, a, -k);
  }
  return from_triplets(B, B, t);
}

}  // namespace detail

inline FormsBundle assemble_core(const TriMesh& m) {
  const auto V = static_cast<Eigen::Index>(m.num_vertices());
  const auto B = static_cast<Eigen::Index>(m.num_boundary());
  FormsBundle f;
  Triplets mass;
  mass.reserve(9 * m.triangles.size());
  for (const auto& tri : m.triangles) {
    const auto e = detail::p1_element(m, tri);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) mass.emplace_back(tri[i], tri[j], e.area * (i == j ? 2.0 : 1.0) / 12.0);
    }
    f.area += e.area;
  }
  f.M_bulk = detail::from_triplets(V, V, mass);
  f.A_bulk = detail::bulk_stiffness(m, std::vector<double>(m.num_triangles(), 1.0));

  Triplets smass, tr;
  for (Eigen::Index e = 0; e < B; ++e) {
    const auto a = e, b = (e + 1) % B;
    const double len = m.boundary_edge_length(e);
    smass.emplace_back(a, a, len / 3.0);
    smass.emplace_back(b, b, len / 3.0);
    smass.emplace_back(a, b, len / 6.0);
    smass.emplace_back(b, a, len / 6.0);
    f.perimeter += len;
    tr.emplace_back(e, m.boundary_loop[e], 1.0);
  }
  f.M_surf = detail::from_triplets(B, B, smass);
  f.A_surf = detail::surface_stiffness(m, std::vector<double>(B, 1.0));
  f.trace = detail::from_triplets(B, V, tr);

  f.lumped_bulk = f.M_bulk * Vector::Ones(V);
  f.lumped_surf = f.M_surf * Vector::Ones(B);

  std::vector<char> on_boundary(V, 0);
  for (int v : m.boundary_loop) on_boundary[v] = 1;
  for (Eigen::Index v = 0; v < V; ++v) {
    if (!on_boundary[v]) f.interior.push_back(static_cast<int>(v));
  }
  return f;
}

/// Scalar mobility m(s): constant m0, or m0 + m1 (1 - clamp(s,-1,1)^2).
struct Mobility {
  enum class Kind { constant, degenerate_capped };
  Kind kind = Kind::constant;
  double m0 = 1.0;
  double m1 = 0.0;

  static Mobility constant(double m0) { return Mobility{Kind::constant, m0, 0.0}.validated(); }
  static Mobility degenerate_capped(double m0, double m1) {
    return Mobility{Kind::degenerate_capped, m0, m1}.validated();
  }

  Mobility validated() const {
    if (!(m0 > 0.0) || !std::isfinite(m0)) throw InvalidArgument("mobility m0 must be positive and finite");
    if (kind == Kind::degenerate_capped && (!(m1 >= 0.0) || !std::isfinite(m1))) {
      throw InvalidArgument("mobility m1 must be nonnegative and finite");
    }
    return *this;
  }
  bool is_constant() const { return kind == Kind::constant || m1 == 0.0; }

  double operator()(double s) const {
    if (kind == Kind::constant) return m0;
    const double c = std::clamp(s, -1.0, 1.0);
    return m0 + m1 * (1.0 - c * c);
  }
};

/// Stiffness weighted by m at the element (bulk) or edge (surface) mean of the lagged field.
/// The field length selects the variant: V for bulk, B for surface.
inline SparseMatrix assemble_mobility_stiffness(const TriMesh& m, const Mobility& mob, const Vector& field) {
  mob.validated();
  if (!field.allFinite()) throw InvalidArgument("mobility field has non-finite entries");
  if (field.size() == static_cast<Eigen::Index>(m.num_vertices())) {
    std::vector<double> coef(m.num_triangles());
    for (std::size_t k = 0; k < m.triangles.size(); ++k) {
      const auto& t = m.triangles[k];
      coef[k] = mob((field[t[0]] + field[t[1]] + field[t[2]]) / 3.0);
    }
    return detail::bulk_stiffness(m, coef);
  }
  if (field.size() == static_cast<Eigen::Index>(m.num_boundary())) {
    const auto B = field.size();
    std::vector<double> coef(B);
    for (Eigen::Index e = 0; e < B; ++e) coef[e] = mob(0.5 * (field[e] + field[(e + 1) % B]));
    return detail::surface_stiffness(m, coef);
  }
  throw InvalidArgument("mobility field length " + std::to_string(field.size()) +
                        " matches neither the vertex count nor the boundary count");
}

/// Prescribed velocities: rigid rotation omega(-y, x) in the bulk, tangential speed on the loop.
struct VelocityField {
  enum class Bulk { none, rigid_rotation };
  enum class Surface { none, rotation };
  Bulk bulk = Bulk::none;
  Surface surface = Surface::none;
  double omega = 0.0;
  double speed = 0.0;
  double ramp = 0.0;  // linear ramp duration; 0 disables

  double factor(double t) const {
    if (!(ramp > 0.0)) return 1.0;
    return std::clamp(t / ramp, 0.0, 1.0);
  }
  bool is_none() const { return bulk == Bulk::none && surface == Surface::none; }
};

struct ConvectionOperators {
  SparseMatrix bulk;  // (C)_{ij} = int N_j v . grad N_i
  SparseMatrix surf;
};

inline ConvectionOperators assemble_convection(const TriMesh& m, const VelocityField& vel, double t) {
  if (!std::isfinite(t)) throw InvalidArgument("convection time must be finite");
  if (!std::isfinite(vel.omega) || !std::isfinite(vel.speed) || !(vel.ramp >= 0.0)) {
    throw InvalidArgument("velocity parameters must be finite with ramp >= 0");
  }
  const auto V = static_cast<Eigen::Index>(m.num_vertices());
  const auto B = static_cast<Eigen::Index>(m.num_boundary());
  const double fac = vel.factor(t);
  ConvectionOperators c;
  Triplets tb;
  if (vel.bulk == VelocityField::Bulk::rigid_rotation && vel.omega != 0.0) {
    const double om = fac * vel.omega;
    tb.reserve(9 * m.triangles.size());
    for (const auto& tri : m.triangles) {
      const auto e = detail::p1_element(m, tri);
      double cx = 0.0, cy = 0.0;
      for (int v : tri) {
        cx += m.vertices[v].x / 3.0;
        cy += m.vertices[v].y / 3.0;
      }
      const double vx = -om * cy, vy = om * cx;
      for (int i = 0; i < 3; ++i) {
        const double adv = e.area * (vx * e.gx[i] + vy * e.gy[i]) / 3.0;
        for (int j = 0; j < 3; ++j) tb.emplace_back(tri[i], tri[j], adv);
      }
    }
  }
  c.bulk = detail::from_triplets(V, V, tb);
  Triplets ts;
  if (vel.surface == VelocityField::Surface::rotation && vel.speed != 0.0) {
    const double half = 0.5 * fac * vel.speed;
    for (Eigen::Index e = 0; e < B; ++e) {
      const auto a = e, b = (e + 1) % B;
      ts.emplace_back(a, a, -half);
      ts.emplace_back(a, b, -half);
      ts.emplace_back(b, a, half);
      ts.emplace_back(b, b, half);
    }
  }
  c.surf = detail::from_triplets(B, B, ts);
  return c;
}

/// sigma * int (w v - u|_Gamma)(w eta - zeta|_Gamma) on pair vectors [u; v].
inline SparseMatrix coupling_block(const FormsBundle& f, double sigma, double w) {
  const auto V = f.nv(), B = f.nb(), N = f.n_pair();
  SparseMatrix C(N, N);
  if (sigma == 0.0) return C;
  const SparseMatrix TtM = SparseMatrix(f.trace.transpose()) * f.M_surf;
  const SparseMatrix TtMT = TtM * f.trace;
  Triplets t;
  for (Eigen::Index k = 0; k < TtMT.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(TtMT, k); it; ++it) t.emplace_back(it.row(), it.col(), sigma * it.value());
  }
  for (Eigen::Index k = 0; k < TtM.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(TtM, k); it; ++it) {
      t.emplace_back(it.row(), V + it.col(), -sigma * w * it.value());
      t.emplace_back(V + it.col(), it.row(), -sigma * w * it.value());
    }
  }
  for (Eigen::Index k = 0; k < B; ++k) {
    for (SparseMatrix::InnerIterator it(f.M_surf, k); it; ++it) {
      t.emplace_back(V + it.row(), V + it.col(), sigma * w * w * it.value());
    }
  }
  return detail::from_triplets(N, N, t);
}

/// Block-diagonal pair operator diag(Ab, As).
inline SparseMatrix block_diag(const SparseMatrix& Ab, const SparseMatrix& As) {
  const auto V = Ab.rows(), B = As.rows();
  Triplets t;
  t.reserve(Ab.nonZeros() + As.nonZeros());
  for (Eigen::Index k = 0; k < Ab.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(Ab, k); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
  }
  for (Eigen::Index k = 0; k < As.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(As, k); it; ++it) t.emplace_back(V + it.row(), V + it.col(), it.value());
  }
  return detail::from_triplets(V + B, V + B, t);
}

/// The form <., .>_{K,alpha}: A_bulk (+) A_surf plus the sigma-weighted coupling.
inline SparseMatrix bulk_surface_form(const FormsBundle& f, double sigma, double w) {
  SparseMatrix A = block_diag(f.A_bulk, f.A_surf);
  if (sigma != 0.0) A += coupling_block(f, sigma, w);
  return A;
}

inline SparseMatrix pair_mass(const FormsBundle& f) { return block_diag(f.M_bulk, f.M_surf); }

/// Trial/test space for one equation pair: full pair vector = P * reduced vector.
/// Dirichlet spaces keep interior bulk dofs then all surface dofs; the bulk boundary
/// value is weight * surface value.
struct CaseSpace {
  SparseMatrix P;
  bool dirichlet = false;
  double weight = 1.0;
  std::vector<int> interior;
  Eigen::Index nv = 0;

  Eigen::Index n_reduced() const { return P.cols(); }

  /// Reduced coordinates of a full pair vector that already lies in the space.
  Vector restrict(const Vector& full) const {
    if (!dirichlet) return full;
    const auto ni = static_cast<Eigen::Index>(interior.size());
    const auto B = full.size() - nv;
    Vector r(ni + B);
    for (Eigen::Index k = 0; k < ni; ++k) r[k] = full[interior[k]];
    r.tail(B) = full.tail(B);
    return r;
  }
};

inline CaseSpace build_case_space(const TriMesh& m, const FormsBundle& f, bool dirichlet, double weight) {
  const auto V = f.nv(), B = f.nb(), N = f.n_pair();
  CaseSpace s;
  s.dirichlet = dirichlet;
  s.weight = weight;
  s.interior = f.interior;
  s.nv = V;
  Triplets t;
  if (!dirichlet) {
    for (Eigen::Index i = 0; i < N; ++i) t.emplace_back(i, i, 1.0);
    s.P = detail::from_triplets(N, N, t);
    return s;
  }
  const auto ni = static_cast<Eigen::Index>(f.interior.size());
  for (Eigen::Index k = 0; k < ni; ++k) t.emplace_back(f.interior[k], k, 1.0);
  for (Eigen::Index e = 0; e < B; ++e) {
    t.emplace_back(V + e, ni + e, 1.0);
    if (weight != 0.0) t.emplace_back(m.boundary_loop[e], ni + e, weight);
  }
  s.P = detail::from_triplets(N, ni + B, t);
  return s;
}

/// phi_space realises H1_{K,alpha} (slaved when K = 0); mu_space realises H1_{L,beta} (slaved when L = 0).
struct CaseSpaces {
  CaseSpace phi_space;
  CaseSpace mu_space;
};

inline CaseSpaces build_case_spaces(const TriMesh& m, const FormsBundle& f, const CouplingParams& cp) {
  cp.validate(f.area, f.perimeter);
  return {build_case_space(m, f, cp.K == 0.0, cp.alpha), build_case_space(m, f, cp.L == 0.0, cp.beta)};
}

}  // namespace bscch
