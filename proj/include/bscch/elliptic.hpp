#pragma once

// Bulk-surface elliptic solves: the inverse operator S_{L,beta}, its dual norm, the
// coupled Poisson problem, and the bulk-surface Poincare constant.
//
// Mean constraints are imposed with Lagrange multipliers on the reduced case space.

#include <Eigen/SparseLU>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "bscch/assembly.hpp"
#include "bscch/error.hpp"
#include "bscch/mesh.hpp"

namespace bscch {

/// Nodal pair (bulk on all vertices, surface on loop positions).
struct BulkSurfacePair {
  Vector bulk;
  Vector surf;

  Vector stacked() const {
    Vector x(bulk.size() + surf.size());
    x << bulk, surf;
    return x;
  }
  static BulkSurfacePair split(const Vector& x, Eigen::Index nv) {
    return {x.head(nv), x.tail(x.size() - nv)};
  }
  void check(const FormsBundle& f) const {
    if (bulk.size() != f.nv() || surf.size() != f.nb()) {
      throw InvalidArgument("pair sizes (" + std::to_string(bulk.size()) + ", " + std::to_string(surf.size()) +
                            ") do not match the mesh (" + std::to_string(f.nv()) + ", " + std::to_string(f.nb()) + ")");
    }
    if (!bulk.allFinite() || !surf.allFinite()) throw InvalidArgument("pair has non-finite entries");
  }
};

/// (beta |Omega| <phi> + |Gamma| <psi>) / (beta^2 |Omega| + |Gamma|).
inline double combined_mean(const FormsBundle& f, const Vector& bulk, const Vector& surf, double beta) {
  const double num = beta * f.lumped_bulk.dot(bulk) + f.lumped_surf.dot(surf);
  const double den = beta * beta * f.area + f.perimeter;
  if (den == 0.0) throw InvalidArgument("beta^2 |Omega| + |Gamma| vanishes");
  return num / den;
}

inline std::array<double, 2> separate_means(const FormsBundle& f, const Vector& bulk, const Vector& surf) {
  return {f.lumped_bulk.dot(bulk) / f.area, f.lumped_surf.dot(surf) / f.perimeter};
}

enum class MeanMode { combined, separate };

/// Mean functionals as vectors on the stacked pair: combined gives one row, separate two.
inline std::vector<Vector> mean_functionals(const FormsBundle& f, MeanMode mode, double w) {
  const auto V = f.nv(), B = f.nb();
  if (mode == MeanMode::combined) {
    Vector c(V + B);
    c << w * f.lumped_bulk, f.lumped_surf;
    return {c};
  }
  Vector c1 = Vector::Zero(V + B), c2 = Vector::Zero(V + B);
  c1.head(V) = f.lumped_bulk;
  c2.tail(B) = f.lumped_surf;
  return {c1, c2};
}

/// Factorised bordered system [P^T A P, C^T; C, 0] for a fixed operator, case space and constraints.
class ConstrainedSolver {
 public:
  ConstrainedSolver(const SparseMatrix& A_full, const CaseSpace& space, const std::vector<Vector>& constraints)
      : P_(space.P) {
    Ar_ = SparseMatrix(P_.transpose()) * A_full * P_;
    const auto n = Ar_.cols();
    const auto k = static_cast<Eigen::Index>(constraints.size());
    Cr_.resize(k, n);
    for (Eigen::Index i = 0; i < k; ++i) Cr_.row(i) = (P_.transpose() * constraints[i]).transpose();

    Triplets t;
    t.reserve(Ar_.nonZeros() + 2 * k * n);
    for (Eigen::Index c = 0; c < Ar_.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(Ar_, c); it; ++it) t.emplace_back(it.row(), it.col(), it.value());
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (Cr_(i, j) != 0.0) {
          t.emplace_back(n + i, j, Cr_(i, j));
          t.emplace_back(j, n + i, Cr_(i, j));
        }
      }
    }
    SparseMatrix K(n + k, n + k);
    K.setFromTriplets(t.begin(), t.end());
    K.makeCompressed();
    lu_.analyzePattern(K);
    lu_.factorize(K);
    if (lu_.info() != Eigen::Success) throw SolverFailure("bordered elliptic system is singular");
  }

  /// Reduced solution of P^T A P y + C^T lambda = b, C y = targets.
  Vector solve_reduced(const Vector& b_reduced, const Vector& targets) const {
    const auto n = Ar_.cols(), k = Cr_.rows();
    Vector rhs(n + k);
    rhs << b_reduced, targets;
    Vector sol = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success || !sol.allFinite()) throw SolverFailure("bordered elliptic solve failed");
    return sol.head(n);
  }
  Vector solve_full(const Vector& b_reduced, const Vector& targets) const {
    return P_ * solve_reduced(b_reduced, targets);
  }

  const SparseMatrix& P() const { return P_; }
  const SparseMatrix& reduced_operator() const { return Ar_; }
  Eigen::Index n_constraints() const { return Cr_.rows(); }

 private:
  SparseMatrix P_;
  SparseMatrix Ar_;
  Eigen::MatrixXd Cr_;
  Eigen::SparseLU<SparseMatrix> lu_;
};

namespace detail {

inline void require_mean_free(const std::vector<Vector>& constraints, const Vector& x, const char* what) {
  const double scale = std::max(x.lpNorm<Eigen::Infinity>(), std::numeric_limits<double>::min());
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    const double weight = constraints[i].lpNorm<1>();
    const double m = weight > 0.0 ? constraints[i].dot(x) / weight : 0.0;
    if (std::abs(m) > 1e-10 * scale) {
      std::ostringstream os;
      os << what << " violates the mean condition: residual mean " << m;
      if (constraints.size() > 1) os << " (component " << i << ")";
      throw InvalidArgument(os.str());
    }
  }
}

}  // namespace detail

/// Discrete S_{L,beta}: <S x, z>_{L,beta} = -(x, z) for all z in H1_{L,beta}, with S x mean-free.
class InverseOperatorS {
 public:
  InverseOperatorS(const TriMesh& mesh, const FormsBundle& forms, const CouplingParams& cp)
      : forms_(forms),
        mode_(std::isinf(cp.L) ? MeanMode::separate : MeanMode::combined),
        constraints_(mean_functionals(forms, mode_, cp.beta)),
        form_(bulk_surface_form(forms, cp.sigma_L(), cp.beta)),
        mass_(pair_mass(forms)),
        solver_(form_, build_case_spaces(mesh, forms, cp).mu_space, constraints_) {}

  /// Stacked pair in, stacked pair out.
  Vector apply(const Vector& x) const {
    if (x.size() != forms_.n_pair() || !x.allFinite()) throw InvalidArgument("S applied to a malformed pair");
    detail::require_mean_free(constraints_, x, "right-hand side");
    const Vector b = -(solver_.P().transpose() * (mass_ * x));
    return solver_.solve_full(b, Vector::Zero(solver_.n_constraints()));
  }
  BulkSurfacePair apply(const BulkSurfacePair& x) const {
    x.check(forms_);
    return BulkSurfacePair::split(apply(x.stacked()), forms_.nv());
  }

  double dual_norm(const Vector& x) const {
    const Vector s = apply(x);
    return std::sqrt(std::max(0.0, s.dot(form_ * s)));
  }

  /// <y, z>_{L,beta}.
  double inner(const Vector& y, const Vector& z) const { return y.dot(form_ * z); }
  const SparseMatrix& form() const { return form_; }
  const SparseMatrix& mass() const { return mass_; }
  const SparseMatrix& P() const { return solver_.P(); }
  const std::vector<Vector>& constraints() const { return constraints_; }
  MeanMode mode() const { return mode_; }

 private:
  const FormsBundle& forms_;
  MeanMode mode_;
  std::vector<Vector> constraints_;
  SparseMatrix form_;
  SparseMatrix mass_;
  ConstrainedSolver solver_;
};

inline BulkSurfacePair solve_inverse_S(const TriMesh& mesh, const FormsBundle& forms, const CouplingParams& cp,
                                       const BulkSurfacePair& rhs) {
  return InverseOperatorS(mesh, forms, cp).apply(rhs);
}

inline double dual_norm(const TriMesh& mesh, const FormsBundle& forms, const CouplingParams& cp,
                        const BulkSurfacePair& x) {
  x.check(forms);
  return InverseOperatorS(mesh, forms, cp).dual_norm(x.stacked());
}

/// Weak solution of -Lap u = f, K d_n u = alpha v - u, -Lap_Gamma v + alpha d_n u = g
/// (K = 0: u = alpha v on Gamma; K = inf: d_n u = 0). Mean targets default to zero.
inline BulkSurfacePair solve_coupled_poisson(const TriMesh& mesh, const FormsBundle& forms, double K, double alpha,
                                             const Vector& f, const Vector& g,
                                             std::vector<double> mean_targets = {}) {
  const CouplingParams cp{K, 1.0, alpha, 1.0};
  cp.validate(forms.area, forms.perimeter);
  BulkSurfacePair data{f, g};
  data.check(forms);
  const MeanMode mode = std::isinf(K) ? MeanMode::separate : MeanMode::combined;
  const auto constraints = mean_functionals(forms, mode, alpha);
  const SparseMatrix A = bulk_surface_form(forms, cp.sigma_K(), alpha);
  const CaseSpace space = build_case_spaces(mesh, forms, cp).phi_space;

  const Vector load = pair_mass(forms) * data.stacked();
  // Compatibility: the load must annihilate the kernel directions (alpha, 1) or (1,0),(0,1).
  {
    std::vector<Vector> kernel;
    const auto V = forms.nv(), B = forms.nb();
    if (mode == MeanMode::combined) {
      Vector d(V + B);
      d << Vector::Constant(V, alpha), Vector::Ones(B);
      kernel.push_back(d);
    } else {
      Vector d1 = Vector::Zero(V + B), d2 = Vector::Zero(V + B);
      d1.head(V).setOnes();
      d2.tail(B).setOnes();
      kernel = {d1, d2};
    }
    const double scale = load.lpNorm<1>() * std::max(1.0, std::abs(alpha));
    for (const auto& d : kernel) {
      const double r = d.dot(load);
      if (std::abs(r) > 1e-10 * std::max(scale, std::numeric_limits<double>::min())) {
        std::ostringstream os;
        os << "incompatible data: alpha|Omega|<f> + |Gamma|<g> residual " << r;
        throw InvalidArgument(os.str());
      }
    }
  }
  Vector targets = Vector::Zero(static_cast<Eigen::Index>(constraints.size()));
  if (!mean_targets.empty()) {
    if (mean_targets.size() != constraints.size()) throw InvalidArgument("wrong number of mean targets");
    for (std::size_t i = 0; i < mean_targets.size(); ++i) targets[i] = mean_targets[i];
  }
  ConstrainedSolver solver(A, space, constraints);
  const Vector x = solver.solve_full(space.P.transpose() * load, targets);
  return BulkSurfacePair::split(x, forms.nv());
}

struct PoincareEstimate {
  double C_P = 0.0;
  double lambda_min = 0.0;
  int iterations = 0;
};

/// Smallest eigenvalue of <.,.>_{K,alpha} against the L2 pair product on the mean-free subspace.
inline PoincareEstimate estimate_poincare_constant(const TriMesh& mesh, const FormsBundle& forms, double K,
                                                   double alpha, double beta, int max_iter = 2000,
                                                   double rel_tol = 1e-12) {
  if (!(K >= 0.0) || std::isinf(K)) throw InvalidArgument("the Poincare estimate requires K in [0, inf)");
  const CouplingParams cp{K, 1.0, alpha, beta};
  cp.validate(forms.area, forms.perimeter);
  const auto V = forms.nv(), B = forms.nb();
  const SparseMatrix A = bulk_surface_form(forms, cp.sigma_K(), alpha);
  const SparseMatrix M = pair_mass(forms);
  const CaseSpace space = build_case_spaces(mesh, forms, cp).phi_space;
  // Mean-free means M-orthogonal to the kernel direction (alpha, 1).
  Vector d(V + B);
  d << Vector::Constant(V, alpha), Vector::Ones(B);
  const Vector c = M * d;
  ConstrainedSolver solver(A, space, {c});
  const SparseMatrix& P = space.P;
  const SparseMatrix Mr = SparseMatrix(P.transpose()) * M * P;
  const SparseMatrix& Ar = solver.reduced_operator();

  std::mt19937_64 rng(12345);
  std::normal_distribution<double> nd;
  Vector y(P.cols());
  for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = nd(rng);
  const Vector zero = Vector::Zero(1);
  y = solver.solve_reduced(Mr * y, zero);
  double lambda = 0.0;
  for (int it = 1; it <= max_iter; ++it) {
    y /= std::sqrt(y.dot(Mr * y));
    const Vector z = solver.solve_reduced(Mr * y, zero);
    const double next = z.dot(Ar * z) / z.dot(Mr * z);
    y = z;
    if (it > 1 && std::abs(next - lambda) <= rel_tol * std::abs(next)) {
      if (!(next > 0.0)) throw SolverFailure("Poincare eigenvalue is not positive");
      return {1.0 / std::sqrt(next), next, it};
    }
    lambda = next;
  }
  throw SolverFailure("inverse iteration for the Poincare constant did not converge in " +
                      std::to_string(max_iter) + " iterations");
}

// Manufactured solutions on the unit disk.

struct MmsCase {
  double K;
  double alpha;
  std::function<double(double, double)> u, f, v, g;
};

inline MmsCase mms_case(double K) {
  auto cos2 = [](double x, double y) { return std::cos(2.0 * std::atan2(y, x)); };
  auto saddle = [](double x, double y) { return x * x - y * y; };
  auto zero = [](double, double) { return 0.0; };
  if (std::isinf(K)) {
    return {K, 1.0, [](double x, double y) { const double r2 = x * x + y * y; return (r2 - 1.0) * (r2 - 1.0); },
            [](double x, double y) { return 8.0 - 16.0 * (x * x + y * y); }, cos2,
            [cos2](double x, double y) { return 4.0 * cos2(x, y); }};
  }
  if (K == 0.0) {
    return {0.0, 1.0, saddle, zero, cos2, [cos2](double x, double y) { return 6.0 * cos2(x, y); }};
  }
  if (K == 1.0) {
    return {1.0, 3.0, saddle, zero, cos2, [cos2](double x, double y) { return 10.0 * cos2(x, y); }};
  }
  throw InvalidArgument("manufactured solutions exist for K in {0, 1, inf} only");
}

struct MmsLevel {
  int nb = 0;
  int nr = 0;
  double h_max = 0.0;
  double error_bulk = 0.0;
  double error_surf = 0.0;
  double error = 0.0;  // sqrt(bulk^2 + surf^2)
};

namespace detail {

inline double l2_error_bulk(const TriMesh& m, const Vector& uh, const std::function<double(double, double)>& u) {
  static constexpr double a1 = 0.059715871789770, b1 = 0.470142064105115, w1 = 0.132394152788506;
  static constexpr double a2 = 0.797426985353087, b2 = 0.101286507323456, w2 = 0.125939180544827;
  static const double pts[7][3] = {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {a1, b1, b1}, {b1, a1, b1}, {b1, b1, a1},
                                   {a2, b2, b2},                {b2, a2, b2}, {b2, b2, a2}};
  static const double wts[7] = {0.225, w1, w1, w1, w2, w2, w2};
  double s = 0.0;
  for (const auto& t : m.triangles) {
    const Point& A = m.vertices[t[0]];
    const Point& B = m.vertices[t[1]];
    const Point& C = m.vertices[t[2]];
    const double area = signed_area(A, B, C);
    for (int q = 0; q < 7; ++q) {
      const double x = pts[q][0] * A.x + pts[q][1] * B.x + pts[q][2] * C.x;
      const double y = pts[q][0] * A.y + pts[q][1] * B.y + pts[q][2] * C.y;
      const double vh = pts[q][0] * uh[t[0]] + pts[q][1] * uh[t[1]] + pts[q][2] * uh[t[2]];
      const double e = vh - u(x, y);
      s += area * wts[q] * e * e;
    }
  }
  return std::sqrt(s);
}

inline double l2_error_surf(const TriMesh& m, const Vector& vh, const std::function<double(double, double)>& v) {
  static const double gp[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
  static const double gw[3] = {5.0 / 18, 8.0 / 18, 5.0 / 18};
  const auto B = m.num_boundary();
  double s = 0.0;
  for (std::size_t e = 0; e < B; ++e) {
    const auto [a, b] = m.boundary_edge(e);
    const double len = m.boundary_edge_length(e);
    for (int q = 0; q < 3; ++q) {
      const double x = (1 - gp[q]) * m.vertices[a].x + gp[q] * m.vertices[b].x;
      const double y = (1 - gp[q]) * m.vertices[a].y + gp[q] * m.vertices[b].y;
      const double val = (1 - gp[q]) * vh[e] + gp[q] * vh[(e + 1) % B];
      const double d = val - v(x, y);
      s += len * gw[q] * d * d;
    }
  }
  return std::sqrt(s);
}

}  // namespace detail

inline MmsLevel solve_mms_level(const MmsCase& mc, int nb, int nr) {
  const TriMesh mesh = generate_disk_mesh(nb, nr);
  const FormsBundle forms = assemble_core(mesh);
  const auto V = forms.nv(), B = forms.nb();
  Vector f(V), g(B), u_int(V), v_int(B);
  for (Eigen::Index i = 0; i < V; ++i) {
    f[i] = mc.f(mesh.vertices[i].x, mesh.vertices[i].y);
    u_int[i] = mc.u(mesh.vertices[i].x, mesh.vertices[i].y);
  }
  for (Eigen::Index e = 0; e < B; ++e) {
    const Point& p = mesh.vertices[mesh.boundary_loop[e]];
    g[e] = mc.g(p.x, p.y);
    v_int[e] = mc.v(p.x, p.y);
  }
  const MeanMode mode = std::isinf(mc.K) ? MeanMode::separate : MeanMode::combined;
  if (mode == MeanMode::separate) {
    // Discrete compatibility for the decoupled problems.
    f.array() -= forms.lumped_bulk.dot(f) / forms.area;
    g.array() -= forms.lumped_surf.dot(g) / forms.perimeter;
  } else {
    g.array() -= (mc.alpha * forms.lumped_bulk.dot(f) + forms.lumped_surf.dot(g)) / forms.perimeter;
  }
  std::vector<double> targets;
  Vector exact(V + B);
  exact << u_int, v_int;
  for (const auto& c : mean_functionals(forms, mode, mc.alpha)) targets.push_back(c.dot(exact));
  const auto sol = solve_coupled_poisson(mesh, forms, mc.K, mc.alpha, f, g, targets);
  MmsLevel lv;
  lv.nb = nb;
  lv.nr = nr;
  lv.h_max = mesh_stats(mesh).h_max;
  lv.error_bulk = detail::l2_error_bulk(mesh, sol.bulk, mc.u);
  lv.error_surf = detail::l2_error_surf(mesh, sol.surf, mc.v);
  lv.error = std::hypot(lv.error_bulk, lv.error_surf);
  return lv;
}

/// Levels (32,8), (64,16), (128,32), ... doubling both counts.
inline std::vector<MmsLevel> run_elliptic_mms(double K, int levels) {
  if (levels < 1 || levels > 6) throw InvalidArgument("levels must lie in [1, 6]");
  const MmsCase mc = mms_case(K);
  std::vector<MmsLevel> out;
  for (int l = 0; l < levels; ++l) out.push_back(solve_mms_level(mc, 32 << l, 8 << l));
  return out;
}

}  // namespace bscch
