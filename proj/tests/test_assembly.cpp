#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "bscch/assembly.hpp"
#include "helpers.hpp"

using namespace bscch;
using testing_helpers::random_vector;

namespace {

double asymmetry(const SparseMatrix& A) { return (Eigen::MatrixXd(A) - Eigen::MatrixXd(A).transpose()).cwiseAbs().maxCoeff(); }

double min_eigenvalue(const SparseMatrix& A) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(A)};
  return es.eigenvalues().minCoeff();
}

}  // namespace

TEST(Core, RowSumsAndTotals) {
  const auto m = generate_disk_mesh(32, 8);
  const auto f = assemble_core(m);
  const auto s = mesh_stats(m);
  EXPECT_LE((f.A_bulk * Vector::Ones(f.nv())).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((f.A_surf * Vector::Ones(f.nb())).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(f.M_bulk.sum(), s.area, 1e-13);
  EXPECT_NEAR(f.M_surf.sum(), s.perimeter, 1e-13);
  EXPECT_NEAR(f.area, s.area, 1e-13);
  EXPECT_NEAR(f.perimeter, s.perimeter, 1e-13);
  EXPECT_EQ(f.interior.size(), m.num_vertices() - m.num_boundary());
}

TEST(Core, SymmetryAndDefiniteness) {
  const auto f = assemble_core(generate_disk_mesh(16, 4));
  for (const auto* A : {&f.M_bulk, &f.A_bulk, &f.M_surf, &f.A_surf}) EXPECT_LE(asymmetry(*A), 1e-14);
  EXPECT_GT(min_eigenvalue(f.M_bulk), 0.0);
  EXPECT_GT(min_eigenvalue(f.M_surf), 0.0);
  EXPECT_GT(min_eigenvalue(f.A_bulk), -1e-12);
  // Kernel is one-dimensional: the second eigenvalue is clearly positive.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(f.A_bulk)};
  EXPECT_GT(es.eigenvalues()[1], 1e-3);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ss{Eigen::MatrixXd(f.A_surf)};
  EXPECT_GT(ss.eigenvalues()[1], 1e-3);
}

TEST(Core, ExactOnLinearFunctions) {
  // For P1-exact data: x^T M 1 = int x, and the Dirichlet energy of x is |Omega|.
  const auto m = generate_disk_mesh(16, 4);
  const auto f = assemble_core(m);
  Vector x(f.nv());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = m.vertices[i].x;
  EXPECT_NEAR(x.dot(f.A_bulk * x), f.area, 1e-13);
  EXPECT_NEAR(Vector::Ones(f.nv()).dot(f.M_bulk * x), 0.0, 1e-14);
  // Surface: arclength coordinate derivative has unit length on every edge.
  Vector sx(f.nb());
  for (Eigen::Index e = 0; e < sx.size(); ++e) sx[e] = m.vertices[m.boundary_loop[e]].x;
  double expect = 0.0;
  for (std::size_t e = 0; e < m.num_boundary(); ++e) {
    const auto [a, b] = m.boundary_edge(e);
    const double d = m.vertices[b].x - m.vertices[a].x;
    expect += d * d / m.boundary_edge_length(e);
  }
  EXPECT_NEAR(sx.dot(f.A_surf * sx), expect, 1e-13);
}

TEST(Core, TraceSelectsLoopVertices) {
  const auto m = generate_disk_mesh(8, 3);
  const auto f = assemble_core(m);
  Vector x(f.nv());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = i;
  const Vector t = f.trace * x;
  for (std::size_t e = 0; e < m.num_boundary(); ++e) EXPECT_EQ(t[e], m.boundary_loop[e]);
}

TEST(Mobility, ConstantMatchesStiffness) {
  const auto m = generate_disk_mesh(16, 4);
  const auto f = assemble_core(m);
  std::mt19937_64 rng(1);
  const Vector field = random_vector(f.nv(), rng);
  const SparseMatrix K = assemble_mobility_stiffness(m, Mobility::constant(1.0), field);
  EXPECT_LE((Eigen::MatrixXd(K) - Eigen::MatrixXd(f.A_bulk)).cwiseAbs().maxCoeff(), 1e-14);
  const SparseMatrix Ks = assemble_mobility_stiffness(m, Mobility::constant(2.5), random_vector(f.nb(), rng));
  EXPECT_LE((Eigen::MatrixXd(Ks) - 2.5 * Eigen::MatrixXd(f.A_surf)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Mobility, DegenerateAtPureState) {
  const auto m = generate_disk_mesh(16, 4);
  const auto f = assemble_core(m);
  const SparseMatrix K = assemble_mobility_stiffness(m, Mobility::degenerate_capped(0.1, 1.0), Vector::Ones(f.nv()));
  EXPECT_LE((Eigen::MatrixXd(K) - 0.1 * Eigen::MatrixXd(f.A_bulk)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Mobility, PositiveSemidefiniteAndBounded) {
  const auto m = generate_disk_mesh(16, 4);
  const auto f = assemble_core(m);
  std::mt19937_64 rng(2);
  const auto mob = Mobility::degenerate_capped(0.2, 0.7);
  for (int trial = 0; trial < 3; ++trial) {
    const SparseMatrix K = assemble_mobility_stiffness(m, mob, 1.5 * random_vector(f.nv(), rng));
    EXPECT_LE(asymmetry(K), 1e-14);
    EXPECT_GE(min_eigenvalue(K), -1e-12);
    // m0 A <= K <= (m0 + m1) A in the quadratic-form sense.
    const Vector x = random_vector(f.nv(), rng);
    const double q = x.dot(K * x), a = x.dot(f.A_bulk * x);
    EXPECT_GE(q, 0.2 * a * (1 - 1e-12));
    EXPECT_LE(q, 0.9 * a * (1 + 1e-12));
  }
  for (double s : {-3.0, -1.0, 0.0, 0.3, 2.0}) {
    EXPECT_GE(mob(s), 0.2);
    EXPECT_LE(mob(s), 0.9);
  }
}

TEST(Mobility, Rejections) {
  const auto m = generate_disk_mesh(8, 2);
  EXPECT_THROW(Mobility::constant(0.0), InvalidArgument);
  EXPECT_THROW(Mobility::degenerate_capped(0.1, -1.0), InvalidArgument);
  EXPECT_THROW(assemble_mobility_stiffness(m, Mobility::constant(1.0), Vector::Zero(5)), InvalidArgument);
}

TEST(Convection, NoneIsZero) {
  const auto m = generate_disk_mesh(16, 4);
  const auto c = assemble_convection(m, VelocityField{}, 0.3);
  EXPECT_EQ(c.bulk.nonZeros(), 0);
  EXPECT_EQ(c.surf.nonZeros(), 0);
}

TEST(Convection, MassNeutral) {
  const auto m = generate_disk_mesh(32, 8);
  VelocityField v;
  v.bulk = VelocityField::Bulk::rigid_rotation;
  v.surface = VelocityField::Surface::rotation;
  v.omega = 1.3;
  v.speed = -0.7;
  const auto c = assemble_convection(m, v, 0.0);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 10; ++i) {
    const Vector x = random_vector(c.bulk.cols(), rng);
    const Vector y = random_vector(c.surf.cols(), rng);
    EXPECT_LE(std::abs(Vector::Ones(x.size()).dot(c.bulk * x)), 1e-12);
    EXPECT_LE(std::abs(Vector::Ones(y.size()).dot(c.surf * y)), 1e-12);
  }
}

TEST(Convection, RotationOfRadialFieldConverges) {
  VelocityField v;
  v.bulk = VelocityField::Bulk::rigid_rotation;
  v.omega = 1.0;
  std::vector<double> pairing;
  for (auto [nb, nr] : {std::pair{16, 4}, {32, 8}, {64, 16}}) {
    const auto m = generate_disk_mesh(nb, nr);
    const auto c = assemble_convection(m, v, 0.0);
    Vector phi(m.num_vertices());
    for (std::size_t i = 0; i < m.num_vertices(); ++i) {
      const double r2 = m.vertices[i].x * m.vertices[i].x + m.vertices[i].y * m.vertices[i].y;
      phi[i] = std::cos(3.0 * r2);
    }
    pairing.push_back(std::abs(phi.dot(c.bulk * phi)));
  }
  for (double p : pairing) EXPECT_LE(p, 1e-2);
  // Either exactly zero by symmetry or shrinking at second order.
  for (std::size_t k = 1; k < pairing.size(); ++k) {
    if (pairing[k - 1] > 1e-13) EXPECT_LE(pairing[k], pairing[k - 1] / 3.0);
  }
}

TEST(Convection, RampScalesOperator) {
  const auto m = generate_disk_mesh(16, 2);
  VelocityField v;
  v.bulk = VelocityField::Bulk::rigid_rotation;
  v.omega = 2.0;
  v.ramp = 0.5;
  const auto half = assemble_convection(m, v, 0.25);
  const auto full = assemble_convection(m, v, 1.0);
  EXPECT_LE((Eigen::MatrixXd(full.bulk) - 2.0 * Eigen::MatrixXd(half.bulk)).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_EQ(v.factor(-1.0), 0.0);
}

TEST(Convection, SurfaceMatchesEdgeQuadrature) {
  // int_e N_j w . grad_Gamma N_i with |w| = speed along the edge tangent.
  const auto m = generate_disk_mesh(8, 1);
  VelocityField v;
  v.surface = VelocityField::Surface::rotation;
  v.speed = 3.0;
  const Eigen::MatrixXd C(assemble_convection(m, v, 0.0).surf);
  EXPECT_DOUBLE_EQ(C(0, 0), -1.5 + 1.5);  // edge 0 contributes -speed/2, edge 7 contributes +speed/2
  EXPECT_DOUBLE_EQ(C(0, 1), -1.5);
  EXPECT_DOUBLE_EQ(C(1, 0), 1.5);
  EXPECT_DOUBLE_EQ(C(0, 7), 1.5);
}

TEST(Coupling, MatchesEdgeQuadrature) {
  const auto m = generate_disk_mesh(16, 3);
  const auto f = assemble_core(m);
  const double alpha = 1.7, sigma = 0.5;  // K = 2
  const SparseMatrix Cb = coupling_block(f, sigma, alpha);
  EXPECT_LE(asymmetry(Cb), 1e-14);
  std::mt19937_64 rng(9);
  const Vector x = random_vector(f.n_pair(), rng), y = random_vector(f.n_pair(), rng);
  const auto V = f.nv();
  // Two-point Gauss on each edge is exact for the quadratic integrand.
  const double g[2] = {0.5 - 0.5 / std::sqrt(3.0), 0.5 + 0.5 / std::sqrt(3.0)};
  double ref = 0.0;
  for (std::size_t e = 0; e < m.num_boundary(); ++e) {
    const auto [a, b] = m.boundary_edge(e);
    const std::size_t e1 = (e + 1) % m.num_boundary();
    for (double s : g) {
      const double u = (1 - s) * x[a] + s * x[b], v = (1 - s) * x[V + e] + s * x[V + e1];
      const double z = (1 - s) * y[a] + s * y[b], w = (1 - s) * y[V + e] + s * y[V + e1];
      ref += 0.5 * m.boundary_edge_length(e) * sigma * (alpha * v - u) * (alpha * w - z);
    }
  }
  EXPECT_NEAR(x.dot(Cb * y), ref, 1e-12 * std::max(1.0, std::abs(ref)));
}

TEST(Coupling, KernelOfPairForm) {
  const auto m = generate_disk_mesh(16, 4);
  const auto f = assemble_core(m);
  const auto V = f.nv(), B = f.nb();
  const double alpha = -0.8;
  Vector d(V + B);
  d << Vector::Constant(V, alpha), Vector::Ones(B);
  EXPECT_LE((bulk_surface_form(f, 0.5, alpha) * d).cwiseAbs().maxCoeff(), 1e-12);
  const SparseMatrix A0 = bulk_surface_form(f, 0.0, alpha);
  Vector e1 = Vector::Zero(V + B), e2 = Vector::Zero(V + B);
  e1.head(V).setOnes();
  e2.tail(B).setOnes();
  EXPECT_LE((A0 * e1).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LE((A0 * e2).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_GT((bulk_surface_form(f, 0.5, alpha) * e1).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(CaseSpaces, NeumannIsIdentity) {
  const auto m = generate_disk_mesh(8, 2);
  const auto f = assemble_core(m);
  const auto s = build_case_spaces(m, f, {kInf, kInf, 1.0, 1.0});
  EXPECT_FALSE(s.phi_space.dirichlet);
  EXPECT_FALSE(s.mu_space.dirichlet);
  EXPECT_LE((Eigen::MatrixXd(s.phi_space.P) - Eigen::MatrixXd::Identity(f.n_pair(), f.n_pair())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(CaseSpaces, DirichletSlavesBoundary) {
  const auto m = generate_disk_mesh(16, 3);
  const auto f = assemble_core(m);
  const auto s = build_case_spaces(m, f, {0.0, 0.0, 1.0, -2.0});
  EXPECT_EQ(s.phi_space.n_reduced(), static_cast<Eigen::Index>(f.interior.size() + m.num_boundary()));
  EXPECT_EQ(static_cast<std::size_t>(s.phi_space.n_reduced() - f.nb()), m.num_vertices() - m.num_boundary());
  std::mt19937_64 rng(3);
  const Vector z = random_vector(s.mu_space.n_reduced(), rng);
  const Vector full = s.mu_space.P * z;
  const Vector tr = f.trace * full.head(f.nv());
  EXPECT_LE((tr - (-2.0) * full.tail(f.nb())).cwiseAbs().maxCoeff(), 0.0);
}

TEST(CouplingParams, SigmaAndValidation) {
  EXPECT_EQ(CouplingParams::sigma(0.0), 0.0);
  EXPECT_EQ(CouplingParams::sigma(kInf), 0.0);
  EXPECT_EQ(CouplingParams::sigma(4.0), 0.25);
  const double area = 3.0, perim = 6.0;
  EXPECT_THROW((CouplingParams{1.0, 1.0, -2.0, 1.0}.validate(area, perim)), InvalidArgument);
  EXPECT_THROW((CouplingParams{-1.0, 1.0, 1.0, 1.0}.validate(area, perim)), InvalidArgument);
  EXPECT_THROW((CouplingParams{1.0, std::nan(""), 1.0, 1.0}.validate(area, perim)), InvalidArgument);
  EXPECT_NO_THROW((CouplingParams{0.0, kInf, 0.0, 0.0}.validate(area, perim)));
}
