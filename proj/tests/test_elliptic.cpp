#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bscch/elliptic.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace bscch;
using testing_helpers::make_mean_free;
using testing_helpers::random_vector;

namespace {

struct Fixture {
  TriMesh mesh;
  FormsBundle forms;
  explicit Fixture(int nb, int nr) : mesh(generate_disk_mesh(nb, nr)), forms(assemble_core(mesh)) {}
};

const Fixture& medium() {
  static const Fixture f(32, 8);
  return f;
}

}  // namespace

TEST(Means, Examples) {
  const auto& [m, f] = medium();
  EXPECT_NEAR(combined_mean(f, Vector::Ones(f.nv()), Vector::Ones(f.nb()), 1.0), 1.0, 1e-15);
  EXPECT_EQ(combined_mean(f, Vector::Zero(f.nv()), Vector::Zero(f.nb()), 1.0), 0.0);
  const Fixture big(64, 16);
  const auto s = mesh_stats(big.mesh);
  EXPECT_NEAR(combined_mean(big.forms, Vector::Ones(big.forms.nv()), Vector::Zero(big.forms.nb()), 1.0),
              s.area / (s.area + s.perimeter), 1e-14);
  const auto sep = separate_means(f, Vector::Constant(f.nv(), 2.0), Vector::Constant(f.nb(), -1.0));
  EXPECT_NEAR(sep[0], 2.0, 1e-14);
  EXPECT_NEAR(sep[1], -1.0, 1e-14);
}

class InverseS : public ::testing::TestWithParam<double> {};

TEST_P(InverseS, ZeroAndLinearity) {
  const auto& [m, f] = medium();
  const CouplingParams cp{1.0, GetParam(), 1.0, 1.0};
  const InverseOperatorS S(m, f, cp);
  EXPECT_EQ(S.apply(Vector::Zero(f.n_pair())).cwiseAbs().maxCoeff(), 0.0);
  std::mt19937_64 rng(21);
  const Vector x = make_mean_free(f, random_vector(f.n_pair(), rng), S.mode(), cp.beta);
  const Vector sx = S.apply(x);
  const Vector s3 = S.apply(-3.5 * x);
  EXPECT_LE((s3 + 3.5 * sx).cwiseAbs().maxCoeff(), 1e-10 * sx.cwiseAbs().maxCoeff());
}

TEST_P(InverseS, DefiningIdentityAndDualNorm) {
  const auto& [m, f] = medium();
  const CouplingParams cp{1.0, GetParam(), 1.0, 1.0};
  const InverseOperatorS S(m, f, cp);
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x = make_mean_free(f, random_vector(f.n_pair(), rng), S.mode(), cp.beta);
    const Vector sx = S.apply(x);
    // S x lies in the case space and is mean-free.
    for (const auto& c : S.constraints()) EXPECT_LE(std::abs(c.dot(sx)), 1e-12 * sx.norm());
    const double lhs = S.inner(sx, sx);
    const double rhs = -x.dot(S.mass() * sx);
    EXPECT_LE(std::abs(lhs - rhs), 1e-9 * std::abs(lhs));
    EXPECT_NEAR(S.dual_norm(x), std::sqrt(lhs), 1e-12 * std::sqrt(lhs));
    EXPECT_DOUBLE_EQ(S.dual_norm(-x), S.dual_norm(x));
    for (int k = 0; k < 3; ++k) {
      const Vector y = S.P() * random_vector(S.P().cols(), rng);
      const double id = S.inner(sx, y) + x.dot(S.mass() * y);
      EXPECT_LE(std::abs(id), 1e-9 * (std::abs(S.inner(sx, y)) + std::abs(x.dot(S.mass() * y))));
    }
  }
}

TEST_P(InverseS, RejectsNonzeroMean) {
  const auto& [m, f] = medium();
  const InverseOperatorS S(m, f, {1.0, GetParam(), 1.0, 1.0});
  try {
    S.apply(Vector::Ones(f.n_pair()));
    FAIL() << "expected InvalidArgument";
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("residual mean"), std::string::npos);
  }
}

INSTANTIATE_TEST_SUITE_P(LCases, InverseS, ::testing::Values(0.0, 1.0, 0.3, kInf));

TEST(InverseS, DirichletTraceIsExact) {
  const auto& [m, f] = medium();
  const CouplingParams cp{1.0, 0.0, 1.0, 2.0};
  const InverseOperatorS S(m, f, cp);
  std::mt19937_64 rng(5);
  const Vector x = make_mean_free(f, random_vector(f.n_pair(), rng), MeanMode::combined, 2.0);
  const Vector sx = S.apply(x);
  const Vector tr = f.trace * sx.head(f.nv());
  EXPECT_LE((tr - 2.0 * sx.tail(f.nb())).cwiseAbs().maxCoeff(), 1e-15 * sx.cwiseAbs().maxCoeff() + 1e-300);
}

TEST(DualNorm, ZeroPair) {
  const auto& [m, f] = medium();
  EXPECT_EQ(dual_norm(m, f, {1.0, 1.0, 1.0, 1.0}, {Vector::Zero(f.nv()), Vector::Zero(f.nb())}), 0.0);
}

TEST(DualNorm, BoundedByPoincareTimesL2) {
  const auto& [m, f] = medium();
  const auto est = estimate_poincare_constant(m, f, 1.0, 1.0, 1.0);
  const InverseOperatorS S(m, f, {1.0, 1.0, 1.0, 1.0});
  std::mt19937_64 rng(8);
  const SparseMatrix M = pair_mass(f);
  for (int k = 0; k < 10; ++k) {
    const Vector x = make_mean_free(f, random_vector(f.n_pair(), rng), MeanMode::combined, 1.0);
    EXPECT_LE(S.dual_norm(x), est.C_P * std::sqrt(x.dot(M * x)) * (1 + 1e-10));
  }
}

TEST(Poisson, ZeroData) {
  const auto& [m, f] = medium();
  for (double K : {0.0, 1.0, kInf}) {
    const auto sol = solve_coupled_poisson(m, f, K, 1.0, Vector::Zero(f.nv()), Vector::Zero(f.nb()));
    EXPECT_LE(sol.bulk.cwiseAbs().maxCoeff(), 1e-300);
    EXPECT_LE(sol.surf.cwiseAbs().maxCoeff(), 1e-300);
  }
}

TEST(Poisson, RejectsIncompatibleData) {
  const auto& [m, f] = medium();
  EXPECT_THROW(solve_coupled_poisson(m, f, 1.0, 1.0, Vector::Ones(f.nv()), Vector::Zero(f.nb())), InvalidArgument);
  // alpha |Omega| <f> + |Gamma| <g> = 0 is compatible for K finite but not for K = inf.
  const Vector fb = Vector::Ones(f.nv());
  const Vector gs = Vector::Constant(f.nb(), -f.area / f.perimeter);
  EXPECT_NO_THROW(solve_coupled_poisson(m, f, 1.0, 1.0, fb, gs));
  EXPECT_THROW(solve_coupled_poisson(m, f, kInf, 1.0, fb, gs), InvalidArgument);
}

TEST(Poisson, WeakResidualVanishes) {
  const auto& [m, f] = medium();
  std::mt19937_64 rng(13);
  for (double K : {0.0, 0.5, kInf}) {
    const double alpha = 1.3;
    const CouplingParams cp{K, 1.0, alpha, 1.0};
    Vector data = make_mean_free(f, random_vector(f.n_pair(), rng),
                                 std::isinf(K) ? MeanMode::separate : MeanMode::combined, alpha);
    // Compatibility is a condition on the load, which the mass-weighted mean removes exactly.
    const auto sol = solve_coupled_poisson(m, f, K, alpha, data.head(f.nv()), data.tail(f.nb()));
    const SparseMatrix A = bulk_surface_form(f, cp.sigma_K(), alpha);
    const CaseSpace sp = build_case_spaces(m, f, cp).phi_space;
    const Vector r = sp.P.transpose() * (A * sol.stacked() - pair_mass(f) * data);
    EXPECT_LE(r.cwiseAbs().maxCoeff(), 1e-11) << "K=" << K;
  }
}

TEST(Poisson, ManufacturedConvergence) {
  for (double K : {0.0, 1.0, kInf}) {
    const auto levels = run_elliptic_mms(K, 2);
    ASSERT_EQ(levels.size(), 2u);
    EXPECT_LT(levels[0].error, 0.06) << "K=" << K;
    EXPECT_GE(levels[0].error / levels[1].error, 3.4) << "K=" << K;
  }
  EXPECT_THROW(mms_case(2.0), InvalidArgument);
  EXPECT_THROW(run_elliptic_mms(1.0, 0), InvalidArgument);
}

TEST(Poincare, MatchesDenseOracle) {
  const Fixture fx(16, 4);
  for (double K : {0.0, 1.0}) {
    const double alpha = 1.0;
    const CouplingParams cp{K, 1.0, alpha, 1.0};
    const auto est = estimate_poincare_constant(fx.mesh, fx.forms, K, alpha, 1.0);
    const CaseSpace sp = build_case_spaces(fx.mesh, fx.forms, cp).phi_space;
    const Eigen::MatrixXd P(sp.P);
    const Eigen::MatrixXd A = P.transpose() * Eigen::MatrixXd(bulk_surface_form(fx.forms, cp.sigma_K(), alpha)) * P;
    const Eigen::MatrixXd M = P.transpose() * Eigen::MatrixXd(pair_mass(fx.forms)) * P;
    Vector d(fx.forms.n_pair());
    d << Vector::Constant(fx.forms.nv(), alpha), Vector::Ones(fx.forms.nb());
    // Reduced coordinates of the kernel direction: interior values and surface values.
    const Vector dr = (P.transpose() * P).ldlt().solve(P.transpose() * d);
    const double lam = oracle::constrained_min_eigenvalue(A, M, dr);
    EXPECT_NEAR(est.lambda_min, lam, 1e-8 * lam) << "K=" << K;
  }
}

TEST(Poincare, FrozenValues) {
  // Dense-oracle values on the (16,4) mesh, alpha = beta = 1.
  const Fixture fx(16, 4);
  EXPECT_NEAR(estimate_poincare_constant(fx.mesh, fx.forms, 0.0, 1.0, 1.0).lambda_min, 1.6115944610671, 1e-8 * 1.6115944610671);
  EXPECT_NEAR(estimate_poincare_constant(fx.mesh, fx.forms, 1.0, 1.0, 1.0).lambda_min, 1.4160925022325, 1e-8 * 1.4160925022325);
}

TEST(Poincare, InequalityOnRandomPairs) {
  const auto& [m, f] = medium();
  for (double K : {0.0, 1.0}) {
    const CouplingParams cp{K, 1.0, 1.0, 1.0};
    const auto est = estimate_poincare_constant(m, f, K, 1.0, 1.0);
    const SparseMatrix A = bulk_surface_form(f, cp.sigma_K(), 1.0);
    const SparseMatrix M = pair_mass(f);
    const CaseSpace sp = build_case_spaces(m, f, cp).phi_space;
    std::mt19937_64 rng(17);
    for (int k = 0; k < 100; ++k) {
      const Vector x = make_mean_free(f, sp.P * random_vector(sp.P.cols(), rng), MeanMode::combined, 1.0);
      const double l2 = std::sqrt(x.dot(M * x)), h1 = std::sqrt(x.dot(A * x));
      EXPECT_LE(l2, est.C_P * h1);
      EXPECT_LE(7.0 * l2, est.C_P * 7.0 * h1 * (1 + 1e-15));
    }
  }
}

TEST(Poincare, RejectsInfiniteK) {
  const auto& [m, f] = medium();
  EXPECT_THROW(estimate_poincare_constant(m, f, kInf, 1.0, 1.0), InvalidArgument);
}
