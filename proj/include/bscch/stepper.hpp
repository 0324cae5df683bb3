#pragma once

// Implicit Euler with convex-concave splitting: the Yosida part of the potentials, the
// gradient terms and both sigma-blocks are implicit; f2, g2 and the convected field are
// taken from the previous step. Mobilities are lagged.

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bscch/assembly.hpp"
#include "bscch/config.hpp"
#include "bscch/diagnostics.hpp"
#include "bscch/elliptic.hpp"
#include "bscch/error.hpp"
#include "bscch/io.hpp"
#include "bscch/mesh.hpp"
#include "bscch/model.hpp"

namespace bscch {

inline TriMesh build_mesh(const MeshSpec& spec) {
  if (!spec.file.empty()) return read_mesh(spec.file);
  return generate_disk_mesh(spec.nb, spec.nr);
}

/// Initial (phi, psi) clamped to [-1 + delta0, 1 - delta0]; checks the mean condition for the L-case.
inline BulkSurfacePair make_initial_data(const InitialDataSpec& spec, const TriMesh& mesh, const FormsBundle& f,
                                         const CouplingParams& cp, const Potential& bulk, const Potential& surf) {
  if (!(spec.delta0 > 0.0 && spec.delta0 < 1.0)) throw InvalidArgument("delta0 must lie in (0, 1)");
  cp.validate(f.area, f.perimeter);
  const auto V = f.nv(), B = f.nb();
  BulkSurfacePair p{Vector::Constant(V, spec.m), Vector::Constant(B, spec.m)};

  switch (spec.mode) {
    case InitialDataSpec::Mode::constant:
      break;
    case InitialDataSpec::Mode::random_perturbation: {
      if (!(spec.amplitude >= 0.0)) throw InvalidArgument("amplitude must be nonnegative");
      std::mt19937_64 rng(spec.seed);
      auto draw = [&] { return 2.0 * static_cast<double>(rng() >> 11) * 0x1.0p-53 - 1.0; };
      for (Eigen::Index i = 0; i < V; ++i) p.bulk[i] += spec.amplitude * draw();
      for (Eigen::Index e = 0; e < B; ++e) p.surf[e] += spec.amplitude * draw();
      break;
    }
    case InitialDataSpec::Mode::two_bubbles: {
      if (!(spec.radius > 0.0) || !(spec.width > 0.0)) throw InvalidArgument("bubble radius and width must be positive");
      const double s = std::sqrt(2.0) * spec.width;
      const double cx = 0.5 * spec.separation;
      for (Eigen::Index i = 0; i < V; ++i) {
        const auto& x = mesh.vertices[i];
        const double d1 = std::hypot(x.x - cx, x.y), d2 = std::hypot(x.x + cx, x.y);
        p.bulk[i] = std::tanh((spec.radius - d1) / s) + std::tanh((spec.radius - d2) / s) + 1.0;
      }
      for (Eigen::Index e = 0; e < B; ++e) p.surf[e] = p.bulk[mesh.boundary_loop[e]];
      break;
    }
  }

  const double lim = 1.0 - spec.delta0;
  const double lim_s = cp.K == 0.0 ? lim / std::max(1.0, std::abs(cp.alpha)) : lim;
  p.bulk = p.bulk.cwiseMax(-lim).cwiseMin(lim);
  p.surf = p.surf.cwiseMax(-lim_s).cwiseMin(lim_s);
  if (cp.K == 0.0) {
    for (Eigen::Index e = 0; e < B; ++e) p.bulk[mesh.boundary_loop[e]] = cp.alpha * p.surf[e];
  }

  const Interval Df = bulk.convex().prime_domain(), Dg = surf.convex().prime_domain();
  if (std::isinf(cp.L)) {
    const auto m = separate_means(f, p.bulk, p.surf);
    if (!Df.contains_interior(m[0]) || !Dg.contains_interior(m[1])) {
      throw InvalidArgument("separate-mean condition failed: bulk mean " + std::to_string(m[0]) +
                            ", surface mean " + std::to_string(m[1]));
    }
  } else {
    const double m = combined_mean(f, p.bulk, p.surf, cp.beta);
    if (!Df.contains_interior(cp.beta * m) || !Dg.contains_interior(m)) {
      throw InvalidArgument("combined-mean condition failed: mean " + std::to_string(m) + ", beta * mean " +
                            std::to_string(cp.beta * m));
    }
  }
  return p;
}

struct StepReport {
  int newton_iters = 0;
  double residual = 0.0;
  int halvings = 0;  // depth of tau halving used (0 when the plain step converged)
  // Time averages over the step of mu^T B mu etc.; the convective power uses the lagged field.
  double diss_bulk = 0.0;
  double diss_surf = 0.0;
  double diss_robin = 0.0;
  double conv_bulk = 0.0;
  double conv_surf = 0.0;
};

class Stepper {
 public:
  Stepper(const TriMesh& mesh, const FormsBundle& forms, ModelParams params, NewtonSettings newton)
      : mesh_(mesh), f_(forms), p_(std::move(params)), newton_(newton), eps_(p_.eps) {
    p_.validate(f_);
    newton_.validate();
    const auto spaces = build_case_spaces(mesh_, f_, p_.coupling);
    PK_ = spaces.phi_space;
    PL_ = spaces.mu_space;
    const auto& cp = p_.coupling;
    Mc_ = pair_mass(f_);
    Ak_ = bulk_surface_form(f_, cp.sigma_K(), cp.alpha);
    robin_ = coupling_block(f_, cp.sigma_L(), cp.beta);
    lumped_.resize(f_.n_pair());
    lumped_ << f_.lumped_bulk, f_.lumped_surf;
    const SparseMatrix PKt = PK_.P.transpose(), PLt = PL_.P.transpose();
    J11_ = PLt * Mc_ * PK_.P;
    J22_ = PKt * Ak_ * PK_.P;
    J21_ = -(PKt * Mc_ * PL_.P);
    dr_ = PKt.cwiseAbs2();  // rows of P carry one entry each, so P^T diag(d) P = diag((P.^2)^T d)
  }

  const ModelParams& params() const { return p_; }
  const NewtonSettings& newton() const { return newton_; }

  /// Advances by tau; throws StepFailure if Newton fails and adaptive halving is off or exhausted.
  std::pair<State, StepReport> step(const State& s, double tau, bool adaptive = false, int max_halvings = 5) {
    if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("tau must be positive and finite");
    check_state(s);
    return advance(s, tau, adaptive ? max_halvings : 0, 0);
  }

 private:
  const TriMesh& mesh_;
  const FormsBundle& f_;
  ModelParams p_;
  NewtonSettings newton_;
  YosidaParam eps_;
  CaseSpace PK_, PL_;
  SparseMatrix Mc_, Ak_, robin_, J11_, J22_, J21_, dr_;
  Vector lumped_;
  std::optional<double> conv_factor_;
  ConvectionOperators conv_;
  std::optional<std::pair<SparseMatrix, SparseMatrix>> mob_cache_;
  // Newton matrix without the nonlinear diagonal; reused while tau and the mobilities are unchanged.
  std::optional<double> jac_tau_;
  SparseMatrix J0_, J12_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> ldlt_;
  Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
  bool lu_ready_ = false;

  /// LDL^T without pivoting first; falls back to sparse LU when a pivot breaks down.
  Vector solve_linear(const SparseMatrix& J, const Vector& rhs, double t, double res) {
    ldlt_.factorize(J);
    if (ldlt_.info() == Eigen::Success) {
      Vector y = ldlt_.solve(rhs);
      if (y.allFinite() && (J.selfadjointView<Eigen::Lower>() * y - rhs).norm() <= 1e-10 * (1.0 + rhs.norm())) {
        return y;
      }
    }
    if (!lu_ready_) {
      lu_.analyzePattern(J);
      lu_ready_ = true;
    }
    lu_.factorize(J);
    if (lu_.info() != Eigen::Success) throw StepFailure("singular Newton matrix at t = " + std::to_string(t), t, res);
    Vector y = lu_.solve(rhs);
    if (!y.allFinite()) throw StepFailure("non-finite Newton update at t = " + std::to_string(t), t, res);
    return y;
  }

  void check_state(const State& s) const {
    if (s.phi.size() != f_.nv() || s.mu.size() != f_.nv() || s.psi.size() != f_.nb() || s.theta.size() != f_.nb()) {
      throw InvalidArgument("state sizes do not match the mesh");
    }
    if (!s.phi.allFinite() || !s.psi.allFinite() || !s.mu.allFinite() || !s.theta.allFinite()) {
      throw InvalidArgument("state has non-finite entries");
    }
  }

  std::pair<State, StepReport> advance(const State& s, double tau, int halvings_left, int depth) {
    try {
      auto r = solve(s, tau);
      r.second.halvings = depth;
      return r;
    } catch (const StepFailure&) {
      if (halvings_left == 0) throw;
    }
    auto [s1, r1] = advance(s, 0.5 * tau, halvings_left - 1, depth + 1);
    auto [s2, r2] = advance(s1, 0.5 * tau, halvings_left - 1, depth + 1);
    s2.t = s.t + tau;
    StepReport r;
    r.newton_iters = r1.newton_iters + r2.newton_iters;
    r.residual = std::max(r1.residual, r2.residual);
    r.halvings = std::max(r1.halvings, r2.halvings);
    r.diss_bulk = 0.5 * (r1.diss_bulk + r2.diss_bulk);
    r.diss_surf = 0.5 * (r1.diss_surf + r2.diss_surf);
    r.diss_robin = 0.5 * (r1.diss_robin + r2.diss_robin);
    r.conv_bulk = 0.5 * (r1.conv_bulk + r2.conv_bulk);
    r.conv_surf = 0.5 * (r1.conv_surf + r2.conv_surf);
    return {s2, r};
  }

  std::pair<SparseMatrix, SparseMatrix> mobility_stiffness(const State& s) {
    const bool cacheable = p_.bulk_mobility.is_constant() && p_.surf_mobility.is_constant();
    if (cacheable && mob_cache_) return *mob_cache_;
    std::pair<SparseMatrix, SparseMatrix> b{assemble_mobility_stiffness(mesh_, p_.bulk_mobility, s.phi),
                                            assemble_mobility_stiffness(mesh_, p_.surf_mobility, s.psi)};
    if (cacheable) mob_cache_ = b;
    return b;
  }

  const ConvectionOperators& convection(double t) {
    const double fac = p_.velocity.factor(t);
    if (!conv_factor_ || *conv_factor_ != fac) {
      conv_ = assemble_convection(mesh_, p_.velocity, t);
      conv_factor_ = fac;
    }
    return conv_;
  }

  /// Lumped nonlinear part: bulk entries use the bulk potential, surface entries the surface one.
  void nonlinear(const Vector& z, const Vector& zn, Vector& g, Vector* dg) const {
    const auto V = f_.nv(), N = f_.n_pair();
    g.resize(N);
    if (dg) dg->resize(N);
    for (Eigen::Index i = 0; i < N; ++i) {
      const Potential& pot = i < V ? p_.bulk_potential : p_.surf_potential;
      const auto y = yosida(pot.convex(), eps_, z[i]);
      g[i] = lumped_[i] * (y.value + pot.smooth().derivative(zn[i]));
      if (dg) (*dg)[i] = lumped_[i] * y.derivative;
    }
  }

  std::pair<State, StepReport> solve(const State& s, double tau) {
    const auto nK = PK_.n_reduced(), nL = PL_.n_reduced();
    const SparseMatrix& PK = PK_.P;
    const SparseMatrix& PL = PL_.P;
    const SparseMatrix PKt = PK.transpose(), PLt = PL.transpose();
    const double t1 = s.t + tau;

    const auto [Bb, Bs] = mobility_stiffness(s);
    SparseMatrix Bw = block_diag(Bb, Bs);
    if (p_.coupling.sigma_L() != 0.0) Bw += robin_;
    const auto& C = convection(t1);
    const Vector zn = s.z();
    Vector Czn(f_.n_pair());
    Czn << C.bulk * s.phi, C.surf * s.psi;
    const Vector r1_const = -(Mc_ * zn) - tau * Czn;  // R1 = PL^T [Mc z + r1_const + tau Bw w]

    const SparseMatrix PLtMc = PLt * Mc_;
    const bool reuse = mob_cache_ && jac_tau_ && *jac_tau_ == tau;
    if (!reuse) {
      J12_ = tau * (PLt * Bw * PL);
      // Symmetric arrangement in the unknowns [b; a] with the R2 rows negated:
      //   [ tau PL^T B PL    PL^T M PK        ]
      //   [ PK^T M PL       -(PK^T A PK + D)  ]
      // The nonlinear diagonal D is stored explicitly (possibly zero) so the pattern is fixed.
      Triplets trip;
      auto add_block = [&](const SparseMatrix& A, Eigen::Index r0, Eigen::Index c0, double sgn) {
        for (Eigen::Index k = 0; k < A.outerSize(); ++k) {
          for (SparseMatrix::InnerIterator it(A, k); it; ++it) {
            trip.emplace_back(r0 + it.row(), c0 + it.col(), sgn * it.value());
          }
        }
      };
      add_block(J12_, 0, 0, 1.0);
      add_block(J11_, 0, nL, 1.0);
      add_block(J21_, nL, 0, -1.0);
      add_block(J22_, nL, nL, -1.0);
      for (Eigen::Index i = 0; i < nK; ++i) trip.emplace_back(nL + i, nL + i, 0.0);
      J0_ = SparseMatrix(nL + nK, nL + nK);
      J0_.setFromTriplets(trip.begin(), trip.end());
      J0_.makeCompressed();
      ldlt_.analyzePattern(J0_);
      lu_ready_ = false;
      jac_tau_ = mob_cache_ ? std::optional<double>(tau) : std::nullopt;
    }
    const SparseMatrix& J12 = J12_;

    auto residual = [&](const Vector& a, const Vector& b, Vector& R, Vector* dg) {
      const Vector z = PK * a, w = PL * b;
      Vector g;
      nonlinear(z, zn, g, dg);
      R.resize(nL + nK);
      R.head(nL) = PLtMc * z + PLt * r1_const + J12 * b;
      R.tail(nK) = PKt * (Ak_ * z + g - Mc_ * w);
    };

    Vector a = PK_.restrict(zn), b = PL_.restrict(s.w());
    Vector R, dg;
    residual(a, b, R, &dg);
    const double res0 = R.lpNorm<Eigen::Infinity>();
    const double tol = newton_.tol_abs + newton_.tol_rel * res0;
    double res = res0;
    int iters = 0;
    while (iters == 0 || res > tol) {
      if (iters == newton_.max_iter) {
        throw StepFailure("Newton did not converge at t = " + std::to_string(t1) + " (residual " +
                              std::to_string(res) + ")",
                          t1, res);
      }
      SparseMatrix J = J0_;
      const Vector d = dr_ * dg;
      for (Eigen::Index i = 0; i < nK; ++i) J.coeffRef(nL + i, nL + i) -= d[i];
      Vector rhs(nL + nK);
      rhs << -R.head(nL), R.tail(nK);
      const Vector y = solve_linear(J, rhs, t1, res);
      Vector dx(nK + nL);
      dx << y.tail(nK), y.head(nL);

      double lam = 1.0;
      Vector a_try, b_try, R_try, dg_try;
      while (true) {
        a_try = a + lam * dx.head(nK);
        b_try = b + lam * dx.tail(nL);
        residual(a_try, b_try, R_try, &dg_try);
        const double r_try = R_try.lpNorm<Eigen::Infinity>();
        if (r_try < res || (lam == 1.0 && r_try <= res) || 0.5 * lam < newton_.damping_floor) break;
        lam *= 0.5;
      }
      a = std::move(a_try);
      b = std::move(b_try);
      R = std::move(R_try);
      dg = std::move(dg_try);
      res = R.lpNorm<Eigen::Infinity>();
      ++iters;
      if (!std::isfinite(res)) throw StepFailure("Newton residual is not finite at t = " + std::to_string(t1), t1, res);
    }

    State out = State::from_pairs(t1, PK * a, PL * b, f_.nv());
    StepReport rep;
    rep.newton_iters = iters;
    rep.residual = res;
    rep.diss_bulk = out.mu.dot(Bb * out.mu);
    rep.diss_surf = out.theta.dot(Bs * out.theta);
    rep.diss_robin = robin_dissipation(out, f_, p_.coupling);
    rep.conv_bulk = out.mu.dot(C.bulk * s.phi);
    rep.conv_surf = out.theta.dot(C.surf * s.psi);
    return {out, rep};
  }
};

struct RunResult {
  std::vector<DiagnosticsRecord> records;
  State final_state;
  int steps = 0;
};

/// Called with the initial state (default report) and after every accepted step.
using StepObserver = std::function<void(const State&, const StepReport&)>;

inline int step_count(double T, double tau) {
  if (T <= 0.0) return 0;
  return static_cast<int>(std::ceil(T / tau - 1e-9));
}

inline State initial_state(const BulkSurfacePair& init, const FormsBundle& f) {
  return {0.0, init.bulk, init.surf, Vector::Zero(f.nv()), Vector::Zero(f.nb())};
}

/// Runs from a given initial state on a given mesh. Writes series.csv (and VTK snapshots) when
/// rc.output.dir is nonempty.
inline RunResult run(const TriMesh& mesh, const FormsBundle& forms, const RunConfig& rc, const State& init,
                     const StepObserver& observer = {}) {
  Stepper stepper(mesh, forms, rc.model, rc.newton);
  if (!(rc.time.tau > 0.0)) throw InvalidArgument("time.tau must be positive");
  if (!(rc.time.T >= 0.0)) throw InvalidArgument("time.T must be nonnegative");
  if (rc.output.every < 1) throw InvalidArgument("output.every must be at least 1");

  std::filesystem::path dir;
  if (!rc.output.dir.empty()) {
    dir = rc.output.dir;
    std::filesystem::create_directories(dir);
  }
  RunResult res;
  State s = init;
  res.records.push_back(state_record(s, forms, rc.model));
  int snap = 0;
  if (!dir.empty() && rc.output.vtk) write_vtk_snapshot(dir, snap++, mesh, s);
  if (observer) observer(s, StepReport{});

  const int n = step_count(rc.time.T, rc.time.tau);
  DiagnosticsRecord prev = res.records.front();
  for (int k = 1; k <= n; ++k) {
    const double tau = k < n ? rc.time.tau : rc.time.T - (n - 1) * rc.time.tau;
    auto [next, rep] = stepper.step(s, tau, rc.time.adaptive);
    if (k == n) next.t = rc.time.T;
    DiagnosticsRecord r = state_record(next, forms, rc.model);
    r.diss_bulk = rep.diss_bulk;
    r.diss_surf = rep.diss_surf;
    r.diss_robin = rep.diss_robin;
    r.conv_power_bulk = rep.conv_bulk;
    r.conv_power_surf = rep.conv_surf;
    r.energy_residual = energy_residual(prev, r, tau);
    r.newton_iters = rep.newton_iters;
    if (k % rc.output.every == 0 || k == n) {
      res.records.push_back(r);
      if (!dir.empty() && rc.output.vtk) write_vtk_snapshot(dir, snap++, mesh, next);
    }
    if (observer) observer(next, rep);
    prev = r;
    s = std::move(next);
  }
  res.final_state = std::move(s);
  res.steps = n;
  if (!dir.empty()) write_csv(dir / "series.csv", res.records);
  return res;
}

inline RunResult run(const RunConfig& rc, const StepObserver& observer = {}) {
  const TriMesh mesh = build_mesh(rc.mesh);
  const FormsBundle forms = assemble_core(mesh);
  rc.model.validate(forms);
  const auto init = make_initial_data(rc.init, mesh, forms, rc.model.coupling, rc.model.bulk_potential,
                                      rc.model.surf_potential);
  return run(mesh, forms, rc, initial_state(init, forms), observer);
}

struct EpsContinuationReport {
  std::vector<double> eps;
  std::vector<RunResult> runs;
  std::vector<double> distances;  // bulk L2 distance of phi at T between consecutive eps
  std::vector<double> max_abs_phi;  // over every iterate of each run
  std::vector<double> overshoot;    // max(0, max|phi| - 1) / eps per run
};

/// Same scenario and initial data at each eps of a strictly decreasing schedule.
inline EpsContinuationReport epsilon_continuation(const RunConfig& base, const std::vector<double>& schedule) {
  if (schedule.empty()) throw InvalidArgument("eps schedule is empty");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] > 0.0 && schedule[i] < 1.0)) throw InvalidArgument("eps schedule entries must lie in (0, 1)");
    if (i > 0 && !(schedule[i] < schedule[i - 1])) throw InvalidArgument("eps schedule must be strictly decreasing");
  }
  const TriMesh mesh = build_mesh(base.mesh);
  const FormsBundle forms = assemble_core(mesh);
  const auto init = make_initial_data(base.init, mesh, forms, base.model.coupling, base.model.bulk_potential,
                                      base.model.surf_potential);
  EpsContinuationReport rep;
  for (std::size_t k = 0; k < schedule.size(); ++k) {
    RunConfig rc = base;
    rc.model.eps = schedule[k];
    rc.model.validate(forms);
    if (!base.output.dir.empty()) rc.output.dir = (std::filesystem::path(base.output.dir) / ("eps_" + std::to_string(k))).string();
    double mx = 0.0;
    auto obs = [&](const State& s, const StepReport&) {
      mx = std::max({mx, s.phi.cwiseAbs().maxCoeff(), s.psi.cwiseAbs().maxCoeff()});
    };
    rep.eps.push_back(schedule[k]);
    rep.runs.push_back(run(mesh, forms, rc, initial_state(init, forms), obs));
    rep.max_abs_phi.push_back(mx);
    rep.overshoot.push_back(std::max(0.0, mx - 1.0) / schedule[k]);
  }
  for (std::size_t k = 0; k + 1 < rep.runs.size(); ++k) {
    const Vector d = rep.runs[k].final_state.phi - rep.runs[k + 1].final_state.phi;
    rep.distances.push_back(std::sqrt(std::max(0.0, d.dot(forms.M_bulk * d))));
  }
  return rep;
}

}  // namespace bscch
