#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "bscch/elliptic.hpp"
#include "bscch/model.hpp"

namespace bscch {

struct DiagnosticsRecord {
  double t = 0.0;
  double mass_bulk = 0.0;
  double mass_surf = 0.0;
  double mass_combined = 0.0;
  double energy = 0.0;
  double diss_bulk = 0.0;
  double diss_surf = 0.0;
  double diss_robin = 0.0;
  double conv_power_bulk = 0.0;
  double conv_power_surf = 0.0;
  double energy_residual = 0.0;
  double sep_margin_bulk = 1.0;
  double sep_margin_surf = 1.0;
  int newton_iters = 0;

  static constexpr const char* csv_header =
      "t,mass_bulk,mass_surf,mass_combined,energy,diss_bulk,diss_surf,diss_robin,conv_power_bulk,"
      "conv_power_surf,energy_residual,sep_margin_bulk,sep_margin_surf,newton_iters";

  bool operator==(const DiagnosticsRecord&) const = default;
};

/// Sum over nodes of lumped mass times F_eps (bulk) and G_eps (surface).
inline double potential_energy(const FormsBundle& f, const ModelParams& p, const Vector& phi, const Vector& psi) {
  const YosidaParam ep(p.eps);
  double e = 0.0;
  for (Eigen::Index i = 0; i < phi.size(); ++i) e += f.lumped_bulk[i] * eval_regularized(p.bulk_potential, ep, phi[i]).F_eps;
  for (Eigen::Index i = 0; i < psi.size(); ++i) e += f.lumped_surf[i] * eval_regularized(p.surf_potential, ep, psi[i]).F_eps;
  return e;
}

/// Regularized energy: gradient terms, lumped potentials and the sigma(K) mismatch term.
inline double energy(const State& s, const FormsBundle& f, const ModelParams& p) {
  double e = 0.5 * s.phi.dot(f.A_bulk * s.phi) + 0.5 * s.psi.dot(f.A_surf * s.psi);
  e += potential_energy(f, p, s.phi, s.psi);
  const double sk = p.coupling.sigma_K();
  if (sk != 0.0) {
    const Vector d = p.coupling.alpha * s.psi - f.trace * s.phi;
    e += 0.5 * sk * d.dot(f.M_surf * d);
  }
  return e;
}

struct Masses {
  double bulk;
  double surf;
  double combined;
};

inline Masses masses(const State& s, const FormsBundle& f, const CouplingParams& cp) {
  const double mb = f.lumped_bulk.dot(s.phi);
  const double ms = f.lumped_surf.dot(s.psi);
  return {mb, ms, cp.beta * mb + ms};
}

/// 1 - max nodal |phi| and 1 - max nodal |psi|.
inline std::array<double, 2> separation_margin(const State& s) {
  const double b = s.phi.size() ? s.phi.cwiseAbs().maxCoeff() : 0.0;
  const double g = s.psi.size() ? s.psi.cwiseAbs().maxCoeff() : 0.0;
  return {1.0 - b, 1.0 - g};
}

/// sigma(L) (beta theta - mu|_Gamma)^T M_surf (beta theta - mu|_Gamma).
inline double robin_dissipation(const State& s, const FormsBundle& f, const CouplingParams& cp) {
  const double sl = cp.sigma_L();
  if (sl == 0.0) return 0.0;
  const Vector d = cp.beta * s.theta - f.trace * s.mu;
  return sl * d.dot(f.M_surf * d);
}

/// ||beta theta - mu|_Gamma||^2 in L2(Gamma).
inline double chemical_mismatch_sq(const State& s, const FormsBundle& f, double beta) {
  const Vector d = beta * s.theta - f.trace * s.mu;
  return d.dot(f.M_surf * d);
}

/// ||alpha psi - phi|_Gamma|| in L2(Gamma).
inline double phase_mismatch(const State& s, const FormsBundle& f, double alpha) {
  const Vector d = alpha * s.psi - f.trace * s.phi;
  return std::sqrt(std::max(0.0, d.dot(f.M_surf * d)));
}

/// [E(n+1) - E(n)]/tau + dissipation - convective power.
inline double energy_residual(double e_old, double e_new, double tau, double diss_bulk, double diss_surf,
                              double diss_robin, double conv_bulk, double conv_surf) {
  return (e_new - e_old) / tau + diss_bulk + diss_surf + diss_robin - conv_bulk - conv_surf;
}

inline double energy_residual(const DiagnosticsRecord& prev, const DiagnosticsRecord& next, double tau) {
  return energy_residual(prev.energy, next.energy, tau, next.diss_bulk, next.diss_surf, next.diss_robin,
                         next.conv_power_bulk, next.conv_power_surf);
}

/// Record of the state-only quantities; dissipation, convection and Newton fields stay zero.
inline DiagnosticsRecord state_record(const State& s, const FormsBundle& f, const ModelParams& p) {
  DiagnosticsRecord r;
  r.t = s.t;
  const auto m = masses(s, f, p.coupling);
  r.mass_bulk = m.bulk;
  r.mass_surf = m.surf;
  r.mass_combined = m.combined;
  r.energy = energy(s, f, p);
  const auto sep = separation_margin(s);
  r.sep_margin_bulk = sep[0];
  r.sep_margin_surf = sep[1];
  return r;
}

}  // namespace bscch
