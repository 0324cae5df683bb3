#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "bscch/assembly.hpp"
#include "bscch/potentials.hpp"

namespace bscch {

/// Time t plus nodal phi, mu (all vertices) and psi, theta (boundary loop positions).
struct State {
  double t = 0.0;
  Vector phi, psi, mu, theta;

  Vector z() const {
    Vector v(phi.size() + psi.size());
    v << phi, psi;
    return v;
  }
  Vector w() const {
    Vector v(mu.size() + theta.size());
    v << mu, theta;
    return v;
  }
  static State from_pairs(double t, const Vector& z, const Vector& w, Eigen::Index nv) {
    return {t, z.head(nv), z.tail(z.size() - nv), w.head(nv), w.tail(w.size() - nv)};
  }
  bool operator==(const State& o) const {
    return t == o.t && phi == o.phi && psi == o.psi && mu == o.mu && theta == o.theta;
  }
};

/// Physical and regularization parameters of one simulation.
struct ModelParams {
  CouplingParams coupling;
  Potential bulk_potential = Potential::logarithmic();
  Potential surf_potential = Potential::logarithmic();
  Mobility bulk_mobility;
  Mobility surf_mobility;
  VelocityField velocity;
  double eps = 0.05;

  /// Throws InvalidArgument unless eps lies in (0,1), (K,L,alpha,beta) are admissible and,
  /// for K < inf, the potential pair passes the domination check.
  void validate(const FormsBundle& f) const {
    if (!(eps > 0.0 && eps < 1.0)) throw InvalidArgument("Yosida eps must lie in (0, 1)");
    coupling.validate(f.area, f.perimeter);
    bulk_mobility.validated();
    surf_mobility.validated();
    if (std::isinf(coupling.K)) return;
    const auto& G = surf_potential.convex();
    std::vector<double> grid;
    const Interval d = G.prime_domain();
    const double lo = d.bounded() ? d.lo : -10.0, hi = d.bounded() ? d.hi : 10.0;
    for (int i = 0; i <= 400; ++i) {
      const double r = lo + (hi - lo) * i / 400.0;
      if (d.contains(r)) grid.push_back(r);
    }
    const auto rep = check_domination(bulk_potential.convex(), G, coupling.alpha, grid, {eps});
    if (!rep.admissible) {
      throw InvalidArgument("potential pair (" + std::string(to_string(bulk_potential.kind())) + ", " +
                            to_string(surf_potential.kind()) + ") rejected for K < inf: " + rep.reason);
    }
    if (!rep.failures.empty()) {
      throw InvalidArgument("domination inequality fails at r = " + std::to_string(rep.failures[0].r) + ": " +
                            rep.failures[0].property);
    }
  }
};

struct NewtonSettings {
  double tol_abs = 1e-12;
  double tol_rel = 1e-10;
  int max_iter = 50;
  double damping_floor = 0.125;

  void validate() const {
    if (!(tol_abs >= 0.0) || !(tol_rel >= 0.0) || tol_abs + tol_rel == 0.0) {
      throw InvalidArgument("Newton tolerances must be nonnegative and not both zero");
    }
    if (max_iter < 1) throw InvalidArgument("newton.max_iter must be at least 1");
    if (!(damping_floor > 0.0 && damping_floor <= 1.0)) throw InvalidArgument("newton.damping_floor must lie in (0, 1]");
  }
};

}  // namespace bscch
