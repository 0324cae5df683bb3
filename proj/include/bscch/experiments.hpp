#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "bscch/diagnostics.hpp"
#include "bscch/elliptic.hpp"
#include "bscch/error.hpp"
#include "bscch/stepper.hpp"

namespace bscch {

/// Worker count for parameter sweeps: BSCCH_THREADS if set to a positive integer, else 1.
inline int sweep_threads() {
  const char* env = std::getenv("BSCCH_THREADS");
  if (!env) return 1;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1) throw InvalidArgument("BSCCH_THREADS must be a positive integer");
  return static_cast<int>(std::min<long>(n, 256));
}

/// Evaluates fn(0..n-1) on up to sweep_threads() threads; results keep index order.
/// The exception of the lowest failing index is rethrown.
template <class R>
std::vector<R> parallel_map(std::size_t n, const std::function<R(std::size_t)>& fn) {
  std::vector<R> out(n);
  std::vector<std::exception_ptr> err(n);
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(sweep_threads()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = fn(i);
      } catch (...) {
        err[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : err) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

namespace detail {

inline std::string member_dir(const std::string& base, const std::string& name) {
  if (base.empty()) return "";
  return (std::filesystem::path(base) / name).string();
}

/// Subtracts the component along the kernel direction(s); returns the largest removed mean.
inline double strip_mean(const FormsBundle& f, Vector& x, MeanMode mode, double beta) {
  const auto V = f.nv(), B = f.nb();
  if (mode == MeanMode::combined) {
    Vector d(V + B);
    d << Vector::Constant(V, beta), Vector::Ones(B);
    const Vector c = mean_functionals(f, mode, beta)[0];
    const double m = c.dot(x) / c.dot(d);
    x -= m * d;
    return std::abs(m);
  }
  const double mb = f.lumped_bulk.dot(x.head(V)) / f.area;
  const double ms = f.lumped_surf.dot(x.tail(B)) / f.perimeter;
  x.head(V).array() -= mb;
  x.tail(B).array() -= ms;
  return std::max(std::abs(mb), std::abs(ms));
}

}  // namespace detail

struct CDReport {
  std::vector<double> amplitudes;
  std::vector<double> times;                   // t after each step (t = 0 included)
  std::vector<std::vector<double>> distances;  // distances[a][k] = d_a(times[k])
  std::vector<double> max_distance;
  double max_mean_drift = 0.0;  // largest mean removed from a difference pair

  bool zero_at_zero(double tol = 1e-12) const {
    for (std::size_t i = 0; i < amplitudes.size(); ++i) {
      if (amplitudes[i] == 0.0 && max_distance[i] > tol) return false;
    }
    return true;
  }
  /// max_t d_a nondecreasing along ascending amplitudes.
  bool monotone() const {
    std::vector<std::size_t> idx(amplitudes.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return amplitudes[a] < amplitudes[b]; });
    for (std::size_t k = 1; k < idx.size(); ++k) {
      if (max_distance[idx[k]] < max_distance[idx[k - 1]]) return false;
    }
    return true;
  }
  /// max d_a2 / max d_a1 for the two smallest positive amplitudes.
  double growth_ratio() const {
    std::vector<std::size_t> pos;
    for (std::size_t i = 0; i < amplitudes.size(); ++i) {
      if (amplitudes[i] > 0.0) pos.push_back(i);
    }
    if (pos.size() < 2) return std::nan("");
    std::sort(pos.begin(), pos.end(), [&](auto a, auto b) { return amplitudes[a] < amplitudes[b]; });
    return max_distance[pos[1]] / max_distance[pos[0]];
  }
};

/// Base run with rigid rotation omega, perturbed runs with omega + a. Distances are dual norms
/// of the (phi, psi) difference, measured after every step.
inline CDReport continuous_dependence_experiment(const RunConfig& base_in, const std::vector<double>& amplitudes) {
  if (amplitudes.empty()) throw InvalidArgument("no perturbation amplitudes given");
  for (double a : amplitudes) {
    if (!std::isfinite(a)) throw InvalidArgument("perturbation amplitudes must be finite");
  }
  if (!base_in.model.bulk_mobility.is_constant() || !base_in.model.surf_mobility.is_constant()) {
    throw InvalidArgument("continuous dependence requires constant mobilities");
  }
  RunConfig base = base_in;
  base.model.velocity.bulk = VelocityField::Bulk::rigid_rotation;

  const TriMesh mesh = build_mesh(base.mesh);
  const FormsBundle forms = assemble_core(mesh);
  base.model.validate(forms);
  const auto init = make_initial_data(base.init, mesh, forms, base.model.coupling, base.model.bulk_potential,
                                      base.model.surf_potential);
  const State s0 = initial_state(init, forms);

  CDReport rep;
  rep.amplitudes = amplitudes;
  std::vector<Vector> ref;
  {
    RunConfig rc = base;
    rc.output.dir = detail::member_dir(base.output.dir, "base");
    run(mesh, forms, rc, s0, [&](const State& s, const StepReport&) {
      ref.push_back(s.z());
      rep.times.push_back(s.t);
    });
  }

  const InverseOperatorS S(mesh, forms, base.model.coupling);
  struct Member {
    std::vector<double> d;
    double drift = 0.0;
  };
  auto members = parallel_map<Member>(amplitudes.size(), [&](std::size_t i) {
    RunConfig rc = base;
    rc.model.velocity.omega += amplitudes[i];
    rc.output.dir = detail::member_dir(base.output.dir, "a_" + std::to_string(i));
    Member m;
    std::size_t k = 0;
    run(mesh, forms, rc, s0, [&](const State& s, const StepReport&) {
      Vector x = s.z() - ref.at(k++);
      m.drift = std::max(m.drift, detail::strip_mean(forms, x, S.mode(), base.model.coupling.beta));
      m.d.push_back(x.lpNorm<Eigen::Infinity>() == 0.0 ? 0.0 : S.dual_norm(x));
    });
    return m;
  });
  for (auto& m : members) {
    rep.max_mean_drift = std::max(rep.max_mean_drift, m.drift);
    rep.max_distance.push_back(m.d.empty() ? 0.0 : *std::max_element(m.d.begin(), m.d.end()));
    rep.distances.push_back(std::move(m.d));
  }
  if (rep.max_mean_drift > 1e-12) {
    throw SolverFailure("difference pair drifted off the mean-free space by " + std::to_string(rep.max_mean_drift));
  }
  return rep;
}

enum class LimitParam { L_to_zero, L_to_inf, K_to_zero, K_to_inf, eps_to_zero };

inline LimitParam parse_limit_param(const std::string& s) {
  if (s == "L0" || s == "L->0") return LimitParam::L_to_zero;
  if (s == "Linf" || s == "L->inf") return LimitParam::L_to_inf;
  if (s == "K0" || s == "K->0") return LimitParam::K_to_zero;
  if (s == "Kinf" || s == "K->inf") return LimitParam::K_to_inf;
  if (s == "eps" || s == "eps->0") return LimitParam::eps_to_zero;
  throw InvalidArgument("unknown limit parameter '" + s + "' (expected L0, Linf, K0, Kinf or eps)");
}

inline const char* to_string(LimitParam p) {
  switch (p) {
    case LimitParam::L_to_zero: return "L0";
    case LimitParam::L_to_inf: return "Linf";
    case LimitParam::K_to_zero: return "K0";
    case LimitParam::K_to_inf: return "Kinf";
    case LimitParam::eps_to_zero: return "eps";
  }
  return "?";
}

struct LimitReport {
  LimitParam param = LimitParam::L_to_zero;
  std::vector<double> schedule;
  std::string quantity;            // name of the monitored quantity
  std::vector<double> values;      // one per schedule entry (eps: one per consecutive pair)
  std::string secondary_quantity;  // L->inf: separate-mass drift; eps: overshoot constant
  std::vector<double> secondary;

  /// Strict decrease of values; true when there is nothing to compare.
  bool decreasing() const {
    for (std::size_t k = 1; k < values.size(); ++k) {
      if (!(values[k] < values[k - 1])) return false;
    }
    return true;
  }
  bool secondary_decreasing() const {
    for (std::size_t k = 1; k < secondary.size(); ++k) {
      if (!(secondary[k] < secondary[k - 1])) return false;
    }
    return true;
  }
};

/// Runs the base scenario along a schedule moving toward the chosen limit and records the
/// quantity that must vanish there.
inline LimitReport limit_study(const RunConfig& base, LimitParam param, const std::vector<double>& schedule) {
  if (schedule.empty()) throw InvalidArgument("limit schedule is empty");
  for (std::size_t k = 1; k < schedule.size(); ++k) {
    const bool up = param == LimitParam::L_to_inf || param == LimitParam::K_to_inf;
    if (up ? !(schedule[k] > schedule[k - 1]) : !(schedule[k] < schedule[k - 1])) {
      throw InvalidArgument(std::string("schedule must move monotonically toward the limit ") + to_string(param));
    }
  }
  LimitReport rep;
  rep.param = param;
  rep.schedule = schedule;
  if (param == LimitParam::eps_to_zero) {
    const auto ec = epsilon_continuation(base, schedule);
    rep.quantity = "l2_distance_phi";
    rep.values = ec.distances;
    rep.secondary_quantity = "overshoot_constant";
    rep.secondary = ec.overshoot;
    return rep;
  }
  for (double v : schedule) {
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidArgument("limit schedule entries must be positive and finite");
  }

  const TriMesh mesh = build_mesh(base.mesh);
  const FormsBundle forms = assemble_core(mesh);
  struct Member {
    double value = 0.0;
    double secondary = 0.0;
  };
  auto members = parallel_map<Member>(schedule.size(), [&](std::size_t i) {
    RunConfig rc = base;
    if (param == LimitParam::L_to_zero || param == LimitParam::L_to_inf) rc.model.coupling.L = schedule[i];
    else rc.model.coupling.K = schedule[i];
    rc.output.dir = detail::member_dir(base.output.dir, std::string(to_string(param)) + "_" + std::to_string(i));
    rc.model.validate(forms);
    const auto init = make_initial_data(rc.init, mesh, forms, rc.model.coupling, rc.model.bulk_potential,
                                        rc.model.surf_potential);
    const State s0 = initial_state(init, forms);
    const auto& cp = rc.model.coupling;
    const double mb0 = forms.lumped_bulk.dot(s0.phi), ms0 = forms.lumped_surf.dot(s0.psi);
    Member m;
    double t_prev = 0.0;
    const auto res = run(mesh, forms, rc, s0, [&](const State& s, const StepReport&) {
      const double dt = s.t - t_prev;
      t_prev = s.t;
      switch (param) {
        case LimitParam::L_to_zero:
          m.value += dt * chemical_mismatch_sq(s, forms, cp.beta);
          break;
        case LimitParam::L_to_inf:
          m.value += dt * cp.sigma_L() * std::sqrt(chemical_mismatch_sq(s, forms, cp.beta));
          m.secondary = std::max({m.secondary, std::abs(forms.lumped_bulk.dot(s.phi) - mb0),
                                  std::abs(forms.lumped_surf.dot(s.psi) - ms0)});
          break;
        default:
          break;
      }
    });
    const State& fin = res.final_state;
    if (param == LimitParam::K_to_zero) m.value = phase_mismatch(fin, forms, cp.alpha);
    if (param == LimitParam::K_to_inf) {
      const double pm = phase_mismatch(fin, forms, cp.alpha);
      m.value = 0.5 * cp.sigma_K() * pm * pm;
    }
    return m;
  });
  switch (param) {
    case LimitParam::L_to_zero: rep.quantity = "int_mismatch_sq_beta_theta_mu"; break;
    case LimitParam::L_to_inf:
      rep.quantity = "int_sigmaL_flux";
      rep.secondary_quantity = "separate_mass_drift";
      break;
    case LimitParam::K_to_zero: rep.quantity = "terminal_mismatch_alpha_psi_phi"; break;
    case LimitParam::K_to_inf: rep.quantity = "terminal_coupling_energy"; break;
    default: break;
  }
  for (const auto& m : members) {
    rep.values.push_back(m.value);
    if (param == LimitParam::L_to_inf) rep.secondary.push_back(m.secondary);
  }
  return rep;
}

}  // namespace bscch
