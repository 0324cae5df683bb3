#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "bscch/bscch.hpp"

namespace bscch::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kSolver = 2 };

namespace detail {

inline std::vector<double> parse_number_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      if (item == "inf") {
        v = kInf;
        pos = item.size();
      } else {
        v = std::stod(item, &pos);
      }
    } catch (const std::exception&) {
      throw InvalidArgument(std::string("bad entry '") + item + "' in " + what);
    }
    if (pos != item.size()) throw InvalidArgument(std::string("bad entry '") + item + "' in " + what);
    out.push_back(v);
  }
  if (out.empty()) throw InvalidArgument(std::string(what) + " is empty");
  return out;
}

inline double parse_extended(const std::string& s, const char* what) {
  const auto v = parse_number_list(s, what);
  if (v.size() != 1) throw InvalidArgument(std::string(what) + " expects a single value");
  return v[0];
}

inline std::vector<double> domain_grid(const ConvexPart& g, int n) {
  const Interval d = g.prime_domain();
  const double lo = d.bounded() ? d.lo : -10.0, hi = d.bounded() ? d.hi : 10.0;
  std::vector<double> grid;
  for (int i = 0; i < n; ++i) {
    const double r = lo + (hi - lo) * i / (n - 1);
    if (d.contains(r)) grid.push_back(r);
  }
  return grid;
}

inline std::string fmt(double x) { return Config::format(x); }

}  // namespace detail

/// Runs one CLI invocation; args exclude the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bulk-surface convective Cahn-Hilliard simulator", "bscch"};
  app.require_subcommand(1);

  auto* mesh_cmd = app.add_subcommand("mesh", "generate a disk mesh and print its statistics");
  int nb = 64, nr = 16;
  std::string mesh_out;
  mesh_cmd->add_option("--nb", nb, "boundary vertices (even, >= 8)");
  mesh_cmd->add_option("--nr", nr, "radial rings (>= 1)");
  mesh_cmd->add_option("--out", mesh_out, "write the mesh file here");

  auto* run_cmd = app.add_subcommand("run", "run a simulation");
  std::string config_path, out_dir;
  run_cmd->add_option("--config", config_path, "configuration file")->required();
  run_cmd->add_option("--out", out_dir, "override output.dir");

  auto* pot_cmd = app.add_subcommand("potential-check", "domination admissibility of a potential pair");
  std::string pair, eps_text = "0.5,0.1,0.02";
  double alpha = 1.0;
  pot_cmd->add_option("--pair", pair, "bulk,surface with kinds reg|log|obst")->required();
  pot_cmd->add_option("--alpha", alpha, "trace weight alpha");
  pot_cmd->add_option("--eps", eps_text, "Yosida parameters for the regularized transfer");

  auto* mms_cmd = app.add_subcommand("elliptic-mms", "manufactured-solution convergence study");
  std::string K_text = "1";
  int levels = 3;
  mms_cmd->add_option("--K", K_text, "0, 1 or inf");
  mms_cmd->add_option("--levels", levels, "number of meshes (32,8) doubled");

  auto* poin_cmd = app.add_subcommand("poincare", "estimate the bulk-surface Poincare constant");
  std::string pK_text = "1";
  double p_alpha = 1.0, p_beta = 1.0;
  int p_nb = 32, p_nr = 8;
  poin_cmd->add_option("--K", pK_text, "finite K >= 0");
  poin_cmd->add_option("--alpha", p_alpha);
  poin_cmd->add_option("--beta", p_beta);
  poin_cmd->add_option("--nb", p_nb);
  poin_cmd->add_option("--nr", p_nr);

  auto* lim_cmd = app.add_subcommand("limit-study", "run a schedule toward a coupling or eps limit");
  std::string lim_config, param, schedule_text;
  lim_cmd->add_option("--config", lim_config, "base configuration")->required();
  lim_cmd->add_option("--param", param, "L0, Linf, K0, Kinf or eps")->required();
  lim_cmd->add_option("--schedule", schedule_text, "comma-separated values")->required();

  auto* cd_cmd = app.add_subcommand("cont-dep", "continuous dependence on the bulk rotation rate");
  std::string cd_config, amp_text = "0,0.001,0.002";
  cd_cmd->add_option("--config", cd_config, "base configuration")->required();
  cd_cmd->add_option("--amplitudes", amp_text, "comma-separated perturbations of omega");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kValidation;
  }

  out << std::setprecision(17);
  try {
    if (*mesh_cmd) {
      const TriMesh m = generate_disk_mesh(nb, nr);
      const auto st = mesh_stats(m);
      if (!mesh_out.empty()) write_mesh(m, mesh_out);
      out << "vertices " << m.num_vertices() << "\ntriangles " << m.num_triangles() << "\nboundary "
          << m.num_boundary() << "\nh_max " << st.h_max << "\narea " << st.area << "\nperimeter " << st.perimeter
          << "\nmin_angle " << st.min_angle << "\n";
      return kOk;
    }
    if (*run_cmd) {
      RunConfig rc = Config::load(config_path).to_run_config();
      if (!out_dir.empty()) rc.output.dir = out_dir;
      if (!rc.output.dir.empty()) {
        std::filesystem::create_directories(rc.output.dir);
        std::ofstream cfg(std::filesystem::path(rc.output.dir) / "config.cfg");
        cfg << Config::from_run_config(rc).serialize();
      }
      const auto res = run(rc);
      const auto& a = res.records.front();
      const auto& b = res.records.back();
      out << "steps " << res.steps << "\nrecords " << res.records.size() << "\nenergy " << a.energy << " -> "
          << b.energy << "\nmass_combined " << a.mass_combined << " -> " << b.mass_combined << "\n";
      double sep = 1.0;
      for (const auto& r : res.records) sep = std::min({sep, r.sep_margin_bulk, r.sep_margin_surf});
      out << "min_sep_margin " << sep << "\n";
      return kOk;
    }
    if (*pot_cmd) {
      const auto comma = pair.find(',');
      if (comma == std::string::npos) throw InvalidArgument("--pair expects bulk,surface");
      const Potential F = Potential::from_name(pair.substr(0, comma), 1.0, 0.8, 1.6);
      const Potential G = Potential::from_name(pair.substr(comma + 1), 1.0, 0.8, 1.6);
      const auto eps = detail::parse_number_list(eps_text, "--eps");
      const auto rep = check_domination(F.convex(), G.convex(), alpha, detail::domain_grid(G.convex(), 2001), eps);
      if (!rep.admissible) {
        out << rep.reason << "\n";
        return kValidation;
      }
      out << "admissible kappa1 " << detail::fmt(rep.kappa1) << " kappa2 " << detail::fmt(rep.kappa2) << "\n";
      if (!rep.failures.empty()) {
        const auto& f = rep.failures.front();
        out << "transfer check failed: " << f.property << " at eps " << f.eps << ", r " << f.r << "\n";
        return kValidation;
      }
      out << "regularized transfer verified for eps " << eps_text << "\n";
      return kOk;
    }
    if (*mms_cmd) {
      const double K = detail::parse_extended(K_text, "--K");
      if (levels < 1) throw InvalidArgument("--levels must be at least 1");
      const auto lv = run_elliptic_mms(K, levels);
      out << "nb,nr,h_max,error_bulk,error_surf,error,ratio\n";
      for (std::size_t i = 0; i < lv.size(); ++i) {
        out << lv[i].nb << ',' << lv[i].nr << ',' << lv[i].h_max << ',' << lv[i].error_bulk << ',' << lv[i].error_surf
            << ',' << lv[i].error << ',';
        if (i > 0) out << lv[i - 1].error / lv[i].error;
        out << '\n';
      }
      return kOk;
    }
    if (*poin_cmd) {
      const double K = detail::parse_extended(pK_text, "--K");
      const TriMesh m = generate_disk_mesh(p_nb, p_nr);
      const FormsBundle f = assemble_core(m);
      const auto est = estimate_poincare_constant(m, f, K, p_alpha, p_beta);
      out << "C_P " << est.C_P << "\nlambda_min " << est.lambda_min << "\niterations " << est.iterations << "\n";
      return kOk;
    }
    if (*lim_cmd) {
      const RunConfig rc = Config::load(lim_config).to_run_config();
      const auto sched = detail::parse_number_list(schedule_text, "--schedule");
      const auto rep = limit_study(rc, parse_limit_param(param), sched);
      out << "quantity " << rep.quantity << "\n";
      const bool pairs = rep.param == LimitParam::eps_to_zero;
      for (std::size_t i = 0; i < rep.values.size(); ++i) {
        if (pairs) out << sched[i] << ',' << sched[i + 1];
        else out << sched[i];
        out << ' ' << rep.values[i] << '\n';
      }
      if (!rep.secondary.empty()) {
        out << "secondary " << rep.secondary_quantity << "\n";
        for (std::size_t i = 0; i < rep.secondary.size(); ++i) out << sched[i] << ' ' << rep.secondary[i] << '\n';
      }
      out << "strictly_decreasing " << (rep.decreasing() ? "yes" : "no") << "\n";
      return kOk;
    }
    if (*cd_cmd) {
      const RunConfig rc = Config::load(cd_config).to_run_config();
      const auto amps = detail::parse_number_list(amp_text, "--amplitudes");
      const auto rep = continuous_dependence_experiment(rc, amps);
      out << "amplitude max_distance\n";
      for (std::size_t i = 0; i < amps.size(); ++i) out << amps[i] << ' ' << rep.max_distance[i] << '\n';
      out << "zero_at_zero " << (rep.zero_at_zero() ? "yes" : "no") << "\nmonotone "
          << (rep.monotone() ? "yes" : "no") << "\ngrowth_ratio " << rep.growth_ratio() << "\n";
      if (!rc.output.dir.empty()) {
        std::filesystem::create_directories(rc.output.dir);
        std::ofstream os(std::filesystem::path(rc.output.dir) / "cont_dep.csv");
        os << std::setprecision(17) << 't';
        for (double a : amps) os << ",d_" << a;
        os << '\n';
        for (std::size_t k = 0; k < rep.times.size(); ++k) {
          os << rep.times[k];
          for (const auto& d : rep.distances) os << ',' << d[k];
          os << '\n';
        }
      }
      return kOk;
    }
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const SolverFailure& e) {
    err << "solver failure: " << e.what() << "\n";
    return kSolver;
  }
  return kValidation;
}

}  // namespace bscch::cli
