#pragma once

// Line-based "key = value" configuration with '#' comments and dotted keys.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bscch/error.hpp"
#include "bscch/model.hpp"

namespace bscch {

struct MeshSpec {
  int nb = 64;
  int nr = 16;
  std::string file;  // read instead of generating when nonempty
};

struct InitialDataSpec {
  enum class Mode { constant, random_perturbation, two_bubbles };
  Mode mode = Mode::random_perturbation;
  double m = 0.0;
  double amplitude = 0.1;
  std::uint64_t seed = 7;
  double radius = 0.3;
  double separation = 0.8;
  double width = 0.05;
  double delta0 = 0.01;
};

struct TimeSpec {
  double tau = 1e-4;
  double T = 0.05;
  bool adaptive = false;  // halve tau (at most 5 times) when Newton fails
};

struct OutputSpec {
  std::string dir;  // no files are written when empty
  int every = 1;
  bool vtk = false;
};

struct RunConfig {
  MeshSpec mesh;
  ModelParams model;
  TimeSpec time;
  NewtonSettings newton;
  InitialDataSpec init;
  OutputSpec output;
  std::vector<double> eps_schedule;  // used by the eps-continuation study only
};

/// Flat dotted-key map as read from a file; values kept as written.
class Config {
 public:
  using Map = std::map<std::string, std::string>;

  static const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "mesh.nb", "mesh.nr", "mesh.file",
        "model.K", "model.L", "model.alpha", "model.beta",
        "potential.bulk", "potential.surface", "potential.c", "potential.theta", "potential.theta_c",
        "mobility.bulk", "mobility.bulk_m0", "mobility.bulk_m1",
        "mobility.surface", "mobility.surface_m0", "mobility.surface_m1",
        "velocity.bulk", "velocity.omega", "velocity.surface", "velocity.speed", "velocity.ramp",
        "time.tau", "time.T", "time.adaptive",
        "yosida.eps", "yosida.schedule",
        "newton.tol_abs", "newton.tol_rel", "newton.max_iter", "newton.damping_floor",
        "init.mode", "init.m", "init.amplitude", "init.seed", "init.radius", "init.separation", "init.width",
        "init.delta0",
        "output.dir", "output.every", "output.vtk"};
    return keys;
  }

  static Config parse(std::istream& is) {
    Config c;
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
      ++n;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string body = trim(line);
      if (body.empty()) continue;
      const auto eq = body.find('=');
      if (eq == std::string::npos) throw ParseError("expected 'key = value'", n);
      const std::string key = trim(body.substr(0, eq));
      const std::string value = trim(body.substr(eq + 1));
      if (key.empty()) throw ParseError("empty key", n);
      if (!is_known(key)) throw ParseError("unknown key '" + key + "'", n);
      if (c.values_.count(key)) throw ParseError("duplicate key '" + key + "'", n);
      c.values_[key] = value;
      c.lines_[key] = n;
    }
    return c;
  }

  static Config parse_string(const std::string& text) {
    std::istringstream is(text);
    return parse(is);
  }

  static Config load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw InvalidArgument("cannot open config file '" + path + "'");
    return parse(is);
  }

  std::string serialize() const {
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
    return os.str();
  }

  const Map& values() const { return values_; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) {
    if (!is_known(key)) throw InvalidArgument("unknown key '" + key + "'");
    values_[key] = value;
  }
  bool operator==(const Config& o) const { return values_ == o.values_; }

  /// Builds and fully validates a run configuration; unspecified keys take defaults.
  RunConfig to_run_config() const {
    RunConfig rc;
    rc.mesh.nb = get_int("mesh.nb", rc.mesh.nb);
    rc.mesh.nr = get_int("mesh.nr", rc.mesh.nr);
    rc.mesh.file = get_string("mesh.file", "");

    auto& cp = rc.model.coupling;
    cp.K = get_extended("model.K", 1.0);
    cp.L = get_extended("model.L", 1.0);
    cp.alpha = get_double("model.alpha", 1.0);
    cp.beta = get_double("model.beta", 1.0);

    const double c = get_double("potential.c", 1.0);
    const double theta = get_double("potential.theta", 0.8);
    const double theta_c = get_double("potential.theta_c", 1.6);
    rc.model.bulk_potential = wrap("potential.bulk", [&] {
      return Potential::from_name(get_string("potential.bulk", "log"), c, theta, theta_c);
    });
    rc.model.surf_potential = wrap("potential.surface", [&] {
      return Potential::from_name(get_string("potential.surface", "log"), c, theta, theta_c);
    });

    rc.model.bulk_mobility = mobility("bulk");
    rc.model.surf_mobility = mobility("surface");

    auto& vel = rc.model.velocity;
    const std::string vb = get_string("velocity.bulk", "none");
    if (vb == "none") vel.bulk = VelocityField::Bulk::none;
    else if (vb == "rotation" || vb == "rigid_rotation") vel.bulk = VelocityField::Bulk::rigid_rotation;
    else fail("velocity.bulk", "expected none or rotation");
    const std::string vs = get_string("velocity.surface", "none");
    if (vs == "none") vel.surface = VelocityField::Surface::none;
    else if (vs == "rotation") vel.surface = VelocityField::Surface::rotation;
    else fail("velocity.surface", "expected none or rotation");
    vel.omega = get_double("velocity.omega", 0.0);
    vel.speed = get_double("velocity.speed", 0.0);
    vel.ramp = get_double("velocity.ramp", 0.0);
    if (!(vel.ramp >= 0.0)) fail("velocity.ramp", "must be nonnegative");

    rc.time.tau = get_double("time.tau", rc.time.tau);
    rc.time.T = get_double("time.T", rc.time.T);
    rc.time.adaptive = get_bool("time.adaptive", false);
    if (!(rc.time.tau > 0.0)) fail("time.tau", "must be positive");
    if (!(rc.time.T >= 0.0)) fail("time.T", "must be nonnegative");

    rc.model.eps = get_double("yosida.eps", rc.model.eps);
    if (!(rc.model.eps > 0.0 && rc.model.eps < 1.0)) fail("yosida.eps", "must lie in (0, 1)");
    rc.eps_schedule = get_list("yosida.schedule");
    for (std::size_t i = 0; i < rc.eps_schedule.size(); ++i) {
      const double e = rc.eps_schedule[i];
      if (!(e > 0.0 && e < 1.0)) fail("yosida.schedule", "entries must lie in (0, 1)");
      if (i > 0 && !(e < rc.eps_schedule[i - 1])) fail("yosida.schedule", "must be strictly decreasing");
    }

    rc.newton.tol_abs = get_double("newton.tol_abs", rc.newton.tol_abs);
    rc.newton.tol_rel = get_double("newton.tol_rel", rc.newton.tol_rel);
    rc.newton.max_iter = get_int("newton.max_iter", rc.newton.max_iter);
    rc.newton.damping_floor = get_double("newton.damping_floor", rc.newton.damping_floor);
    wrap("newton", [&] { rc.newton.validate(); return 0; });

    auto& in = rc.init;
    const std::string mode = get_string("init.mode", "random");
    if (mode == "constant") in.mode = InitialDataSpec::Mode::constant;
    else if (mode == "random" || mode == "random_perturbation") in.mode = InitialDataSpec::Mode::random_perturbation;
    else if (mode == "two_bubbles") in.mode = InitialDataSpec::Mode::two_bubbles;
    else fail("init.mode", "expected constant, random or two_bubbles");
    in.m = get_double("init.m", in.m);
    in.amplitude = get_double("init.amplitude", in.amplitude);
    in.seed = static_cast<std::uint64_t>(get_int("init.seed", static_cast<long long>(in.seed)));
    in.radius = get_double("init.radius", in.radius);
    in.separation = get_double("init.separation", in.separation);
    in.width = get_double("init.width", in.width);
    in.delta0 = get_double("init.delta0", in.delta0);
    if (!(in.delta0 > 0.0 && in.delta0 < 1.0)) fail("init.delta0", "must lie in (0, 1)");
    if (!(in.amplitude >= 0.0)) fail("init.amplitude", "must be nonnegative");
    if (!(in.width > 0.0)) fail("init.width", "must be positive");

    rc.output.dir = get_string("output.dir", "");
    rc.output.every = get_int("output.every", 1);
    rc.output.vtk = get_bool("output.vtk", false);
    if (rc.output.every < 1) fail("output.every", "must be at least 1");
    return rc;
  }

  /// Full key set describing rc; parse(serialize(from_run_config(rc))) reproduces rc.
  static Config from_run_config(const RunConfig& rc) {
    Config c;
    auto put = [&](const std::string& k, const std::string& v) { c.values_[k] = v; };
    put("mesh.nb", std::to_string(rc.mesh.nb));
    put("mesh.nr", std::to_string(rc.mesh.nr));
    if (!rc.mesh.file.empty()) put("mesh.file", rc.mesh.file);
    const auto& cp = rc.model.coupling;
    put("model.K", format(cp.K));
    put("model.L", format(cp.L));
    put("model.alpha", format(cp.alpha));
    put("model.beta", format(cp.beta));
    put("potential.bulk", to_string(rc.model.bulk_potential.kind()));
    put("potential.surface", to_string(rc.model.surf_potential.kind()));
    double c_q = 1.0, th = 0.8, thc = 1.6;
    for (const auto* p : {&rc.model.bulk_potential, &rc.model.surf_potential}) {
      if (p->kind() == WellKind::quartic) c_q = p->convex().coefficient();
      if (p->kind() == WellKind::logarithmic) {
        th = p->convex().coefficient();
        thc = p->smooth().coefficient();
      }
    }
    put("potential.c", format(c_q));
    put("potential.theta", format(th));
    put("potential.theta_c", format(thc));
    auto mob = [&](const std::string& side, const Mobility& m) {
      put("mobility." + side, m.kind == Mobility::Kind::constant ? "constant" : "degenerate");
      put("mobility." + side + "_m0", format(m.m0));
      put("mobility." + side + "_m1", format(m.m1));
    };
    mob("bulk", rc.model.bulk_mobility);
    mob("surface", rc.model.surf_mobility);
    const auto& v = rc.model.velocity;
    put("velocity.bulk", v.bulk == VelocityField::Bulk::none ? "none" : "rotation");
    put("velocity.surface", v.surface == VelocityField::Surface::none ? "none" : "rotation");
    put("velocity.omega", format(v.omega));
    put("velocity.speed", format(v.speed));
    put("velocity.ramp", format(v.ramp));
    put("time.tau", format(rc.time.tau));
    put("time.T", format(rc.time.T));
    put("time.adaptive", rc.time.adaptive ? "true" : "false");
    put("yosida.eps", format(rc.model.eps));
    if (!rc.eps_schedule.empty()) {
      std::string s;
      for (std::size_t i = 0; i < rc.eps_schedule.size(); ++i) s += (i ? ", " : "") + format(rc.eps_schedule[i]);
      put("yosida.schedule", s);
    }
    put("newton.tol_abs", format(rc.newton.tol_abs));
    put("newton.tol_rel", format(rc.newton.tol_rel));
    put("newton.max_iter", std::to_string(rc.newton.max_iter));
    put("newton.damping_floor", format(rc.newton.damping_floor));
    const auto& in = rc.init;
    put("init.mode", in.mode == InitialDataSpec::Mode::constant            ? "constant"
                     : in.mode == InitialDataSpec::Mode::random_perturbation ? "random"
                                                                              : "two_bubbles");
    put("init.m", format(in.m));
    put("init.amplitude", format(in.amplitude));
    put("init.seed", std::to_string(in.seed));
    put("init.radius", format(in.radius));
    put("init.separation", format(in.separation));
    put("init.width", format(in.width));
    put("init.delta0", format(in.delta0));
    if (!rc.output.dir.empty()) put("output.dir", rc.output.dir);
    put("output.every", std::to_string(rc.output.every));
    put("output.vtk", rc.output.vtk ? "true" : "false");
    return c;
  }

  /// Shortest round-trip decimal (17 significant digits at most); "inf" for +infinity.
  static std::string format(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
  }

 private:
  Map values_;
  std::map<std::string, int> lines_;

  static bool is_known(const std::string& key) {
    for (const auto& k : known_keys()) {
      if (k == key) return true;
    }
    return false;
  }

  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
  }

  [[noreturn]] void fail(const std::string& key, const std::string& why) const {
    const auto it = lines_.find(key);
    const std::string where = it != lines_.end() ? " (line " + std::to_string(it->second) + ")" : "";
    throw InvalidArgument("config key '" + key + "'" + where + ": " + why);
  }

  template <class F>
  auto wrap(const std::string& key, F&& f) const -> decltype(f()) {
    try {
      return f();
    } catch (const InvalidArgument& e) {
      fail(key, e.what());
    }
  }

  std::string get_string(const std::string& key, const std::string& def) const {
    const auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }

  double get_double(const std::string& key, double def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(it->second, &pos);
    } catch (const std::exception&) {
      fail(key, "not a number: '" + it->second + "'");
    }
    if (pos != it->second.size()) fail(key, "not a number: '" + it->second + "'");
    if (!std::isfinite(v)) fail(key, "must be finite");
    return v;
  }

  /// Nonnegative value or "inf".
  double get_extended(const std::string& key, double def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    if (it->second == "inf" || it->second == "Inf" || it->second == "infinity") return kInf;
    const double v = get_double(key, def);
    if (v < 0.0) fail(key, "must be nonnegative or inf");
    return v;
  }

  long long get_int(const std::string& key, long long def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(it->second, &pos);
    } catch (const std::exception&) {
      fail(key, "not an integer: '" + it->second + "'");
    }
    if (pos != it->second.size()) fail(key, "not an integer: '" + it->second + "'");
    return v;
  }

  bool get_bool(const std::string& key, bool def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
    if (it->second == "false" || it->second == "0" || it->second == "no") return false;
    fail(key, "expected true or false");
  }

  std::vector<double> get_list(const std::string& key) const {
    std::vector<double> out;
    const auto it = values_.find(key);
    if (it == values_.end()) return out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const std::string t = trim(item);
      if (t.empty()) fail(key, "empty list entry");
      std::size_t pos = 0;
      double v = 0.0;
      try {
        v = std::stod(t, &pos);
      } catch (const std::exception&) {
        fail(key, "not a number: '" + t + "'");
      }
      if (pos != t.size()) fail(key, "not a number: '" + t + "'");
      out.push_back(v);
    }
    return out;
  }

  Mobility mobility(const std::string& side) const {
    const std::string kind = get_string("mobility." + side, "constant");
    const double m0 = get_double("mobility." + side + "_m0", 1.0);
    const double m1 = get_double("mobility." + side + "_m1", 0.0);
    return wrap("mobility." + side, [&] {
      if (kind == "constant") return Mobility::constant(m0);
      if (kind == "degenerate" || kind == "degenerate_capped") return Mobility::degenerate_capped(m0, m1);
      throw InvalidArgument("expected constant or degenerate");
    });
  }
};

}  // namespace bscch
