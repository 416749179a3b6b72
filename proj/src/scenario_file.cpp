#include "miqp_mpc/scenario_file.hpp"

#include "miqp_mpc/error.hpp"
#include "miqp_mpc/text.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace miqp_mpc {

namespace {

LyapunovConfig obj_defaults() {
  LyapunovConfig c;
  c.kind = LyapunovKind::Obj;
  c.theta = 1.0;
  c.sigma = 1e-5;
  c.c0 = 100.0;
  c.c1 = 1000.0;
  return c;
}

LyapunovConfig feas_defaults() {
  LyapunovConfig c;
  c.kind = LyapunovKind::Feas;
  return c;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

/// Thrown by value parsers; the caller adds source and line.
struct BadValue {
  std::string message;
};

template <class T>
T number(const std::string& s) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || p != end) throw BadValue{"expected a number, got '" + s + "'"};
  return v;
}

double finite(const std::string& s) {
  const double v = number<double>(s);
  if (!std::isfinite(v)) throw BadValue{"expected a finite number, got '" + s + "'"};
  return v;
}

bool boolean(const std::string& s) {
  if (s == "true") return true;
  if (s == "false") return false;
  throw BadValue{"expected true or false, got '" + s + "'"};
}

template <class E>
E choice(const std::string& s, std::initializer_list<std::pair<const char*, E>> options) {
  std::string names;
  for (const auto& [name, value] : options) {
    if (s == name) return value;
    names += names.empty() ? name : std::string(", ") + name;
  }
  throw BadValue{"expected one of " + names + ", got '" + s + "'"};
}

Example parse_example(const std::string& s) {
  return choice<Example>(s, {{"switching_thrusters", Example::SwitchingThrusters}, {"min_thrust", Example::MinThrust}});
}
LimitMode parse_mode(const std::string& s) {
  return choice<LimitMode>(s, {{"fixed", LimitMode::FixedLimits}, {"uniting", LimitMode::Uniting}});
}
PruneRule parse_rule(const std::string& s) {
  return choice<PruneRule>(s, {{"depth_first", PruneRule::DepthFirst}, {"best_first", PruneRule::BestFirst}});
}
LyapunovKind parse_kind(const std::string& s) {
  return choice<LyapunovKind>(s, {{"obj", LyapunovKind::Obj}, {"feas", LyapunovKind::Feas}});
}
LimitedAxis parse_axis(const std::string& s) {
  return choice<LimitedAxis>(s, {{"bnb", LimitedAxis::BranchAndBound}, {"qp", LimitedAxis::QuadraticProgramming}});
}

const char* rule_name(PruneRule r) { return r == PruneRule::DepthFirst ? "depth_first" : "best_first"; }

template <class T>
T positive(const std::string& s) {
  const T v = number<T>(s);
  if (v < 1) throw BadValue{"expected a positive integer, got '" + s + "'"};
  return v;
}

using Setter = std::function<void(const std::string&)>;
using Section = std::map<std::string, Setter>;

std::map<std::string, Section> schema(ScenarioFile& f, LyapunovKind& kind) {
  Scenario& s = f.scenario;
  auto monitor = [](LyapunovConfig& c) {
    return Section{
        {"theta", [&c](const std::string& v) { c.theta = finite(v); }},
        {"sigma", [&c](const std::string& v) { c.sigma = finite(v); }},
        {"c0", [&c](const std::string& v) { c.c0 = finite(v); }},
        {"c1", [&c](const std::string& v) { c.c1 = finite(v); }},
    };
  };
  return {
      {"scenario",
       {
           {"name",
            [&s](const std::string& v) {
              if (v.empty() || v.find_first_of("/\\ \t") != std::string::npos) {
                throw BadValue{"name must be non-empty without spaces or path separators"};
              }
              s.name = v;
            }},
           {"example", [&s](const std::string& v) { s.example = parse_example(v); }},
           {"x0",
            [&s](const std::string& v) {
              const auto w = words(v);
              if (w.size() != 6) throw BadValue{"needs 6 numbers, got " + std::to_string(w.size())};
              s.x0.resize(6);
              for (int i = 0; i < 6; ++i) s.x0[i] = finite(w[i]);
            }},
           {"horizon", [&s](const std::string& v) { s.horizon = positive<int>(v); }},
           {"samples", [&s](const std::string& v) { s.samples = positive<int>(v); }},
           {"mode", [&s](const std::string& v) { s.mode = parse_mode(v); }},
           {"prune_rule", [&s](const std::string& v) { s.prune_rule = parse_rule(v); }},
           {"lyapunov", [&kind](const std::string& v) { kind = parse_kind(v); }},
           {"rng_seed", [&s](const std::string& v) { s.rng_seed = number<std::uint64_t>(v); }},
       }},
      {"dynamics",
       {
           {"orbital_rate", [&s](const std::string& v) { s.dynamics.orbital_rate = finite(v); }},
           {"mass", [&s](const std::string& v) { s.dynamics.mass = finite(v); }},
           {"dt", [&s](const std::string& v) { s.dynamics.dt = finite(v); }},
       }},
      {"limits",
       {
           {"axis", [&s](const std::string& v) { s.schedule.axis = parse_axis(v); }},
           {"base_ib", [&s](const std::string& v) { s.schedule.base.i_b = positive<std::int64_t>(v); }},
           {"base_iqp", [&s](const std::string& v) { s.schedule.base.i_qp = positive<int>(v); }},
           {"low_ib", [&s](const std::string& v) { s.schedule.low.i_b = positive<std::int64_t>(v); }},
           {"low_iqp", [&s](const std::string& v) { s.schedule.low.i_qp = positive<int>(v); }},
           {"high_ib", [&s](const std::string& v) { s.schedule.high.i_b = positive<std::int64_t>(v); }},
           {"high_iqp", [&s](const std::string& v) { s.schedule.high.i_qp = positive<int>(v); }},
       }},
      {"lyapunov_obj", monitor(f.lyapunov_obj)},
      {"lyapunov_feas", monitor(f.lyapunov_feas)},
      {"switching_thrusters",
       {
           {"alpha_v1", [&s](const std::string& v) { s.switching.alpha_v1 = finite(v); }},
           {"alpha_v2", [&s](const std::string& v) { s.switching.alpha_v2 = finite(v); }},
           {"alpha_state", [&s](const std::string& v) { s.switching.alpha_state = finite(v); }},
           {"big_m", [&s](const std::string& v) { s.switching.big_m = finite(v); }},
           {"position_bound", [&s](const std::string& v) { s.switching.position_bound = finite(v); }},
           {"velocity_bound", [&s](const std::string& v) { s.switching.velocity_bound = finite(v); }},
           {"control_bound", [&s](const std::string& v) { s.switching.control_bound = finite(v); }},
           {"per_axis_gating", [&s](const std::string& v) { s.switching.per_axis_gating = boolean(v); }},
       }},
      {"min_thrust",
       {
           {"state_weight", [&s](const std::string& v) { s.min_thrust.state_weight = finite(v); }},
           {"control_weight", [&s](const std::string& v) { s.min_thrust.control_weight = finite(v); }},
           {"v_min", [&s](const std::string& v) { s.min_thrust.v_min = finite(v); }},
           {"v_max", [&s](const std::string& v) { s.min_thrust.v_max = finite(v); }},
           {"terminal_position", [&s](const std::string& v) { s.min_thrust.terminal_position = finite(v); }},
           {"terminal_velocity", [&s](const std::string& v) { s.min_thrust.terminal_velocity = finite(v); }},
       }},
      {"solver",
       {
           {"qp_tol_primal", [&s](const std::string& v) { s.bnb.qp_tolerances.primal = finite(v); }},
           {"qp_tol_dual", [&s](const std::string& v) { s.bnb.qp_tolerances.dual = finite(v); }},
       }},
      {"sweep",
       {
           {"i_b_low",
            [&f](const std::string& v) {
              f.sweep.i_b_low.clear();
              for (const auto& w : words(v)) f.sweep.i_b_low.push_back(positive<std::int64_t>(w));
            }},
           {"i_qp_low",
            [&f](const std::string& v) {
              f.sweep.i_qp_low.clear();
              for (const auto& w : words(v)) f.sweep.i_qp_low.push_back(positive<int>(w));
            }},
           {"lyapunov",
            [&f](const std::string& v) {
              f.sweep.lyapunov.clear();
              for (const auto& w : words(v)) f.sweep.lyapunov.push_back(parse_kind(w));
            }},
           {"fixed", [&f](const std::string& v) { f.sweep.fixed = boolean(v); }},
       }},
  };
}

[[noreturn]] void fail(const std::string& source, int line, const std::string& message) {
  throw Error(ErrorCode::ParseError,
              source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + message);
}

template <class F>
void check_at(const std::string& source, int line, const std::string& what, F&& f) {
  try {
    f();
  } catch (const Error& e) {
    fail(source, line, "invalid " + what + ": " + e.what());
  }
}

}  // namespace

ScenarioFile::ScenarioFile() : lyapunov_obj(obj_defaults()), lyapunov_feas(feas_defaults()) {
  scenario.lyapunov = lyapunov_feas;
}

ScenarioFile parse_scenario_file(std::istream& is, const std::string& source) {
  ScenarioFile f;
  LyapunovKind kind = LyapunovKind::Feas;
  const auto sections = schema(f, kind);

  std::map<std::string, int> section_line;
  std::set<std::string> seen;
  const Section* current = nullptr;
  std::string current_name;
  std::string line;
  int n = 0;
  while (std::getline(is, line)) {
    ++n;
    const auto comment = line.find_first_of("#;");
    const std::string text = trim(comment == std::string::npos ? line : line.substr(0, comment));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') fail(source, n, "malformed section header '" + text + "'");
      current_name = trim(text.substr(1, text.size() - 2));
      const auto it = sections.find(current_name);
      if (it == sections.end()) fail(source, n, "unknown section [" + current_name + "]");
      if (section_line.count(current_name)) fail(source, n, "duplicate section [" + current_name + "]");
      section_line[current_name] = n;
      current = &it->second;
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) fail(source, n, "expected 'key = value', got '" + text + "'");
    if (!current) fail(source, n, "key outside of any section");
    const std::string key = trim(text.substr(0, eq)), value = trim(text.substr(eq + 1));
    const auto it = current->find(key);
    if (it == current->end()) fail(source, n, "unknown key '" + key + "' in [" + current_name + "]");
    if (!seen.insert(current_name + "." + key).second) {
      fail(source, n, "duplicate key '" + key + "' in [" + current_name + "]");
    }
    try {
      it->second(value);
    } catch (const BadValue& e) {
      fail(source, n, key + ": " + e.message);
    }
  }

  auto at = [&](const std::string& section) {
    const auto it = section_line.find(section);
    return it == section_line.end() ? 0 : it->second;
  };
  Scenario& s = f.scenario;
  f.lyapunov_obj.kind = LyapunovKind::Obj;
  f.lyapunov_feas.kind = LyapunovKind::Feas;
  s.lyapunov = f.monitor(kind);

  check_at(source, at("dynamics"), "[dynamics]", [&] { s.dynamics.validate(); });
  check_at(source, at("lyapunov_obj"), "[lyapunov_obj]", [&] { f.lyapunov_obj.validate(); });
  check_at(source, at("lyapunov_feas"), "[lyapunov_feas]", [&] { f.lyapunov_feas.validate(); });
  check_at(source, at("limits"), "[limits]", [&] { s.schedule.validate(); });
  if (!(s.bnb.qp_tolerances.primal > 0.0) || !(s.bnb.qp_tolerances.dual > 0.0)) {
    fail(source, at("solver"), "invalid [solver]: tolerances must be > 0");
  }
  const bool switching = s.example == Example::SwitchingThrusters;
  check_at(source, at(switching ? "switching_thrusters" : "min_thrust"),
           switching ? "[switching_thrusters]" : "[min_thrust]", [&] {
             const MpcModel m = s.model();
             if (switching) {
               m.switching.validate();
             } else {
               m.min_thrust.validate();
             }
           });
  const auto& sched = s.schedule;
  for (auto v : f.sweep.i_b_low) {
    if (v > sched.high.i_b) fail(source, at("sweep"), "invalid [sweep]: i_b_low value exceeds high_ib");
  }
  for (auto v : f.sweep.i_qp_low) {
    if (v > sched.high.i_qp) fail(source, at("sweep"), "invalid [sweep]: i_qp_low value exceeds high_iqp");
  }
  check_at(source, 0, "scenario", [&] { s.validate(); });
  return f;
}

ScenarioFile load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, path + ": cannot open file");
  return parse_scenario_file(in, path);
}

std::string format_scenario_file(const ScenarioFile& f) {
  const Scenario& s = f.scenario;
  std::ostringstream os;
  auto d = [](double v) { return format_double(v); };
  auto b = [](bool v) { return v ? "true" : "false"; };
  os << "[scenario]\n";
  os << "name = " << s.name << '\n';
  os << "example = " << to_string(s.example) << '\n';
  os << "x0 =";
  for (Eigen::Index i = 0; i < s.x0.size(); ++i) os << ' ' << d(s.x0[i]);
  os << '\n';
  os << "horizon = " << s.horizon << '\n';
  os << "samples = " << s.samples << '\n';
  os << "mode = " << (s.mode == LimitMode::FixedLimits ? "fixed" : "uniting") << '\n';
  os << "prune_rule = " << rule_name(s.prune_rule) << '\n';
  os << "lyapunov = " << to_string(s.lyapunov.kind) << '\n';
  os << "rng_seed = " << s.rng_seed << '\n';
  os << "\n[dynamics]\n";
  os << "orbital_rate = " << d(s.dynamics.orbital_rate) << '\n';
  os << "mass = " << d(s.dynamics.mass) << '\n';
  os << "dt = " << d(s.dynamics.dt) << '\n';
  os << "\n[limits]\n";
  os << "axis = " << to_string(s.schedule.axis) << '\n';
  os << "base_ib = " << s.schedule.base.i_b << "\nbase_iqp = " << s.schedule.base.i_qp << '\n';
  os << "low_ib = " << s.schedule.low.i_b << "\nlow_iqp = " << s.schedule.low.i_qp << '\n';
  os << "high_ib = " << s.schedule.high.i_b << "\nhigh_iqp = " << s.schedule.high.i_qp << '\n';
  for (const auto* c : {&f.lyapunov_obj, &f.lyapunov_feas}) {
    os << "\n[lyapunov_" << to_string(c->kind) << "]\n";
    os << "theta = " << d(c->theta) << "\nsigma = " << d(c->sigma) << '\n';
    os << "c0 = " << d(c->c0) << "\nc1 = " << d(c->c1) << '\n';
  }
  const auto& st = s.switching;
  os << "\n[switching_thrusters]\n";
  os << "alpha_v1 = " << d(st.alpha_v1) << "\nalpha_v2 = " << d(st.alpha_v2) << '\n';
  os << "alpha_state = " << d(st.alpha_state) << "\nbig_m = " << d(st.big_m) << '\n';
  os << "position_bound = " << d(st.position_bound) << "\nvelocity_bound = " << d(st.velocity_bound) << '\n';
  os << "control_bound = " << d(st.control_bound) << "\nper_axis_gating = " << b(st.per_axis_gating) << '\n';
  const auto& mt = s.min_thrust;
  os << "\n[min_thrust]\n";
  os << "state_weight = " << d(mt.state_weight) << "\ncontrol_weight = " << d(mt.control_weight) << '\n';
  os << "v_min = " << d(mt.v_min) << "\nv_max = " << d(mt.v_max) << '\n';
  os << "terminal_position = " << d(mt.terminal_position) << "\nterminal_velocity = " << d(mt.terminal_velocity)
     << '\n';
  os << "\n[solver]\n";
  os << "qp_tol_primal = " << d(s.bnb.qp_tolerances.primal) << "\nqp_tol_dual = " << d(s.bnb.qp_tolerances.dual)
     << '\n';
  os << "\n[sweep]\n";
  os << "i_b_low =";
  for (auto v : f.sweep.i_b_low) os << ' ' << v;
  os << "\ni_qp_low =";
  for (auto v : f.sweep.i_qp_low) os << ' ' << v;
  os << "\nlyapunov =";
  for (auto k : f.sweep.lyapunov) os << ' ' << to_string(k);
  os << "\nfixed = " << b(f.sweep.fixed) << '\n';
  return os.str();
}

std::vector<SweepPoint> expand_sweep(const ScenarioFile& f) {
  const Scenario& base = f.scenario;
  const bool bnb_axis = base.schedule.axis == LimitedAxis::BranchAndBound;
  const std::string prefix = bnb_axis ? "ib" : "iqp";
  std::vector<std::int64_t> limits;
  if (bnb_axis) {
    limits = f.sweep.i_b_low;
  } else {
    limits.assign(f.sweep.i_qp_low.begin(), f.sweep.i_qp_low.end());
  }
  if (limits.empty()) limits.push_back(bnb_axis ? base.schedule.low.i_b : base.schedule.low.i_qp);
  std::vector<LyapunovKind> kinds = f.sweep.lyapunov;
  if (kinds.empty()) kinds.push_back(base.lyapunov.kind);

  auto set_axis = [bnb_axis](IterationLimits& l, std::int64_t v) {
    if (bnb_axis) {
      l.i_b = v;
    } else {
      l.i_qp = static_cast<int>(v);
    }
  };

  std::vector<SweepPoint> points;
  std::set<std::string> labels;
  auto add = [&](SweepPoint p) {
    if (labels.insert(p.label).second) points.push_back(std::move(p));
  };
  for (auto v : limits) {
    for (auto kind : kinds) {
      SweepPoint p;
      p.limit = std::to_string(v);
      p.lyapunov = to_string(kind);
      p.label = p.lyapunov + "." + prefix + p.limit;
      p.scenario = base;
      p.scenario.mode = LimitMode::Uniting;
      p.scenario.lyapunov = f.monitor(kind);
      set_axis(p.scenario.schedule.low, v);
      add(std::move(p));
    }
  }
  if (f.sweep.fixed) {
    std::vector<std::int64_t> fixed = limits;
    fixed.push_back(bnb_axis ? base.schedule.high.i_b : base.schedule.high.i_qp);
    for (auto v : fixed) {
      SweepPoint p;
      p.limit = std::to_string(v);
      p.lyapunov = "fixed";
      p.label = p.lyapunov + "." + prefix + p.limit;
      p.scenario = base;
      p.scenario.mode = LimitMode::FixedLimits;
      set_axis(p.scenario.schedule.base, v);
      add(std::move(p));
    }
  }
  return points;
}

}  // namespace miqp_mpc
