#include "commands.hpp"
#include "miqp_mpc/error.hpp"
#include "miqp_mpc/plot.hpp"
#include "miqp_mpc/scenario_file.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>

using namespace miqp_mpc;
namespace fs = std::filesystem;

namespace {

const fs::path kScenarios = MIQP_MPC_SCENARIO_DIR;

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("miqp_mpc_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return path / name;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

ScenarioFile parse(const std::string& text) {
  std::istringstream in(text);
  return parse_scenario_file(in, "test.ini");
}

std::string parse_error(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
    return e.what();
  }
  FAIL("expected a parse error");
  return {};
}

void check_same(const ScenarioFile& a, const ScenarioFile& b) {
  const Scenario &x = a.scenario, &y = b.scenario;
  CHECK(x.name == y.name);
  CHECK(x.example == y.example);
  CHECK(x.x0 == y.x0);
  CHECK(x.horizon == y.horizon);
  CHECK(x.samples == y.samples);
  CHECK(x.mode == y.mode);
  CHECK(x.schedule.axis == y.schedule.axis);
  CHECK(x.schedule.base == y.schedule.base);
  CHECK(x.schedule.low == y.schedule.low);
  CHECK(x.schedule.high == y.schedule.high);
  for (auto [l, r] : {std::pair{&x.lyapunov, &y.lyapunov}, {&a.lyapunov_obj, &b.lyapunov_obj},
                      {&a.lyapunov_feas, &b.lyapunov_feas}}) {
    CHECK(l->kind == r->kind);
    CHECK(l->theta == r->theta);
    CHECK(l->sigma == r->sigma);
    CHECK(l->c0 == r->c0);
    CHECK(l->c1 == r->c1);
  }
  CHECK(x.prune_rule == y.prune_rule);
  CHECK(x.dynamics.orbital_rate == y.dynamics.orbital_rate);
  CHECK(x.dynamics.mass == y.dynamics.mass);
  CHECK(x.dynamics.dt == y.dynamics.dt);
  CHECK(x.switching.alpha_v1 == y.switching.alpha_v1);
  CHECK(x.switching.alpha_v2 == y.switching.alpha_v2);
  CHECK(x.switching.alpha_state == y.switching.alpha_state);
  CHECK(x.switching.big_m == y.switching.big_m);
  CHECK(x.switching.position_bound == y.switching.position_bound);
  CHECK(x.switching.velocity_bound == y.switching.velocity_bound);
  CHECK(x.switching.control_bound == y.switching.control_bound);
  CHECK(x.switching.per_axis_gating == y.switching.per_axis_gating);
  CHECK(x.min_thrust.state_weight == y.min_thrust.state_weight);
  CHECK(x.min_thrust.control_weight == y.min_thrust.control_weight);
  CHECK(x.min_thrust.v_min == y.min_thrust.v_min);
  CHECK(x.min_thrust.v_max == y.min_thrust.v_max);
  CHECK(x.min_thrust.terminal_position == y.min_thrust.terminal_position);
  CHECK(x.min_thrust.terminal_velocity == y.min_thrust.terminal_velocity);
  CHECK(x.bnb.qp_tolerances.primal == y.bnb.qp_tolerances.primal);
  CHECK(x.bnb.qp_tolerances.dual == y.bnb.qp_tolerances.dual);
  CHECK(x.rng_seed == y.rng_seed);
  CHECK(a.sweep == b.sweep);
}

const char* kToy = R"(
[scenario]
name = toy
example = min_thrust
x0 = 10 0 0 0 -0.05 0
horizon = 5
samples = 12
mode = uniting
prune_rule = depth_first

[limits]
axis = bnb
base_ib = 16
base_iqp = 5000
low_ib = 2
low_iqp = 5000
high_ib = 16
high_iqp = 5000

[min_thrust]
v_max = 0.02
)";

/// y coordinates of every polyline point in an SVG.
std::vector<std::vector<double>> polyline_ys(const std::string& svg) {
  std::vector<std::vector<double>> out;
  const std::regex line(R"re(<polyline[^>]*points="([^"]*)")re");
  for (std::sregex_iterator it(svg.begin(), svg.end(), line), end; it != end; ++it) {
    std::vector<double> ys;
    std::istringstream pts((*it)[1].str());
    for (std::string p; pts >> p;) ys.push_back(std::stod(p.substr(p.find(',') + 1)));
    out.push_back(ys);
  }
  return out;
}

}  // namespace

TEST_CASE("bundled scenarios survive a parse-print round trip") {
  int files = 0;
  for (const auto& entry : fs::directory_iterator(kScenarios)) {
    if (entry.path().extension() != ".ini") continue;
    ++files;
    INFO(entry.path().string());
    const ScenarioFile f = load_scenario_file(entry.path().string());
    check_same(parse(format_scenario_file(f)), f);
    CHECK(format_scenario_file(parse(format_scenario_file(f))) == format_scenario_file(f));
  }
  CHECK(files >= 6);

  const ScenarioFile defaults = parse("");
  check_same(parse(format_scenario_file(defaults)), defaults);
}

TEST_CASE("default monitor constants") {
  const ScenarioFile f = parse("");
  CHECK(f.lyapunov_obj.theta == 1.0);
  CHECK(f.lyapunov_obj.c0 == 100.0);
  CHECK(f.lyapunov_obj.c1 == 1000.0);
  CHECK(f.lyapunov_feas.theta == 1e-3);
  CHECK(f.lyapunov_feas.c0 == 200.0);
  CHECK(f.lyapunov_feas.c1 == 300.0);
  CHECK(parse("[scenario]\nlyapunov = obj\n").scenario.lyapunov.c1 == 1000.0);
}

TEST_CASE("scenario files reject bad input with line numbers") {
  CHECK(parse_error("[scenario]\nsamples = 3\nfoo = 1\n").find("test.ini:3: unknown key 'foo'") != std::string::npos);
  CHECK(parse_error("\n[nope]\n").find("test.ini:2: unknown section [nope]") != std::string::npos);
  CHECK(parse_error("[scenario]\nsamples = 3\nsamples = 4\n").find("test.ini:3: duplicate key") != std::string::npos);
  CHECK(parse_error("[scenario]\nhorizon = five\n").find("test.ini:2: horizon") != std::string::npos);
  CHECK(parse_error("[scenario]\nx0 = 1 2 3\n").find("test.ini:2: x0: needs 6 numbers") != std::string::npos);
  CHECK(parse_error("samples = 1\n").find("test.ini:1: key outside of any section") != std::string::npos);
  CHECK(parse_error("[scenario]\nmode = sometimes\n").find("fixed, uniting") != std::string::npos);

  const std::string c = parse_error("[scenario]\nsamples = 3\n\n[lyapunov_feas]\nc0 = 400\nc1 = 300\n");
  CHECK(c.find("test.ini:4:") != std::string::npos);
  CHECK(c.find("c_{p,0} < c_{p,1}") != std::string::npos);

  CHECK(parse_error("[limits]\nlow_ib = 30\n").find("test.ini:1: invalid [limits]") != std::string::npos);
  CHECK(parse_error("[sweep]\ni_b_low = 2 50\n").find("i_b_low value exceeds high_ib") != std::string::npos);
  CHECK(parse_error("[min_thrust]\nv_min = 1\nv_max = 0.5\n").find("invalid [min_thrust]") != std::string::npos);
}

TEST_CASE("sweep expansion") {
  ScenarioFile f = load_scenario_file((kScenarios / "switching_thrusters_bnb.ini").string());
  f.sweep.lyapunov = {LyapunovKind::Feas};
  f.sweep.fixed = false;
  auto points = expand_sweep(f);
  REQUIRE(points.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(points[i].scenario.mode == LimitMode::Uniting);
    CHECK(points[i].scenario.schedule.low.i_b == f.sweep.i_b_low[i]);
    CHECK(points[i].lyapunov == "feas");
  }

  f.sweep.lyapunov = {LyapunovKind::Obj, LyapunovKind::Feas};
  f.sweep.fixed = true;
  points = expand_sweep(f);
  CHECK(points.size() == 4 * 2 + 4);
  CHECK(points[0].scenario.lyapunov.c1 == 1000.0);
  CHECK(points[1].scenario.lyapunov.c1 == 300.0);
  CHECK(points.back().label == "fixed.ib20");
  CHECK(points.back().scenario.mode == LimitMode::FixedLimits);
  CHECK(points.back().scenario.schedule.base.i_b == 20);

  ScenarioFile q = load_scenario_file((kScenarios / "switching_thrusters_qp.ini").string());
  q.sweep.lyapunov = {LyapunovKind::Feas};
  q.sweep.fixed = false;
  points = expand_sweep(q);
  REQUIRE(points.size() == 6);
  CHECK(points[0].scenario.schedule.low.i_qp == 1);
  CHECK(points[0].label == "feas.iqp1");
}

TEST_CASE("nice axis covers the data") {
  for (auto [lo, hi] : {std::pair{0.0, 0.0}, {-3.2, 17.9}, {1e-9, 3e-7}, {6800.0, 6800.0}, {-5.0, -4.0}}) {
    const Axis a = nice_axis(lo, hi);
    CHECK(a.lo <= lo);
    CHECK(a.hi >= hi);
    CHECK(a.step > 0.0);
    CHECK(a.hi > a.lo);
    const double ticks = (a.hi - a.lo) / a.step;
    CHECK(std::abs(ticks - std::round(ticks)) < 1e-9);
    CHECK(ticks <= 11.0);
  }
}

TEST_CASE("plots") {
  SimTrace zero;
  zero.name = "zero";
  for (int k = 0; k < 5; ++k) {
    SimRow r;
    r.k = k;
    zero.rows.push_back(r);
  }
  const std::string z = error_svg({zero}, {"zero"});
  const auto ys = polyline_ys(z);
  REQUIRE(ys.size() == 1);
  REQUIRE(ys[0].size() == 5);
  for (double y : ys[0]) CHECK(y == ys[0][0]);
  CHECK(z.find(">0</text>") != std::string::npos);

  SimTrace moving = zero;
  moving.name = "moving";
  for (auto& r : moving.rows) r.x[0] = 3.0 * r.k;
  const std::string two = error_svg({zero, moving}, {"zero", "moving"});
  CHECK(polyline_ys(two).size() == 2);
  CHECK(two.find(">zero</text>") != std::string::npos);
  CHECK(two.find(">moving</text>") != std::string::npos);
  CHECK(two == error_svg({zero, moving}, {"zero", "moving"}));
  CHECK(position_plane_svg({zero, moving}, {"a", "b"}).find("<polyline") != std::string::npos);
}

TEST_CASE("run command") {
  TempDir dir("run");
  std::ostringstream out, err;
  const auto ok = dir.write("toy.ini", kToy);
  REQUIRE(cli::cmd_run(ok.string(), {dir.path.string(), {}}, out, err) == cli::kExitOk);
  std::ifstream trace(dir.path / "toy.trace.csv");
  const SimTrace t = read_trace_csv(trace);
  CHECK(t.rows.size() == 12);

  const auto bad = dir.write("bad.ini", std::string(kToy) + "\n[lyapunov_feas]\nc0 = 300\nc1 = 200\n");
  std::ostringstream err2;
  CHECK(cli::cmd_run(bad.string(), {dir.path.string(), {}}, out, err2) == cli::kExitInput);
  CHECK(err2.str().find("c_{p,0} < c_{p,1}") != std::string::npos);

  CHECK(cli::cmd_run((dir.path / "missing.ini").string(), {dir.path.string(), {}}, out, err) == cli::kExitInput);

  std::string text = kToy;
  text.replace(text.find("v_max = 0.02"), 12, "v_max = 1.5e-4");
  text.replace(text.find("horizon = 5"), 11, "horizon = 2");
  const auto infeasible = dir.write("infeasible.ini", text);
  std::ostringstream err3;
  CHECK(cli::cmd_run(infeasible.string(), {dir.path.string(), {}}, out, err3) == cli::kExitInfeasible);
}

TEST_CASE("run exits 3 on an unstable loop") {
  TempDir dir("unstable");
  std::ostringstream out, err;
  const auto path = dir.write("drift.ini", R"(
[scenario]
name = drift
example = min_thrust
x0 = 10 0 0 0 0 0
horizon = 3
samples = 80
[min_thrust]
state_weight = 0
terminal_position = 1e7
terminal_velocity = 1e7
)");
  CHECK(cli::cmd_run(path.string(), {dir.path.string(), {}}, out, err) == cli::kExitUnstable);
  CHECK(fs::exists(dir.path / "drift.trace.csv"));
}

TEST_CASE("sweep command") {
  TempDir dir("sweep");
  std::ostringstream out, err;

  SUBCASE("one point equals run") {
    const auto path = dir.write("one.ini", std::string(kToy) + "\n[sweep]\ni_b_low = 2\nfixed = false\n");
    REQUIRE(cli::cmd_sweep(path.string(), {dir.path.string(), {}}, 2, out, err) == cli::kExitOk);
    REQUIRE(cli::cmd_run(path.string(), {dir.path.string(), {}}, out, err) == cli::kExitOk);
    CHECK(slurp(dir.path / "toy.feas.ib2.trace.csv") == slurp(dir.path / "toy.trace.csv"));
    const std::string summary = slurp(dir.path / "toy.sweep.csv");
    CHECK(summary.rfind(std::string(kSweepHeader) + "\n2,feas,", 0) == 0);
    CHECK(std::count(summary.begin(), summary.end(), '\n') == 2);
  }

  SUBCASE("uniting never averages above fixed-high") {
    const auto path = dir.write("many.ini", std::string(kToy) + "\n[sweep]\ni_b_low = 2 4 8\nlyapunov = obj feas\n");
    REQUIRE(cli::cmd_sweep(path.string(), {dir.path.string(), {}}, 3, out, err) == cli::kExitOk);
    std::ifstream in(dir.path / "toy.sweep.csv");
    std::string line;
    std::getline(in, line);
    CHECK(line == kSweepHeader);
    std::vector<std::pair<std::string, double>> rows;
    double fixed_high = -1.0;
    while (std::getline(in, line)) {
      std::istringstream fields(line);
      std::string limit, kind, avg;
      std::getline(fields, limit, ',');
      std::getline(fields, kind, ',');
      std::getline(fields, avg, ',');
      if (kind == "fixed" && limit == "16") fixed_high = std::stod(avg);
      if (kind != "fixed") rows.emplace_back(kind, std::stod(avg));
    }
    CHECK(rows.size() == 6);
    REQUIRE(fixed_high > 0.0);
    for (const auto& [kind, avg] : rows) CHECK(avg <= fixed_high);
  }

  SUBCASE("parallel and serial sweeps write identical files") {
    const auto path = dir.write("par.ini", std::string(kToy) + "\n[sweep]\ni_b_low = 2 4\n");
    const fs::path a = dir.path / "a", b = dir.path / "b";
    REQUIRE(cli::cmd_sweep(path.string(), {a.string(), {}}, 1, out, err) == cli::kExitOk);
    REQUIRE(cli::cmd_sweep(path.string(), {b.string(), {}}, 4, out, err) == cli::kExitOk);
    int files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
      ++files;
      CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
    }
    CHECK(files == 1 + 2 + 3);
  }
}

TEST_CASE("plot command") {
  TempDir dir("plot");
  std::ostringstream out, err;
  const auto path = dir.write("toy.ini", kToy);
  REQUIRE(cli::cmd_run(path.string(), {dir.path.string(), {}}, out, err) == cli::kExitOk);
  const std::string trace = (dir.path / "toy.trace.csv").string();
  REQUIRE(cli::cmd_plot({trace, trace}, trace, {(dir.path / "p1").string(), {}}, out, err) == cli::kExitOk);
  REQUIRE(cli::cmd_plot({trace, trace}, trace, {(dir.path / "p2").string(), {}}, out, err) == cli::kExitOk);
  for (const char* f : {"position.svg", "error.svg"}) {
    const std::string a = slurp(dir.path / "p1" / f);
    CHECK(a.rfind("<svg", 0) == 0);
    CHECK(a == slurp(dir.path / "p2" / f));
  }
  CHECK(cli::cmd_plot({(dir.path / "none.csv").string()}, std::nullopt, {dir.path.string(), {}}, out, err) ==
        cli::kExitInput);
}

TEST_CASE("tree command") {
  TempDir dir("tree");
  std::ostringstream out, err;
  const auto path = dir.write("toy.ini", kToy);
  REQUIRE(cli::cmd_tree(path.string(), 0, {dir.path.string(), {}}, out, err) == cli::kExitOk);

  const ScenarioFile f = load_scenario_file(path.string());
  const MpcModel m = f.scenario.model();
  const IterationLimits lim = f.scenario.schedule.limits(1);
  const MiqpResult r =
      solve_miqp(m.build(f.scenario.x0), lim.i_b, lim.i_qp, f.scenario.prune_rule, std::nullopt, f.scenario.bnb);
  CHECK(slurp(dir.path / "toy.k0.tree.txt") == format_tree_log(r.tree_log));

  REQUIRE(cli::cmd_tree(path.string(), 3, {dir.path.string(), {}}, out, err) == cli::kExitOk);
  CHECK(fs::exists(dir.path / "toy.k3.tree.txt"));

  CHECK(cli::cmd_tree(path.string(), 12, {dir.path.string(), {}}, out, err) == cli::kExitInput);
  CHECK(cli::cmd_tree(path.string(), -1, {dir.path.string(), {}}, out, err) == cli::kExitInput);
}

TEST_CASE("seed override and thread cap") {
  TempDir dir("seed");
  std::ostringstream out, err;
  const auto path = dir.write("toy.ini", kToy);
  REQUIRE(cli::cmd_run(path.string(), {dir.path.string(), 42}, out, err) == cli::kExitOk);
  CHECK(slurp(dir.path / "toy.trace.csv").find("# name=toy") != std::string::npos);

  setenv("MIQP_MPC_THREADS", "3", 1);
  CHECK(cli::sweep_threads() == 3);
  setenv("MIQP_MPC_THREADS", "zero", 1);
  CHECK(cli::sweep_threads() >= 1);
  unsetenv("MIQP_MPC_THREADS");
}
