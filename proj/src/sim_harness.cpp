#include "miqp_mpc/sim_harness.hpp"

#include "miqp_mpc/error.hpp"
#include "miqp_mpc/text.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace miqp_mpc {

using Eigen::VectorXd;
using Vector6d = Eigen::Matrix<double, 6, 1>;

void Scenario::validate() const {
  if (samples < 1) throw Error(ErrorCode::InvalidArgument, "samples must be >= 1");
  if (x0.size() != 6) throw Error(ErrorCode::DimensionMismatch, "x0 must have 6 entries");
  if (!x0.allFinite()) throw Error(ErrorCode::InvalidArgument, "x0 must be finite");
  dynamics.validate();
  schedule.validate();
  lyapunov.validate();
  const MpcModel m = model();
  if (example == Example::SwitchingThrusters) {
    m.switching.validate();
  } else {
    m.min_thrust.validate();
  }
}

MpcModel Scenario::model() const {
  MpcModel m;
  m.example = example;
  m.plant = make_plant(dynamics);
  m.switching = switching;
  m.switching.horizon = horizon;
  m.min_thrust = min_thrust;
  m.min_thrust.horizon = horizon;
  return m;
}

const char* to_string(RunOutcome outcome) {
  switch (outcome) {
    case RunOutcome::Completed: return "completed";
    case RunOutcome::Unstable: return "unstable";
    case RunOutcome::ControllerInfeasible: return "controller_infeasible";
  }
  return "unknown";
}

int SimTrace::switch_count() const {
  int n = 0;
  for (const auto& r : rows) n += r.switched ? 1 : 0;
  return n;
}

SimTrace run_closed_loop(const Scenario& scenario, const SampleCallback& on_sample) {
  scenario.validate();
  UnitingController ctl(scenario.model(), scenario.schedule, scenario.lyapunov, scenario.prune_rule, scenario.mode,
                        scenario.bnb);
  const Plant& plant = ctl.model().plant;

  SimTrace trace;
  trace.name = scenario.name;
  Vector6d x = scenario.x0;
  const double guard = 100.0 * x.norm();
  for (int k = 0; k < scenario.samples; ++k) {
    ControlStep st;
    try {
      st = ctl.step(x);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ControllerInfeasible) throw;
      trace.outcome = RunOutcome::ControllerInfeasible;
      break;
    }

    SimRow row;
    row.k = k;
    row.x = x;
    if (scenario.example == Example::SwitchingThrusters) {
      row.u = st.u;
    } else {
      row.u.tail<3>() = st.u;
    }
    row.q = st.q;
    row.V = st.V;
    row.psi = st.result.psi;
    row.viol_inf = st.result.violation;
    row.ib_used = st.result.bnb_iterations_used;
    row.iqp_total = st.result.qp_iterations_total;
    row.status = st.result.status;
    row.switched = st.switched;
    trace.rows.push_back(row);
    if (on_sample) on_sample(row, st);

    x = plant.A * x + plant.B1 * row.u.head<3>() + plant.B2 * row.u.tail<3>();
    if (!x.allFinite() || (guard > 0.0 && x.norm() > guard)) {
      trace.outcome = RunOutcome::Unstable;
      break;
    }
  }
  trace.x_end = x;
  return trace;
}

Scenario oracle_scenario(const Scenario& scenario) {
  Scenario s = scenario;
  const auto binaries = s.model().build(s.x0).num_binaries();
  s.mode = LimitMode::FixedLimits;
  s.prune_rule = PruneRule::BestFirst;
  s.schedule.base.i_b = binaries + 1 >= 63 ? std::numeric_limits<std::int64_t>::max()
                                            : std::int64_t{1} << (binaries + 1);
  s.schedule.base.i_qp = 5000;
  return s;
}

SimTrace oracle_trajectory(const Scenario& scenario, const SampleCallback& on_sample) {
  return run_closed_loop(oracle_scenario(scenario), on_sample);
}

std::vector<double> tracking_error(const SimTrace& trace, const SimTrace& reference) {
  if (trace.rows.size() != reference.rows.size()) {
    throw Error(ErrorCode::LengthMismatch, "traces have " + std::to_string(trace.rows.size()) + " and " +
                                               std::to_string(reference.rows.size()) + " rows");
  }
  std::vector<double> e;
  e.reserve(trace.rows.size());
  for (std::size_t i = 0; i < trace.rows.size(); ++i) e.push_back((trace.rows[i].x - reference.rows[i].x).norm());
  return e;
}

double average_iterations(const SimTrace& trace, LimitedAxis axis, int window) {
  if (window < 1 || trace.rows.empty()) throw Error(ErrorCode::EmptyWindow, "no samples in the averaging window");
  const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(window), trace.rows.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = trace.rows[i];
    sum += axis == LimitedAxis::BranchAndBound
               ? static_cast<double>(r.ib_used)
               : static_cast<double>(r.iqp_total) / static_cast<double>(std::max<std::int64_t>(r.ib_used, 1));
  }
  return sum / static_cast<double>(n);
}

void write_trace_csv(std::ostream& os, const SimTrace& trace) {
  os << kTraceHeader << '\n';
  for (const auto& r : trace.rows) {
    os << r.k;
    for (int i = 0; i < 6; ++i) os << ',' << format_double(r.x[i]);
    for (int i = 0; i < 6; ++i) os << ',' << format_double(r.u[i]);
    os << ',' << r.q << ',' << format_double(r.V) << ',' << format_double(r.psi) << ','
       << format_double(r.viol_inf) << ',' << r.ib_used << ',' << r.iqp_total << ',' << to_string(r.status) << ','
       << (r.switched ? 1 : 0) << '\n';
  }
  os << "# name=" << trace.name << '\n';
  os << "# outcome=" << to_string(trace.outcome) << '\n';
  os << "# samples=" << trace.rows.size() << '\n';
  os << "# x_end=";
  for (int i = 0; i < 6; ++i) os << (i ? " " : "") << format_double(trace.x_end[i]);
  os << '\n';
  os << "# final_error_l2=" << format_double(trace.final_error_l2()) << '\n';
  os << "# switch_count=" << trace.switch_count() << '\n';
  if (!trace.rows.empty()) {
    os << "# avg_ib=" << format_double(average_iterations(trace, LimitedAxis::BranchAndBound)) << '\n';
    os << "# avg_iqp=" << format_double(average_iterations(trace, LimitedAxis::QuadraticProgramming)) << '\n';
  }
}

namespace {

[[noreturn]] void parse_fail(int line, const std::string& what) {
  throw Error(ErrorCode::ParseError, "trace line " + std::to_string(line) + ": " + what);
}

template <class T>
T parse_number(const std::string& s, int line) {
  T v{};
  const auto* end = s.data() + s.size();
  const auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || p != end) parse_fail(line, "bad number '" + s + "'");
  return v;
}

MiqpStatus parse_status(const std::string& s, int line) {
  for (auto st : {MiqpStatus::IntegralOptimal, MiqpStatus::IntegralFeasible, MiqpStatus::RelaxedOnly,
                  MiqpStatus::Infeasible}) {
    if (s == to_string(st)) return st;
  }
  parse_fail(line, "unknown status '" + s + "'");
}

RunOutcome parse_outcome(const std::string& s, int line) {
  for (auto o : {RunOutcome::Completed, RunOutcome::Unstable, RunOutcome::ControllerInfeasible}) {
    if (s == to_string(o)) return o;
  }
  parse_fail(line, "unknown outcome '" + s + "'");
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(s);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

SimTrace read_trace_csv(std::istream& is) {
  SimTrace trace;
  std::string line;
  int n = 0;
  if (!std::getline(is, line) || line != kTraceHeader) parse_fail(1, "header does not match the trace schema");
  n = 1;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) parse_fail(n, "summary line without '='");
      const std::string key = line.substr(2, eq - 2), value = line.substr(eq + 1);
      if (key == "name") {
        trace.name = value;
      } else if (key == "outcome") {
        trace.outcome = parse_outcome(value, n);
      } else if (key == "x_end") {
        const auto f = split(value, ' ');
        if (f.size() != 6) parse_fail(n, "x_end needs 6 values");
        for (int i = 0; i < 6; ++i) trace.x_end[i] = parse_number<double>(f[i], n);
      }
      continue;
    }
    const auto f = split(line, ',');
    if (f.size() != 21) parse_fail(n, "expected 21 fields, got " + std::to_string(f.size()));
    SimRow r;
    r.k = parse_number<int>(f[0], n);
    for (int i = 0; i < 6; ++i) r.x[i] = parse_number<double>(f[1 + i], n);
    for (int i = 0; i < 6; ++i) r.u[i] = parse_number<double>(f[7 + i], n);
    r.q = parse_number<int>(f[13], n);
    r.V = parse_number<double>(f[14], n);
    r.psi = parse_number<double>(f[15], n);
    r.viol_inf = parse_number<double>(f[16], n);
    r.ib_used = parse_number<std::int64_t>(f[17], n);
    r.iqp_total = parse_number<std::int64_t>(f[18], n);
    r.status = parse_status(f[19], n);
    r.switched = parse_number<int>(f[20], n) != 0;
    trace.rows.push_back(r);
  }
  return trace;
}

}  // namespace miqp_mpc
