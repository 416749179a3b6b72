#include "commands.hpp"

#include "miqp_mpc/error.hpp"
#include "miqp_mpc/plot.hpp"
#include "miqp_mpc/scenario_file.hpp"
#include "miqp_mpc/text.hpp"

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <thread>

namespace miqp_mpc::cli {

namespace fs = std::filesystem;

namespace {

ScenarioFile load(const std::string& path, const CommonOptions& opts) {
  ScenarioFile f = load_scenario_file(path);
  if (opts.seed) f.scenario.rng_seed = *opts.seed;
  return f;
}

fs::path out_path(const CommonOptions& opts, const std::string& file) {
  fs::create_directories(opts.out_dir);
  return fs::path(opts.out_dir) / file;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  os << content;
  if (!os) throw Error(ErrorCode::InvalidArgument, "cannot write " + path.string());
}

std::string trace_text(const SimTrace& t) {
  std::ostringstream os;
  write_trace_csv(os, t);
  return os.str();
}

int exit_code(RunOutcome outcome) {
  switch (outcome) {
    case RunOutcome::Completed: return kExitOk;
    case RunOutcome::ControllerInfeasible: return kExitInfeasible;
    case RunOutcome::Unstable: return kExitUnstable;
  }
  return kExitInput;
}

/// Runs f and maps library and filesystem errors to exit 1 with a message.
template <class F>
int guarded(std::ostream& err, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitInput;
}

}  // namespace

int sweep_threads() {
  if (const char* env = std::getenv("MIQP_MPC_THREADS")) {
    int n = 0;
    const std::string s(env);
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), n);
    if (ec == std::errc() && p == s.data() + s.size() && n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

int cmd_run(const std::string& scenario_path, const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ScenarioFile f = load(scenario_path, opts);
    const SimTrace t = run_closed_loop(f.scenario);
    const fs::path path = out_path(opts, f.scenario.name + ".trace.csv");
    write_file(path, trace_text(t));
    out << path.string() << ": " << t.rows.size() << " samples, " << to_string(t.outcome)
        << ", final_error=" << format_double(t.final_error_l2()) << '\n';
    if (t.outcome != RunOutcome::Completed) err << "run ended early: " << to_string(t.outcome) << '\n';
    return exit_code(t.outcome);
  });
}

int cmd_sweep(const std::string& scenario_path, const CommonOptions& opts, int threads, std::ostream& out,
              std::ostream& err) {
  return guarded(err, [&] {
    const ScenarioFile f = load(scenario_path, opts);
    const std::vector<SweepPoint> points = expand_sweep(f);
    std::vector<SimTrace> traces(points.size());
    std::vector<std::exception_ptr> failures(points.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < points.size(); i = next++) {
        try {
          traces[i] = run_closed_loop(points[i].scenario);
        } catch (...) {
          failures[i] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    const std::size_t n = std::min<std::size_t>(std::max(threads, 1), points.size());
    for (std::size_t i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (const auto& e : failures) {
      if (e) std::rethrow_exception(e);
    }

    std::ostringstream summary;
    summary << kSweepHeader << '\n';
    for (std::size_t i = 0; i < points.size(); ++i) {
      const SimTrace& t = traces[i];
      const fs::path path = out_path(opts, f.scenario.name + "." + points[i].label + ".trace.csv");
      write_file(path, trace_text(t));
      const bool any = !t.rows.empty();
      summary << points[i].limit << ',' << points[i].lyapunov << ','
              << (any ? format_double(average_iterations(t, LimitedAxis::BranchAndBound)) : "nan") << ','
              << (any ? format_double(average_iterations(t, LimitedAxis::QuadraticProgramming)) : "nan") << ','
              << format_double(t.final_error_l2()) << ',' << t.switch_count() << '\n';
      out << path.string() << ": " << to_string(t.outcome) << '\n';
    }
    const fs::path path = out_path(opts, f.scenario.name + ".sweep.csv");
    write_file(path, summary.str());
    out << path.string() << ": " << points.size() << " rows\n";
    return kExitOk;
  });
}

int cmd_plot(const std::vector<std::string>& trace_paths, const std::optional<std::string>& reference,
             const CommonOptions& opts, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (trace_paths.empty()) throw Error(ErrorCode::InvalidArgument, "plot needs at least one trace");
    auto read = [](const std::string& p) {
      std::ifstream in(p);
      if (!in) throw Error(ErrorCode::ParseError, p + ": cannot open file");
      try {
        return read_trace_csv(in);
      } catch (const Error& e) {
        throw Error(ErrorCode::ParseError, p + ": " + e.what());
      }
    };
    std::vector<SimTrace> traces;
    std::vector<std::string> labels;
    for (const auto& p : trace_paths) {
      traces.push_back(read(p));
      labels.push_back(fs::path(p).filename().string());
    }
    std::optional<SimTrace> ref;
    if (reference) ref = read(*reference);
    const fs::path pos = out_path(opts, "position.svg"), error = out_path(opts, "error.svg");
    write_file(pos, position_plane_svg(traces, labels));
    write_file(error, error_svg(traces, labels, ref ? &*ref : nullptr));
    out << pos.string() << '\n' << error.string() << '\n';
    return kExitOk;
  });
}

int cmd_tree(const std::string& scenario_path, int sample, const CommonOptions& opts, std::ostream& out,
             std::ostream& err) {
  return guarded(err, [&] {
    const ScenarioFile f = load(scenario_path, opts);
    if (sample < 0 || sample >= f.scenario.samples) {
      throw Error(ErrorCode::InvalidArgument, "sample " + std::to_string(sample) + " outside [0, " +
                                                  std::to_string(f.scenario.samples) + ")");
    }
    Scenario s = f.scenario;
    s.samples = sample + 1;
    std::optional<std::string> log;
    const SimTrace t = run_closed_loop(s, [&](const SimRow& row, const ControlStep& st) {
      if (row.k == sample) log = format_tree_log(st.result.tree_log);
    });
    if (!log) {
      err << "error: run ended (" << to_string(t.outcome) << ") before sample " << sample << '\n';
      return t.outcome == RunOutcome::Completed ? kExitInput : exit_code(t.outcome);
    }
    const fs::path path = out_path(opts, s.name + ".k" + std::to_string(sample) + ".tree.txt");
    write_file(path, *log);
    out << path.string() << '\n';
    return kExitOk;
  });
}

}  // namespace miqp_mpc::cli
