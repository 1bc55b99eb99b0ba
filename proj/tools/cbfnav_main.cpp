// Command-line front end: run one scenario, sweep a batch of them, or
// hammer the library's invariants with the verification suites.

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "cbfnav/property_suites.hpp"
#include "cbfnav/scenario_io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNotReached = 1;
constexpr int kExitUsage = 2;
constexpr int kExitAudit = 3;
constexpr int kExitCrash = 4;
constexpr int kExitSuite = 5;

int exit_code_for(const cbfnav::TerminationReport& rep) {
  if (rep.reason == cbfnav::StopReason::crashed ||
      rep.reason == cbfnav::StopReason::non_finite) {
    return kExitCrash;
  }
  if (rep.audit_failures > 0 || !rep.initial_membership_ok) {
    return kExitAudit;
  }
  if (rep.reason != cbfnav::StopReason::goal_reached) {
    return kExitNotReached;
  }
  return kExitOk;
}

struct RunOutcome {
  std::string name;
  bool ran = false;
  std::string error;
  cbfnav::TerminationReport report;
};

// Executes one loaded scenario and writes its artifacts under out_dir.
RunOutcome execute(const cbfnav::Scenario& sc, const fs::path& out_dir,
                   bool want_frames) {
  RunOutcome outcome;
  outcome.name = sc.name;
  const cbfnav::SimulationResult result = cbfnav::run_simulation(sc.problem);
  outcome.report = result.report;
  outcome.ran = true;

  fs::create_directories(out_dir);
  {
    std::ofstream csv(out_dir / "trajectory.csv");
    cbfnav::write_trajectory_csv(csv, result.trajectory);
  }
  {
    std::ofstream txt(out_dir / "report.txt");
    txt << "scenario:             " << sc.name << '\n'
        << "map:                  " << sc.map_path.string() << '\n'
        << cbfnav::describe(result.report);
  }
  if (want_frames) {
    std::ofstream js(out_dir / "frames.json");
    cbfnav::write_frames_json(js, result.frames);
  }
  return outcome;
}

bool refuse_overwrite(const fs::path& out_dir, bool force) {
  if (force) return false;
  const fs::path marker = out_dir / "trajectory.csv";
  if (fs::exists(marker)) {
    std::cerr << "refusing to overwrite " << marker.string()
              << " (use --force)\n";
    return true;
  }
  return false;
}

void print_summary_row(std::ostream& os, const RunOutcome& o) {
  char buf[512];
  const auto& r = o.report;
  std::snprintf(buf, sizeof(buf),
                "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g",
                o.name.c_str(),
                r.reason == cbfnav::StopReason::goal_reached ? 1 : 0,
                r.time_to_goal, r.min_h, r.min_psi0, r.min_xi, r.min_phi,
                r.max_abs_u1, r.max_abs_u2, r.max_abs_v, r.active_fraction);
  os << buf << '\n';
}

int run_command(const std::string& scenario_file,
                const std::vector<std::string>& overrides,
                std::string out_dir_opt, bool want_frames, bool force) {
  cbfnav::Scenario sc;
  try {
    sc = cbfnav::load_scenario(scenario_file, overrides);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  }
  const fs::path out_dir =
      out_dir_opt.empty() ? fs::path("runs") / sc.name : fs::path(out_dir_opt);
  if (refuse_overwrite(out_dir, force)) return kExitUsage;

  RunOutcome outcome;
  try {
    outcome = execute(sc, out_dir, want_frames);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitCrash;
  }
  std::cout << "scenario:             " << sc.name << '\n'
            << cbfnav::describe(outcome.report)
            << "artifacts:            " << out_dir.string() << '\n';
  return exit_code_for(outcome.report);
}

int batch_command(const std::vector<std::string>& files,
                  const std::vector<std::string>& overrides,
                  const std::string& out_root_opt, int jobs, bool want_frames,
                  bool force) {
  const fs::path out_root =
      out_root_opt.empty() ? fs::path("runs/batch") : fs::path(out_root_opt);

  std::vector<cbfnav::Scenario> scenarios(files.size());
  for (std::size_t i = 0; i < files.size(); ++i) {
    try {
      scenarios[i] = cbfnav::load_scenario(files[i], overrides);
    } catch (const std::exception& err) {
      std::cerr << "error: " << err.what() << '\n';
      return kExitUsage;
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (scenarios[j].name == scenarios[i].name) {
        std::cerr << "error: scenarios " << files[j] << " and " << files[i]
                  << " share the name \"" << scenarios[i].name << "\"\n";
        return kExitUsage;
      }
    }
  }
  for (const auto& sc : scenarios) {
    if (refuse_overwrite(out_root / sc.name, force)) return kExitUsage;
  }

  std::vector<RunOutcome> outcomes(scenarios.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= scenarios.size()) return;
      try {
        outcomes[i] =
            execute(scenarios[i], out_root / scenarios[i].name, want_frames);
      } catch (const std::exception& err) {
        outcomes[i].name = scenarios[i].name;
        outcomes[i].error = err.what();
      }
    }
  };
  const int n_workers =
      std::max(1, std::min<int>(jobs, static_cast<int>(scenarios.size())));
  std::vector<std::thread> pool;
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  fs::create_directories(out_root);
  std::ofstream summary(out_root / "summary.csv");
  summary << "scenario,reached,time_to_goal,min_h,min_psi0,min_xi,min_phi,"
             "max_abs_u1,max_abs_u2,max_abs_v,filter_active_fraction\n";
  int worst = kExitOk;
  for (const RunOutcome& o : outcomes) {
    if (!o.ran) {
      std::cerr << "error in " << o.name << ": " << o.error << '\n';
      worst = std::max(worst, kExitCrash);
      continue;
    }
    print_summary_row(summary, o);
    std::printf("%-16s %-16s t=%.2fs min_h=%.4g\n", o.name.c_str(),
                cbfnav::to_string(o.report.reason), o.report.end_time,
                o.report.min_h);
    worst = std::max(worst, exit_code_for(o.report));
  }
  std::cout << "summary: " << (out_root / "summary.csv").string() << '\n';
  return worst;
}

int verify_command(const std::string& which) {
  struct Entry {
    const char* name;
    cbfnav::SuiteResult (*run)();
  };
  static const Entry table[] = {
      {"softmin_bounds", [] { return cbfnav::run_softmin_bounds_suite(); }},
      {"eta_ramp", [] { return cbfnav::run_eta_suite(); }},
      {"derivative_oracle",
       [] { return cbfnav::run_derivative_oracle_suite(); }},
      {"filter_qp", [] { return cbfnav::run_qp_suite(); }},
      {"containment", [] { return cbfnav::run_containment_suite(); }},
  };

  std::vector<cbfnav::SuiteResult> results;
  for (const Entry& entry : table) {
    if (which.empty() || std::string_view(entry.name).find(which) !=
                             std::string_view::npos) {
      results.push_back(entry.run());
    }
  }
  if (results.empty()) {
    std::cerr << "error: no suite matches \"" << which << "\"\n";
    return kExitUsage;
  }

  bool all_ok = true;
  for (const auto& r : results) {
    all_ok = all_ok && r.passed;
    std::printf("[%s] %-18s checks=%-9lld failures=%-4lld max_err=%-10.3g "
                "%.2fs\n",
                r.passed ? " ok " : "FAIL", r.name.c_str(), r.checks,
                r.failures, r.max_error, r.seconds);
    if (!r.passed) std::printf("       first: %s\n", r.detail.c_str());
  }
  return all_ok ? kExitOk : kExitSuite;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe navigation simulator: sensing-built barriers with a "
               "closed-form input filter"};
  app.require_subcommand(1);

  std::string scenario_file;
  std::string out_dir;
  std::vector<std::string> overrides;
  bool want_frames = false;
  bool force = false;

  CLI::App* run = app.add_subcommand("run", "Simulate one scenario");
  run->add_option("--scenario", scenario_file, "Scenario JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  run->add_option("--out", out_dir,
                  "Output directory (default runs/<name>)");
  run->add_option("--set", overrides,
                  "Override a scenario key, e.g. --set horizon=30");
  run->add_flag("--frames", want_frames, "Also write frames.json");
  run->add_flag("--force", force, "Overwrite existing outputs");

  std::vector<std::string> batch_files;
  int jobs = 1;
  CLI::App* batch =
      app.add_subcommand("batch", "Simulate many scenarios, summarize");
  batch->add_option("scenarios", batch_files, "Scenario JSON files")
      ->required()
      ->check(CLI::ExistingFile);
  batch->add_option("--out", out_dir,
                    "Output root (default runs/batch)");
  batch->add_option("--jobs", jobs, "Worker threads")
      ->check(CLI::PositiveNumber);
  batch->add_option("--set", overrides,
                    "Override applied to every scenario");
  batch->add_flag("--frames", want_frames, "Also write frames.json");
  batch->add_flag("--force", force, "Overwrite existing outputs");

  std::string suite;
  CLI::App* verify =
      app.add_subcommand("verify", "Run the invariant suites");
  verify->add_option("--suite", suite,
                     "One of softmin_bounds, eta_ramp, derivative_oracle, "
                     "filter_qp, containment (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  if (run->parsed()) {
    return run_command(scenario_file, overrides, out_dir, want_frames, force);
  }
  if (batch->parsed()) {
    return batch_command(batch_files, overrides, out_dir, jobs, want_frames,
                         force);
  }
  return verify_command(suite);
}
