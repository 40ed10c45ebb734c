#include "fracthm/app.hpp"

#include "fracthm/errors.hpp"
#include "fracthm/verify.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <map>
#include <sstream>

namespace fracthm::app {

namespace fs = std::filesystem;

Scenario apply_options(Scenario sc, const RunOptions& opt) {
  if (opt.resolution) {
    if (*opt.resolution < 1) throw Error(ErrorKind::ValidationError, "--resolution must be at least 1");
    const double ratio = static_cast<double>(sc.geometry.nx) / sc.geometry.ny;
    sc.geometry.ny = *opt.resolution;
    sc.geometry.nx = std::max(1, static_cast<int>(std::lround(ratio * *opt.resolution)));
  }
  if (opt.out_dir) sc.output.directory = opt.out_dir->string();
  if (!(opt.dt_scale > 0) || !std::isfinite(opt.dt_scale))
    throw Error(ErrorKind::ValidationError, "--dt-scale must be positive");
  for (auto& ph : sc.phases) ph.dt *= opt.dt_scale;
  if (opt.max_newton) {
    if (*opt.max_newton < 1) throw Error(ErrorKind::ValidationError, "--max-newton must be at least 1");
    sc.solver.max_newton = *opt.max_newton;
  }
  return sc;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "cannot write '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_phase_states(const RunResult& run, const fs::path& path) {
  std::ostringstream out;
  out << kPhaseStatesHeader << "\n";
  for (const auto& pe : run.phase_ends)
    for (int sd : run.grid.fracture_subdomains()) {
      const auto& g = run.grid.subdomains[sd];
      for (int c = 0; c < g.num_cells(); ++c) {
        out << pe.phase << "," << pe.name << "," << format_double(pe.time) << "," << g.fracture_id << "," << sd << ","
            << c << "," << format_double(g.cell_centers[c].x()) << "," << format_double(g.cell_centers[c].y()) << ","
            << format_double(pe.jump_n[sd][c]) << "," << format_double(pe.jump_t[sd][c]) << ","
            << static_cast<int>(pe.regimes[sd][c]) << "\n";
      }
    }
  write_text(path, out.str());
}

}  // namespace

RunResult run_scenario(const Scenario& sc, const fs::path& base_dir, const fs::path& out_dir, std::ostream* log) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult run;
  run.grid = build_grid(sc, base_dir);
  run.phases = build_phases(sc, run.grid);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw Error(ErrorKind::IoError, "cannot create directory '" + out_dir.string() + "'");
  write_text(out_dir / "scenario.yaml", dump_scenario(sc));
  run.files.push_back(out_dir / "scenario.yaml");

  DiagnosticsLog json(out_dir / "diagnostics.jsonl");
  run.files.push_back(out_dir / "diagnostics.jsonl");
  const int every = sc.output.vtk_every;

  auto observer = [&](const Model& model, const State& state, const StepDiagnostics& d) {
    json.write(d);
    const Phase& ph = run.phases[d.phase];
    const bool phase_end = std::abs(d.time - ph.end) <= 1e-9 * (ph.end - ph.start);
    if (every > 0 && (d.step % every == 0 || phase_end)) {
      auto paths = write_vtk_snapshot(model, state, d.regimes, out_dir, sc.name, d.step);
      run.files.insert(run.files.end(), paths.begin(), paths.end());
    }
    if (phase_end) {
      PhaseEndState pe;
      pe.phase = d.phase;
      pe.name = ph.name;
      pe.time = ph.end;
      pe.regimes = d.regimes;
      pe.jump_n.resize(run.grid.subdomains.size());
      pe.jump_t.resize(run.grid.subdomains.size());
      for (int sd : run.grid.fracture_subdomains()) {
        const Vec j = model.jump_local(sd, state.x);
        const Index n = j.size() / 2;
        pe.jump_n[sd] = Eigen::Map<const Vec, 0, Eigen::InnerStride<2>>(j.data(), n);
        pe.jump_t[sd] = Eigen::Map<const Vec, 0, Eigen::InnerStride<2>>(j.data() + 1, n);
      }
      run.phase_ends.push_back(std::move(pe));
    }
    if (log) {
      int open = 0, stick = 0, slide = 0;
      for (const auto& f : d.fractures) {
        open += f.n_open;
        stick += f.n_stick;
        slide += f.n_slide;
      }
      *log << "step " << d.step << " phase " << ph.name << " t=" << d.time << " dt=" << d.dt
           << " newton=" << d.newton_iterations << " cuts=" << d.dt_cuts << " open/stick/slide=" << open << "/"
           << stick << "/" << slide << "\n";
    }
  };

  ModelOptions options;
  options.contact_c = sc.contact_c;
  run.diagnostics = run_simulation(run.grid, sc.materials, run.phases, sc.solver, options, observer);

  write_fracture_timeseries(run.diagnostics, out_dir / "fracture_timeseries.csv");
  run.files.push_back(out_dir / "fracture_timeseries.csv");
  write_phase_states(run, out_dir / "phase_states.csv");
  run.files.push_back(out_dir / "phase_states.csv");
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return run;
}

DemoAssessment assess_demo(const RunResult& run) {
  DemoAssessment a;
  a.seconds = run.seconds;
  a.num_phases = static_cast<int>(run.phases.size());
  a.num_fractures = run.grid.num_fractures();
  const auto fracs = run.grid.fracture_subdomains();

  a.fractures_changed.assign(run.phase_ends.size(), 0);
  for (std::size_t k = 1; k < run.phase_ends.size(); ++k) {
    std::map<int, bool> changed;
    for (int sd : fracs)
      changed[run.grid.subdomains[sd].fracture_id] |= run.phase_ends[k].regimes[sd] != run.phase_ends[k - 1].regimes[sd];
    for (const auto& [id, c] : changed) a.fractures_changed[k] += c;
  }

  for (const auto& pe : run.phase_ends) {
    double total = 0.0;
    std::map<int, double> sq;
    for (int sd : fracs) sq[run.grid.subdomains[sd].fracture_id] += pe.jump_n[sd].squaredNorm();
    for (const auto& [id, s] : sq) total += std::sqrt(s);
    a.total_opening.push_back(total);
  }

  if (run.phase_ends.size() >= 2) {
    std::map<int, bool> slid_before, slides_now;
    for (int sd : fracs) {
      const int id = run.grid.subdomains[sd].fracture_id;
      for (Regime r : run.phase_ends[0].regimes[sd]) slid_before[id] |= r == Regime::Slide;
    }
    for (const auto& d : run.diagnostics)
      if (d.phase == 1)
        for (const auto& f : d.fractures) slides_now[f.fracture_id] |= f.n_slide > 0;
    for (const auto& [id, now] : slides_now) a.sliding_onsets += now && !slid_before[id];
  }

  a.onset_iterations.assign(run.phases.size(), 0);
  a.median_iterations.assign(run.phases.size(), 0.0);
  std::vector<std::vector<int>> per_phase(run.phases.size());
  for (const auto& d : run.diagnostics) {
    a.max_newton = std::max(a.max_newton, d.newton_iterations);
    if (per_phase[d.phase].empty()) a.onset_iterations[d.phase] = d.newton_iterations;
    per_phase[d.phase].push_back(d.newton_iterations);
  }
  for (std::size_t p = 0; p < per_phase.size(); ++p) {
    auto v = per_phase[p];
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    a.median_iterations[p] = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  }
  return a;
}

bool DemoAssessment::passed(std::string* why) const {
  std::vector<std::string> reasons;
  if (num_phases != 4) reasons.push_back("expected four phases");
  if (num_fractures != 7) reasons.push_back("expected seven fractures");
  if (static_cast<int>(fractures_changed.size()) == 4) {
    for (int k = 1; k < 4; ++k)
      if (fractures_changed[k] < 3) reasons.push_back("phase " + std::to_string(k + 1) + " changes fewer than 3 fractures");
  } else {
    reasons.push_back("missing phase end states");
  }
  if (sliding_onsets < 1) reasons.push_back("no sliding onset in phase II");
  if (total_opening.size() == 4) {
    if (!(total_opening[2] > total_opening[1])) reasons.push_back("cooling does not increase the opening");
    if (!(total_opening[3] < total_opening[2])) reasons.push_back("heating does not decrease the opening");
  }
  if (max_newton > 50) reasons.push_back("more than 50 Newton iterations in a step");
  for (std::size_t p = 1; p < onset_iterations.size(); ++p)
    if (onset_iterations[p] < median_iterations[p])
      reasons.push_back("no iteration spike at the start of phase " + std::to_string(p + 1));
  if (seconds > 900) reasons.push_back("runtime above 15 minutes");
  if (why) {
    std::string s;
    for (const auto& r : reasons) s += (s.empty() ? "" : "; ") + r;
    *why = s;
  }
  return reasons.empty();
}

std::string DemoAssessment::summary() const {
  std::ostringstream out;
  out << num_phases << " phases, " << num_fractures << " fractures; fractures changing regime per phase:";
  for (std::size_t k = 1; k < fractures_changed.size(); ++k) out << " " << fractures_changed[k];
  out << "; sliding onsets in phase II: " << sliding_onsets << "; total opening at phase ends:";
  for (double o : total_opening) {
    char buf[32];
    std::snprintf(buf, sizeof buf, " %.4g", o);
    out << buf;
  }
  out << "; Newton iterations max " << max_newton << ", phase onset/median:";
  for (std::size_t p = 0; p < onset_iterations.size(); ++p)
    out << " " << onset_iterations[p] << "/" << median_iterations[p];
  out << "; " << static_cast<int>(std::lround(seconds)) << " s";
  return out.str();
}

namespace {

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::NonConvergence: return 3;
    case ErrorKind::LinearSolveFailure:
    case ErrorKind::NonFiniteResidual:
    case ErrorKind::DegenerateBound: return 3;
    default: return 2;
  }
}

// Reruns the scenario into a scratch directory and compares the text outputs.
bool seed_check(const Scenario& sc, const fs::path& base_dir, const fs::path& out_dir, std::ostream& out) {
  const fs::path again = out_dir / "seed_check";
  run_scenario(sc, base_dir, again);
  bool same = true;
  for (const char* file : {"fracture_timeseries.csv", "diagnostics.jsonl", "phase_states.csv"}) {
    const bool eq = read_text(out_dir / file) == read_text(again / file);
    out << "seed check " << file << ": " << (eq ? "identical" : "DIFFERENT") << "\n";
    same = same && eq;
  }
  return same;
}

int run_command(const Scenario& input, const fs::path& base_dir, const RunOptions& opt, bool check, bool quiet,
                bool demo, std::ostream& out) {
  const Scenario sc = apply_options(input, opt);
  const fs::path out_dir = sc.output.directory;
  const RunResult run = run_scenario(sc, base_dir, out_dir, quiet ? nullptr : &out);
  out << "completed " << run.diagnostics.size() << " steps in " << std::lround(run.seconds) << " s; outputs in "
      << out_dir.string() << "\n";
  int code = 0;
  if (demo) {
    const DemoAssessment a = assess_demo(run);
    std::string why;
    const bool ok = a.passed(&why);
    out << "demo: " << a.summary() << "\n";
    out << "demo qualitative checks: " << (ok ? "pass" : "FAIL (" + why + ")") << "\n";
    if (!ok) code = 1;
  }
  if (check && !seed_check(sc, base_dir, out_dir, out)) code = 1;
  return code;
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App cli{"Coupled thermo-hydro-mechanical simulator for fractured porous media"};
  cli.require_subcommand(1);

  RunOptions opt;
  int resolution = 0, max_newton = 0;
  std::string out_dir, scenario_file;
  bool check = false, quiet = false;
  auto add_run_flags = [&](CLI::App* sub) {
    sub->add_option("--resolution", resolution, "Cells along y (x follows the aspect ratio)")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", out_dir, "Output directory (overrides output.directory)");
    sub->add_option("--dt-scale", opt.dt_scale, "Factor applied to every phase time step")->check(CLI::PositiveNumber);
    sub->add_option("--max-newton", max_newton, "Newton iteration limit per step")->check(CLI::PositiveNumber);
    sub->add_flag("--seed-check", check, "Run twice and compare the outputs byte for byte");
    sub->add_flag("--quiet", quiet, "Do not print one line per step");
  };
  CLI::App* run = cli.add_subcommand("run", "Run a scenario file");
  run->add_option("scenario", scenario_file, "Scenario file (YAML)")->required();
  add_run_flags(run);
  CLI::App* demo = cli.add_subcommand("demo", "Run the bundled four-phase demonstration");
  add_run_flags(demo);
  CLI::App* verify = cli.add_subcommand("verify", "Run the verification suites");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      cli.exit(e, out, err);
      return 0;
    }
    err << "usage error: " << e.what() << "\n" << cli.help();
    return 64;
  }
  if (resolution > 0) opt.resolution = resolution;
  if (max_newton > 0) opt.max_newton = max_newton;
  if (!out_dir.empty()) opt.out_dir = out_dir;

  try {
    if (*verify) {
      bool all = true;
      for (const auto& r : verify::run_oracle_suites()) {
        out << verify::format_result(r) << "\n";
        all = all && r.passed;
      }
      out << (all ? "all suites passed" : "some suites FAILED") << "\n";
      return all ? 0 : 1;
    }
    if (*demo) return run_command(parse_scenario(demo_scenario_text()), {}, opt, check, quiet, true, out);
    const fs::path file = scenario_file;
    return run_command(load_scenario(file), file.parent_path(), opt, check, quiet, false, out);
  } catch (const NonConvergenceError& e) {
    err << e.what() << " (step " << e.step() << ")\n";
    return 3;
  } catch (const Error& e) {
    err << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fracthm::app
