// Command-line runner for the Fichera benchmark.
#include "avem/adaptive_driver.hpp"
#include "avem/fichera.hpp"
#include "avem/report_io.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

namespace {

struct RunOptions {
  std::string problem = "fichera";
  double alpha = 0.5;
  avem::GalerkinConfig config;
  std::string csv;
  std::string vtk_dir;
  int vtk_every = 1;
};

void add_common(CLI::App* cmd, RunOptions& o, bool with_lambda) {
  cmd->add_option("--problem", o.problem, "Benchmark problem")->check(CLI::IsMember({"fichera"}));
  cmd->add_option("--alpha", o.alpha, "Exponent of the exact solution")->check(CLI::Range(0.0, 1.0));
  if (with_lambda) cmd->add_option("--lambda-max", o.config.lambda_max, "Max global index (0: conforming AFEM)");
  cmd->add_option("--theta", o.config.theta, "Doerfler parameter");
  cmd->add_option("--gamma", o.config.gamma, "Stabilization scaling");
  cmd->add_option("--tol", o.config.tol, "Stop once eta drops below this value");
  cmd->add_option("--max-dofs", o.config.max_ndofs, "Stop once the free dofs reach this count");
  cmd->add_option("--csv", o.csv, "CSV output path");
  cmd->add_option("--cg-tol", o.config.cg_tol, "Relative CG tolerance");
  cmd->add_option("--threads", o.config.threads, "Worker threads for assembly and estimation");
}

std::vector<avem::IterationRecord> run_one(const RunOptions& o, const std::string& label) {
  o.config.validate();
  const auto problem = avem::fichera_problem(o.alpha);
  avem::IterationObserver observer;
  if (!o.vtk_dir.empty() && o.vtk_every > 0) {
    std::filesystem::create_directories(o.vtk_dir);
    observer = [&](const avem::IterationState& s) {
      if (s.record.iter % o.vtk_every != 0) return;
      char name[64];
      std::snprintf(name, sizeof name, "%s_%04d.vtk", label.c_str(), s.record.iter);
      avem::write_vtk(std::filesystem::path(o.vtk_dir) / name, s.mesh, s.leaves, s.solution,
                      s.estimate.eta2_local);
    };
  }
  const auto t0 = std::chrono::steady_clock::now();
  auto records = avem::galerkin_loop(problem, o.config, observer);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto& last = records.back();
  std::cout << label << ": iterations=" << records.size() << " ndofs=" << last.ndofs
            << " cells=" << last.n_cells << " h1err=" << avem::format_double(last.h1err)
            << " eta=" << avem::format_double(last.eta) << " lambda_max=" << last.lambda_max
            << " seconds=" << secs << '\n';
  return records;
}

void check_output_dir(const std::string& file) {
  if (file.empty()) return;
  const auto dir = std::filesystem::absolute(file).parent_path();
  if (!std::filesystem::is_directory(dir)) throw std::runtime_error("output directory does not exist: " + dir.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive virtual element solver on tetrahedral meshes with hanging nodes"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run one adaptive loop");
  add_common(run_cmd, run, true);
  run_cmd->add_option("--vtk-dir", run.vtk_dir, "Directory for VTK snapshots");
  run_cmd->add_option("--vtk-every", run.vtk_every, "Write a snapshot every N iterations (0: never)")
      ->check(CLI::NonNegativeNumber);

  RunOptions cmp;
  cmp.config.lambda_max = 10;
  auto* cmp_cmd = app.add_subcommand("compare", "Run conforming AFEM and the admissible VEM loop back to back");
  add_common(cmp_cmd, cmp, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      run.config.validate();
      check_output_dir(run.csv);
      const auto label = run.config.lambda_max == 0 ? std::string("afem") : std::string("avem");
      const auto records = run_one(run, label);
      if (!run.csv.empty()) avem::write_csv(run.csv, records);
    } else if (cmp_cmd->parsed()) {
      if (cmp.config.lambda_max == 0) throw std::invalid_argument("compare needs --lambda-max >= 1");
      cmp.config.validate();
      check_output_dir(cmp.csv);
      RunOptions afem = cmp;
      afem.config.lambda_max = 0;
      std::vector<std::pair<std::string, std::vector<avem::IterationRecord>>> runs;
      runs.emplace_back("afem", run_one(afem, "afem"));
      runs.emplace_back("avem", run_one(cmp, "avem"));
      if (!cmp.csv.empty()) avem::write_joined_csv(cmp.csv, runs);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
