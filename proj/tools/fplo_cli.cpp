// Convergence-study CLI. Links only the shared-library C API.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "fplo/fplo.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitSolver = 2;

int exit_code_for(fplo_status status) {
  switch (status) {
    case FPLO_OK: return kExitOk;
    case FPLO_ERROR_SOLVER: return kExitSolver;
    default: return kExitValidation;
  }
}

struct ConfigHandle {
  fplo_config* ptr = nullptr;
  ~ConfigHandle() { fplo_config_free(ptr); }
};

struct ReportHandle {
  fplo_report* ptr = nullptr;
  ~ReportHandle() { fplo_report_free(ptr); }
};

struct StringHandle {
  char* ptr = nullptr;
  ~StringHandle() { fplo_string_free(ptr); }
};

int fail(fplo_status status) {
  std::cerr << "error: " << fplo_last_error() << "\n";
  return exit_code_for(status);
}

int run_command(const std::string& config_path, int preset, const std::string& out,
                const std::string& format, int threads, bool threads_given,
                bool deterministic) {
  ConfigHandle config;
  fplo_status status;
  if (!config_path.empty())
    status = fplo_config_from_file(config_path.c_str(), &config.ptr);
  else
    status = fplo_config_preset(preset, &config.ptr);
  if (status != FPLO_OK) return fail(status);

  // precedence: explicit flag > environment > configuration file
  if (const char* env = std::getenv("FPLO_THREADS"); env && !threads_given)
    if ((status = fplo_config_set(config.ptr, "threads", env)) != FPLO_OK)
      return fail(status);
  if (threads_given)
    if ((status = fplo_config_set(config.ptr, "threads",
                                  std::to_string(threads).c_str())) != FPLO_OK)
      return fail(status);
  if (deterministic)
    if ((status = fplo_config_set(config.ptr, "deterministic", "true")) != FPLO_OK)
      return fail(status);
  if (!out.empty())
    if ((status = fplo_config_set(config.ptr, "out", out.c_str())) != FPLO_OK)
      return fail(status);
  if (!format.empty())
    if ((status = fplo_config_set(config.ptr, "format", format.c_str())) != FPLO_OK)
      return fail(status);

  ReportHandle report;
  if ((status = fplo_study_run(config.ptr, &report.ptr)) != FPLO_OK)
    return fail(status);

  StringHandle rendered;
  if ((status = fplo_config_render(config.ptr, &rendered.ptr)) != FPLO_OK)
    return fail(status);
  std::string out_dir = ".";
  bool markdown = false;
  {
    std::istringstream echo(rendered.ptr);
    std::string line;
    while (std::getline(echo, line)) {
      if (line.rfind("out = ", 0) == 0) out_dir = line.substr(6);
      if (line == "format = md") markdown = true;
    }
  }

  StringHandle text;
  status = markdown ? fplo_report_markdown(report.ptr, &text.ptr)
                    : fplo_report_csv(report.ptr, &text.ptr);
  if (status != FPLO_OK) return fail(status);

  std::filesystem::create_directories(out_dir);
  const auto path =
      std::filesystem::path(out_dir) / (markdown ? "report.md" : "report.csv");
  std::ofstream file(path);
  if (!file) {
    std::cerr << "error: cannot write " << path << "\n";
    return kExitValidation;
  }
  file << text.ptr;
  file.close();

  std::cout << text.ptr;
  std::cout << "report written to " << path.string() << "\n";
  return kExitOk;
}

int check_command(int order) {
  StringHandle summary;
  int failures = 0;
  const fplo_status status = fplo_check(order, &summary.ptr, &failures);
  if (status != FPLO_OK) return fail(status);
  std::cout << summary.ptr;
  if (failures > 0) {
    std::cout << failures << " check(s) failed\n";
    return kExitValidation;
  }
  std::cout << "all checks passed\n";
  return kExitOk;
}

int dump_command(int order, const std::string& out, int resolution) {
  fplo_status status = fplo_dump_operators(order, out.c_str());
  if (status != FPLO_OK) return fail(status);
  std::cout << "operator matrices written to " << out << "\n";
  if (resolution > 0) {
    const auto path = std::filesystem::path(out) / "mesh.txt";
    status = fplo_dump_mesh(resolution, resolution, -1.0, 1.0, -1.0, 1.0,
                            path.string().c_str());
    if (status != FPLO_OK) return fail(status);
    std::cout << "mesh written to " << path.string() << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fokker-Planck Lorentz-force transport: convergence studies"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "execute a convergence study");
  std::string config_path, out_dir, format;
  int preset = 1;
  int threads = 1;
  bool deterministic = false;
  auto* config_opt =
      run->add_option("--config", config_path, "configuration file (key = value)");
  run->add_option("--preset", preset, "built-in experiment 1..3 (without --config)")
      ->excludes(config_opt);
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--format", format, "report format")
      ->check(CLI::IsMember({"csv", "md"}));
  auto* threads_opt =
      run->add_option("--threads", threads, "parallel sweep points");
  run->add_flag("--deterministic", deterministic,
                "force deterministic mode (default on)");

  // check
  auto* check = app.add_subcommand("check", "run the property/diagnostic suite");
  int check_order = 5;
  check->add_option("--order", check_order, "moment order for the checks");

  // dump-operators
  auto* dump = app.add_subcommand("dump-operators",
                                  "write angular operator matrices as CSV");
  int dump_order = 5;
  int dump_resolution = 0;
  std::string dump_out = "operators";
  dump->add_option("--order", dump_order, "moment order");
  dump->add_option("--out", dump_out, "output directory");
  dump->add_option("--resolution", dump_resolution,
                   "also export the nx-by-nx mesh as mesh.txt");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed())
    return run_command(config_path, preset, out_dir, format, threads,
                       threads_opt->count() > 0, deterministic);
  if (check->parsed()) return check_command(check_order);
  if (dump->parsed()) return dump_command(dump_order, dump_out, dump_resolution);
  return kExitValidation;
}
