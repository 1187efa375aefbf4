#include "fplo/fplo.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "analysis.hpp"
#include "check.hpp"
#include "config.hpp"

using namespace fplo;

struct fplo_config {
  StudyConfig config;
  bool preset_defaults_applied = false;
};

struct fplo_report {
  StudyReport report;
};

namespace {

thread_local std::string g_last_error;

fplo_status set_error(fplo_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

// Runs fn, translating exceptions to status codes.
template <typename Fn>
fplo_status guarded(Fn&& fn, fplo_status config_error_status = FPLO_ERROR_VALIDATION) {
  try {
    fn();
    g_last_error.clear();
    return FPLO_OK;
  } catch (const SolverError& err) {
    return set_error(FPLO_ERROR_SOLVER, err.what());
  } catch (const ConfigError& err) {
    return set_error(config_error_status, err.what());
  } catch (const std::invalid_argument& err) {
    return set_error(FPLO_ERROR_VALIDATION, err.what());
  } catch (const std::ios_base::failure& err) {
    return set_error(FPLO_ERROR_IO, err.what());
  } catch (const std::exception& err) {
    return set_error(FPLO_ERROR_INTERNAL, err.what());
  }
}

}  // namespace

extern "C" {

const char* fplo_version(void) { return "1.0.0"; }

const char* fplo_last_error(void) { return g_last_error.c_str(); }

void fplo_string_free(char* s) { std::free(s); }

fplo_status fplo_config_parse(const char* text, fplo_config** out) {
  if (!text || !out)
    return set_error(FPLO_ERROR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded(
      [&] {
        auto handle = std::make_unique<fplo_config>();
        handle->config = parse_config(text);
        handle->preset_defaults_applied = true;
        *out = handle.release();
      },
      FPLO_ERROR_PARSE);
}

fplo_status fplo_config_from_file(const char* path, fplo_config** out) {
  if (!path || !out)
    return set_error(FPLO_ERROR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  std::ifstream in(path);
  if (!in)
    return set_error(FPLO_ERROR_IO, std::string("cannot open ") + path);
  std::ostringstream text;
  text << in.rdbuf();
  return fplo_config_parse(text.str().c_str(), out);
}

fplo_status fplo_config_preset(int preset_id, fplo_config** out) {
  if (!out) return set_error(FPLO_ERROR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    auto handle = std::make_unique<fplo_config>();
    handle->config.preset = preset_id;
    finalize_config(handle->config, true);
    handle->preset_defaults_applied = true;
    *out = handle.release();
  });
}

fplo_status fplo_config_set(fplo_config* config, const char* key,
                            const char* value) {
  if (!config || !key || !value)
    return set_error(FPLO_ERROR_INVALID_ARGUMENT, "null argument");
  return guarded([&] { apply_config_key(config->config, key, value); },
                 FPLO_ERROR_PARSE);
}

fplo_status fplo_config_render(const fplo_config* config, char** text) {
  if (!config || !text)
    return set_error(FPLO_ERROR_INVALID_ARGUMENT, "null argument");
  *text = nullptr;
  return guarded([&] {
    StudyConfig copy = config->config;
    finalize_config(copy, !config->preset_defaults_applied);
    *text = dup_string(render_config(copy));
  });
}

void fplo_config_free(fplo_config* config) { delete config; }

fplo_status fplo_study_run(const fplo_config* config, fplo_report** out) {
  if (!config || !out)
    return set_error(FPLO_ERROR_INVALID_ARGUMENT, "null argument");
  *out = nullptr;
  return guarded([&] {
    StudyConfig effective = config->config;
    finalize_config(effective, !config->preset_defaults_applied);
    auto handle = std::make_unique<fplo_report>();
    handle->report = run_study(effective);
    *out = handle.release();
  });
}

int fplo_report_rows(const fplo_report* report) {
  return report ? static_cast<int>(report->report.points.size()) : 0;
}

fplo_status fplo_report_point(const fplo_report* report, int row, double* knob,
                              double* e_plus, double* e_minus, double* e_stream) {
  if (!report) return set_error(FPLO_ERROR_INVALID_ARGUMENT, "null report");
  if (row < 0 || row >= fplo_report_rows(report))
    return set_error(FPLO_ERROR_INVALID_ARGUMENT, "row out of range");
  const auto& p = report->report.points[row];
  if (knob) *knob = p.knob;
  if (e_plus) *e_plus = p.errors.e_plus;
  if (e_minus) *e_minus = p.errors.e_minus;
  if (e_stream) *e_stream = p.errors.e_stream;
  return FPLO_OK;
}

fplo_status fplo_report_csv(const fplo_report* report, char** text) {
  if (!report || !text)
    return set_error(FPLO_ERROR_INVALID_ARGUMENT, "null argument");
  *text = nullptr;
  return guarded([&] {
    std::ostringstream os;
    write_csv(report->report, os);
    *text = dup_string(os.str());
  });
}

fplo_status fplo_report_markdown(const fplo_report* report, char** text) {
  if (!report || !text)
    return set_error(FPLO_ERROR_INVALID_ARGUMENT, "null argument");
  *text = nullptr;
  return guarded([&] {
    std::ostringstream os;
    write_markdown(report->report, os);
    *text = dup_string(os.str());
  });
}

void fplo_report_free(fplo_report* report) { delete report; }

fplo_status fplo_check(int order, char** summary, int* failures) {
  if (!summary || !failures)
    return set_error(FPLO_ERROR_INVALID_ARGUMENT, "null argument");
  *summary = nullptr;
  *failures = 0;
  return guarded([&] {
    const auto results = run_checks(order);
    std::ostringstream os;
    int failed = 0;
    for (const auto& r : results) {
      os << (r.passed ? "[ok]   " : "[FAIL] ") << r.name << " (" << r.detail
         << ")\n";
      if (!r.passed) ++failed;
    }
    *summary = dup_string(os.str());
    *failures = failed;
  });
}

fplo_status fplo_dump_operators(int order, const char* directory) {
  if (!directory) return set_error(FPLO_ERROR_INVALID_ARGUMENT, "null directory");
  return guarded([&] {
    const auto basis = SphericalBasis::build(order);
    const auto ops = build_angular_operators(basis);
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    auto dump = [&](const std::string& name, const Eigen::MatrixXd& m) {
      std::ofstream out(fs::path(directory) / name);
      if (!out) throw std::ios_base::failure("cannot write " + name);
      write_matrix_csv(out, m);
    };
    const char* axes[3] = {"x", "y", "z"};
    for (int i = 0; i < 3; ++i) {
      dump(std::string("A_") + axes[i] + ".csv", ops.streaming[i]);
      dump(std::string("R_") + axes[i] + ".csv", ops.lorentz_full[i]);
    }
    Eigen::MatrixXd lb(basis.total_count(), 1);
    lb.col(0) = laplace_beltrami_diagonal(basis.indices());
    dump("LB.csv", lb);
    const char* names[kNormalCount] = {"W_xminus.csv", "W_xplus.csv",
                                       "W_yminus.csv", "W_yplus.csv"};
    for (int t = 0; t < kNormalCount; ++t) dump(names[t], ops.boundary_weight[t]);
  });
}

fplo_status fplo_dump_mesh(int nx, int ny, double xmin, double xmax, double ymin,
                           double ymax, const char* path) {
  if (!path) return set_error(FPLO_ERROR_INVALID_ARGUMENT, "null path");
  return guarded([&] {
    const auto mesh = Mesh2D::rectangle(nx, ny, Rect{xmin, xmax, ymin, ymax});
    std::ofstream out(path);
    if (!out) throw std::ios_base::failure(std::string("cannot write ") + path);
    mesh.write_text(out);
  });
}

}  // extern "C"
