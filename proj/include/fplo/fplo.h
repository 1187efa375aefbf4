/* C interface of the Fokker-Planck Lorentz-force solver library.
 *
 * All objects are opaque handles created and destroyed through this API.
 * Functions return FPLO_OK on success; on failure fplo_last_error() holds a
 * human-readable message for the calling thread. Strings returned through
 * char** out-parameters are owned by the caller and must be released with
 * fplo_string_free().
 */
#ifndef FPLO_H
#define FPLO_H

#ifdef __cplusplus
extern "C" {
#endif

typedef struct fplo_config fplo_config;
typedef struct fplo_report fplo_report;

typedef enum {
  FPLO_OK = 0,
  FPLO_ERROR_INVALID_ARGUMENT = 1,
  FPLO_ERROR_PARSE = 2,
  FPLO_ERROR_VALIDATION = 3,
  FPLO_ERROR_SOLVER = 4,
  FPLO_ERROR_IO = 5,
  FPLO_ERROR_INTERNAL = 6
} fplo_status;

const char* fplo_version(void);

/* Message of the most recent failure on this thread; empty if none. */
const char* fplo_last_error(void);

void fplo_string_free(char* s);

/* --- study configuration ------------------------------------------------ */

/* Parses "key = value" configuration text. */
fplo_status fplo_config_parse(const char* text, fplo_config** out);

fplo_status fplo_config_from_file(const char* path, fplo_config** out);

/* Configuration preloaded with the defaults of one of the built-in
 * convergence experiments (1: mesh sweep, 2: moment-order sweep,
 * 3: energy-step sweep). */
fplo_status fplo_config_preset(int preset_id, fplo_config** out);

/* Applies one "key = value" override. The value syntax is checked here;
 * cross-field validation happens when the study runs or renders. */
fplo_status fplo_config_set(fplo_config* config, const char* key,
                            const char* value);

/* Renders the full effective configuration as parseable text. */
fplo_status fplo_config_render(const fplo_config* config, char** text);

void fplo_config_free(fplo_config* config);

/* --- study execution ------------------------------------------------------ */

fplo_status fplo_study_run(const fplo_config* config, fplo_report** out);

int fplo_report_rows(const fplo_report* report);

/* Errors of one sweep row: knob value, even and odd L2 errors and the
 * combined streaming norm. Null output pointers are skipped. */
fplo_status fplo_report_point(const fplo_report* report, int row, double* knob,
                              double* e_plus, double* e_minus, double* e_stream);

fplo_status fplo_report_csv(const fplo_report* report, char** text);
fplo_status fplo_report_markdown(const fplo_report* report, char** text);

void fplo_report_free(fplo_report* report);

/* --- diagnostics ---------------------------------------------------------- */

/* Runs the property/diagnostic suite at the given moment order. The summary
 * has one line per check; *failures receives the failed count. */
fplo_status fplo_check(int order, char** summary, int* failures);

/* Writes the angular operator matrices (streaming, rotation,
 * Laplace-Beltrami, boundary weights) as row,col,value CSV files. */
fplo_status fplo_dump_operators(int order, const char* directory);

/* Writes the structured triangulation as a plain-text vertex/triangle list. */
fplo_status fplo_dump_mesh(int nx, int ny, double xmin, double xmax, double ymin,
                           double ymax, const char* path);

#ifdef __cplusplus
}
#endif

#endif /* FPLO_H */
