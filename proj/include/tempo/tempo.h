#ifndef TEMPO_TEMPO_H
#define TEMPO_TEMPO_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TEMPO_API __declspec(dllexport)
#else
#define TEMPO_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct tempo_config tempo_config;
typedef struct tempo_report tempo_report;

typedef enum tempo_status {
    TEMPO_OK = 0,
    TEMPO_ERR_CONFIG = 1,
    TEMPO_ERR_MODEL = 2,
    TEMPO_ERR_NUMERIC = 3,
    TEMPO_ERR_IO = 4,
    TEMPO_ERR_ARGUMENT = 5,
    TEMPO_ERR_INTERNAL = 6
} tempo_status;

typedef struct tempo_check_info {
    const char* name;
    const char* anchor;
    const char* note;
    double tolerance;
    int pass;
    int expected_failure;
    size_t residual_count;
} tempo_check_info;

TEMPO_API const char* tempo_version(void);
/* Message of the last failing call on this thread, "" if none. */
TEMPO_API const char* tempo_last_error(void);
/* Error code name of the last failing call, e.g. "ConfigError". */
TEMPO_API const char* tempo_last_error_code(void);
TEMPO_API void tempo_string_free(char* s);

TEMPO_API tempo_status tempo_config_parse(const char* text, const char* source, tempo_config** out);
TEMPO_API tempo_status tempo_config_load(const char* path, tempo_config** out);
TEMPO_API tempo_status tempo_config_preset(const char* name, tempo_config** out);
TEMPO_API tempo_status tempo_config_set_seed(tempo_config* cfg, uint64_t seed);
TEMPO_API tempo_status tempo_config_set_jobs(tempo_config* cfg, int jobs);
/* Comma-separated check names; replaces the selected checks. */
TEMPO_API tempo_status tempo_config_set_checks(tempo_config* cfg, const char* checks);
TEMPO_API tempo_status tempo_config_set_output(tempo_config* cfg, const char* dir, const char* format);
TEMPO_API tempo_status tempo_config_text(const tempo_config* cfg, char** out);
TEMPO_API void tempo_config_free(tempo_config* cfg);

TEMPO_API tempo_status tempo_run(const tempo_config* cfg, tempo_report** out);
TEMPO_API int tempo_report_pass(const tempo_report* rep);
TEMPO_API size_t tempo_report_check_count(const tempo_report* rep);
TEMPO_API tempo_status tempo_report_check(const tempo_report* rep, size_t i, tempo_check_info* out);
TEMPO_API tempo_status tempo_report_residual(const tempo_report* rep, size_t i, size_t j, const char** key,
                                             double* value);
TEMPO_API tempo_status tempo_report_json(const tempo_report* rep, int with_timing, char** out);
/* Writes to the output section of the config the report was run with. */
TEMPO_API tempo_status tempo_report_write(const tempo_report* rep);
TEMPO_API void tempo_report_free(tempo_report* rep);

TEMPO_API size_t tempo_preset_count(void);
TEMPO_API const char* tempo_preset_name(size_t i);
TEMPO_API tempo_status tempo_preset_text(const char* name, char** out);
TEMPO_API tempo_status tempo_catalog_text(char** out);

#ifdef __cplusplus
}
#endif

#endif
