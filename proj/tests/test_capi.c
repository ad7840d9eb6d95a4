#include <stdio.h>
#include <string.h>

#include "tempo/tempo.h"

static int failures = 0;

#define EXPECT(cond)                                                  \
    do {                                                              \
        if (!(cond)) {                                                \
            fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
            ++failures;                                               \
        }                                                             \
    } while (0)

int main(void) {
    char* text = NULL;
    tempo_config* cfg = NULL;
    tempo_report* rep = NULL;

    EXPECT(tempo_catalog_text(&text) == TEMPO_OK);
    EXPECT(text && strstr(text, "jacobi_hermite (") && strstr(text, "waveguide ("));
    tempo_string_free(text);

    EXPECT(tempo_preset_count() == 17);
    EXPECT(tempo_preset_name(tempo_preset_count()) == NULL);
    EXPECT(tempo_preset_text("nope", &text) == TEMPO_ERR_CONFIG);
    EXPECT(strcmp(tempo_last_error_code(), "UnknownPreset") == 0);

    EXPECT(tempo_config_parse("[run]\nchecks = rf\nr_list = 2, 1\n", "bad.ini", &cfg) == TEMPO_ERR_CONFIG);
    EXPECT(strstr(tempo_last_error(), "bad.ini:3") != NULL);
    EXPECT(tempo_config_parse(NULL, NULL, &cfg) == TEMPO_ERR_ARGUMENT);

    EXPECT(tempo_config_preset("rf-radial", &cfg) == TEMPO_OK);
    EXPECT(tempo_config_set_jobs(cfg, 0) == TEMPO_ERR_CONFIG);
    EXPECT(tempo_config_set_output(cfg, NULL, "xml") == TEMPO_ERR_CONFIG);
    EXPECT(tempo_config_set_checks(cfg, "kappa") == TEMPO_ERR_CONFIG);
    EXPECT(tempo_config_set_checks(cfg, "rf") == TEMPO_OK);
    EXPECT(tempo_run(cfg, &rep) == TEMPO_OK);
    EXPECT(tempo_report_pass(rep) == 1);
    EXPECT(tempo_report_check_count(rep) == 6);

    tempo_check_info info;
    EXPECT(tempo_report_check(rep, 1, &info) == TEMPO_OK);
    EXPECT(strcmp(info.name, "rf.euler[d=1]") == 0);
    const char* key = NULL;
    double value = 1.0;
    EXPECT(tempo_report_residual(rep, 1, 0, &key, &value) == TEMPO_OK);
    EXPECT(strcmp(key, "quadrature") == 0 && value < 1e-8);
    EXPECT(tempo_report_residual(rep, 99, 0, &key, &value) == TEMPO_ERR_ARGUMENT);

    EXPECT(tempo_report_json(rep, 0, &text) == TEMPO_OK);
    EXPECT(text && strstr(text, "\"timing\"") == NULL && strstr(text, "\"pass\": true"));
    tempo_string_free(text);

    tempo_report_free(rep);
    tempo_config_free(cfg);
    if (failures) fprintf(stderr, "%d failures\n", failures);
    return failures ? 1 : 0;
}
