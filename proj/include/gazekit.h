#ifndef GAZEKIT_H
#define GAZEKIT_H

/* C interface to the gazekit gaze-analytics library.
 *
 * Conventions:
 *   - Every fallible call returns gk_status; GK_OK is 0. On failure,
 *     gk_last_error() returns a thread-local message describing the problem.
 *   - Output strings (char**) are allocated by the library and must be
 *     released with gk_string_free().
 *   - Opaque handles are created by gk_*_load/_from_* calls and released with
 *     the matching gk_*_free(). Handles are immutable and safe to share
 *     across threads.
 *   - Structured options travel as JSON text ("config_json"); unknown keys
 *     are ignored, missing keys take the documented defaults.
 */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum gk_status {
    GK_OK = 0,
    GK_ERR_IO = 1,
    GK_ERR_PARSE = 2,
    GK_ERR_VALIDATION = 3,
    GK_ERR_INVALID_ARGUMENT = 4,
    GK_ERR_INTERNAL = 5
} gk_status;

typedef struct gk_dataset gk_dataset;
typedef struct gk_annotations gk_annotations;
typedef struct gk_model gk_model;

/* Library version string, e.g. "0.1.0". Owned by the library. */
const char* gk_version(void);

/* Message of the most recent failure on this thread; empty after success. */
const char* gk_last_error(void);

void gk_string_free(char* s);

/* ---- datasets (JSON Lines of viewing sessions) ---- */

gk_status gk_dataset_load(const char* path, int width_px, int height_px,
                          double pixels_per_degree, gk_dataset** out);
gk_status gk_dataset_from_jsonl(const char* text, int width_px, int height_px,
                                double pixels_per_degree, gk_dataset** out);
gk_status gk_dataset_save(const gk_dataset* ds, const char* path);
gk_status gk_dataset_to_jsonl(const gk_dataset* ds, char** out_text);
gk_status gk_dataset_summary_json(const gk_dataset* ds, char** out_json);
void gk_dataset_free(gk_dataset* ds);

/* ---- part annotations (single JSON document) ---- */

gk_status gk_annotations_load(const char* path, gk_annotations** out);
gk_status gk_annotations_from_json(const char* text, gk_annotations** out);
gk_status gk_annotations_save(const gk_annotations* ann, const char* path);
void gk_annotations_free(gk_annotations* ann);

/* ---- synthetic data ----
 * gk_synth_desk_spec builds the default desk-scale generator spec (disjoint
 * per-category hotspots). gk_synthesize runs any spec and returns the dataset
 * (JSON Lines), the part annotations (JSON), and the ground-truth labels
 * (JSON Lines). Identical (spec, seed) gives byte-identical output. */

gk_status gk_synth_desk_spec(int n_categories, int sketches_per_category,
                             int subjects_per_sketch, int parts_per_category, int width_px,
                             int height_px, double pixels_per_degree, char** out_spec_json);
gk_status gk_synthesize(const char* spec_json, uint64_t seed, char** out_dataset_jsonl,
                        char** out_annotations_json, char** out_labels_jsonl);

/* ---- fixation maps ----
 * gk_fixmap_render pools the sketch's fixations (or one subject's when
 * subject_id is non-NULL), builds the Gaussian fixation map, optionally
 * standardizes it, and writes the image plus its .meta.json sidecar.
 * config: {"sigma_px": 0 (0 = one degree), "use_duration": true,
 *          "standardize": false, "style": "gray"|"heat"}
 * gk_catmap_render builds per-category maps (standardized per-sketch maps
 * averaged, optionally marginalized against the grand mean) and writes one
 * image per category into out_dir as <prefix><category>.<pgm|ppm>.
 * config adds: {"regime": "both", "marginalize": true, "prefix": "catmap_"} */

gk_status gk_fixmap_render(const gk_dataset* ds, const char* sketch_id,
                           const char* subject_id, const char* config_json,
                           const char* image_path, char** out_stats_json);
gk_status gk_catmap_render(const gk_dataset* ds, const char* config_json, const char* out_dir,
                           char** out_report_json);

/* ---- analyses ----
 * ioc config: {"sigma_px": 0, "use_duration": true, "n_random": 100,
 *              "regime": "both", "threads": 1}
 * loso config: {"sigma_px": 0, "use_duration": true, "train_regime": "both",
 *               "test_regime": "both", "threads": 1}
 * part-assign config: {"max_snap_px": 0, "regime": "both"}
 * similarity config: {"max_snap_px": 0, "n_random": 100, "regime": "both",
 *                     "drop_unassigned": false, "threads": 1} */

gk_status gk_ioc_report(const gk_dataset* ds, const char* config_json, uint64_t seed,
                        char** out_json);
gk_status gk_loso_report(const gk_dataset* ds, const char* config_json, char** out_json);
gk_status gk_correlation_report(const gk_dataset* ds, const char* regime, char** out_json);
gk_status gk_assign_parts_jsonl(const gk_dataset* ds, const gk_annotations* ann,
                                const char* config_json, char** out_jsonl);
gk_status gk_similarity_report(const gk_dataset* ds, const gk_annotations* ann,
                               const char* config_json, uint64_t seed, char** out_json);

/* ---- part-label models ----
 * Training labels come from polygon annotations (ann) or from a ground-truth
 * label file (labels_jsonl text); exactly one must be supplied.
 * train config: {"category": null (null = all sessions), "max_snap_px": 0,
 *                "drop_unassigned": false, "smoothing": 1.0, "regime": "both",
 *                "n_f": 0 (0 = the dataset's maximum sequence length)}
 * predict config: {"decoder": "pmap"|"viterbi"|"dtw"|"random", plus the train
 *                  config keys for the dtw route}. pmap/viterbi/random need
 *                  `model`; dtw needs `train` plus annotations or labels.
 * evaluate config: {"train_frac": 0.6, "trials": 10, "k_augment": 50,
 *                   "max_dev_deg": 1.0, "smoothing": 1.0, "max_snap_px": 0,
 *                   "drop_unassigned": false, "regime": "both",
 *                   "decoders": ["pmap","viterbi","dtw","random"],
 *                   "threads": 1} */

gk_status gk_train_hmm(const gk_dataset* ds, const gk_annotations* ann,
                       const char* labels_jsonl, const char* config_json, gk_model** out);
gk_status gk_model_save(const gk_model* m, const char* path);
gk_status gk_model_load(const char* path, gk_model** out);
gk_status gk_model_to_json(const gk_model* m, char** out_json);
void gk_model_free(gk_model* m);

gk_status gk_predict_parts(const gk_model* model, const gk_dataset* test,
                           const gk_dataset* train, const gk_annotations* ann,
                           const char* labels_jsonl, const char* config_json, uint64_t seed,
                           char** out_json);
gk_status gk_evaluate_parts(const gk_dataset* ds, const gk_annotations* ann,
                            const char* labels_jsonl, const char* config_json, uint64_t seed,
                            char** out_json);

#ifdef __cplusplus
}
#endif

#endif /* GAZEKIT_H */
