/* xstab C API: saliency-explainer stability evaluation.
 *
 * All functions return XSTAB_OK (0) on success or a negative status code.
 * xstab_last_error() describes the most recent failure on the calling thread.
 * Objects returned through out-parameters are owned by the caller and must be
 * released with the matching *_free function. Out-parameters are untouched on
 * failure.
 */
#ifndef XSTAB_H
#define XSTAB_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define XSTAB_API __declspec(dllexport)
#else
#define XSTAB_API __attribute__((visibility("default")))
#endif

typedef int xstab_status;

enum {
  XSTAB_OK = 0,
  XSTAB_E_IO = -1,
  XSTAB_E_FORMAT = -2,
  XSTAB_E_EMPTY_INPUT = -3,
  XSTAB_E_INVALID_PARAMETER = -4,
  XSTAB_E_SHAPE_MISMATCH = -5,
  XSTAB_E_DEGENERATE_QUAD = -6,
  XSTAB_E_ZERO_MASS = -7,
  XSTAB_E_NEGATIVE_VALUE = -8,
  XSTAB_E_NON_FINITE_INPUT = -9,
  XSTAB_E_ZERO_VARIANCE = -10,
  XSTAB_E_IDENTICAL_INPUTS = -11,
  XSTAB_E_NO_VALID_VARIANTS = -12,
  XSTAB_E_ZERO_BASELINE = -13,
  XSTAB_E_LENGTH_MISMATCH = -14,
  XSTAB_E_EMPTY_FIXATIONS = -15,
  XSTAB_E_EMPTY_DATASET = -16,
  XSTAB_E_EMPTY_TRAINING_SET = -17,
  XSTAB_E_INVALID_LAYER = -18,
  XSTAB_E_EMPTY_LEVEL = -19,
  XSTAB_E_CONFIG = -20,
  XSTAB_E_DATA = -21,
  XSTAB_E_UNKNOWN = -99
};

typedef struct xstab_image xstab_image;
typedef struct xstab_map xstab_map;
typedef struct xstab_model xstab_model;

/* Library metadata / diagnostics. */
XSTAB_API const char* xstab_version(void);
XSTAB_API const char* xstab_last_error(void);
XSTAB_API const char* xstab_status_name(xstab_status status);

/* Images (8-bit RGB, row-major, interleaved). */
XSTAB_API xstab_status xstab_image_create(size_t width, size_t height, const uint8_t* rgb,
                                          xstab_image** out);
XSTAB_API xstab_status xstab_image_load(const char* path, xstab_image** out);
XSTAB_API xstab_status xstab_image_save(const xstab_image* img, const char* path);
XSTAB_API void xstab_image_free(xstab_image* img);
XSTAB_API size_t xstab_image_width(const xstab_image* img);
XSTAB_API size_t xstab_image_height(const xstab_image* img);
/* Copies width*height*3 bytes into buf (buf_len must be at least that). */
XSTAB_API xstab_status xstab_image_pixels(const xstab_image* img, uint8_t* buf, size_t buf_len);

/* Saliency maps (float64, row-major). */
XSTAB_API xstab_status xstab_map_create(size_t width, size_t height, const double* values,
                                        xstab_map** out);
XSTAB_API xstab_status xstab_map_load_npy(const char* path, xstab_map** out);
XSTAB_API xstab_status xstab_map_save_npy(const xstab_map* map, const char* path);
/* Writes the map through the fixed heat ramp; base may be NULL for a plain
 * heat image, otherwise it is blended under the map at 50% alpha. */
XSTAB_API xstab_status xstab_map_save_heatmap(const xstab_map* map, const xstab_image* base,
                                              const char* path);
XSTAB_API void xstab_map_free(xstab_map* map);
XSTAB_API size_t xstab_map_width(const xstab_map* map);
XSTAB_API size_t xstab_map_height(const xstab_map* map);
XSTAB_API xstab_status xstab_map_values(const xstab_map* map, double* buf, size_t buf_len);

/* Distortions: materializes every (level, variant) grid cell for the given
 * spec JSON (same schema as the evaluate config's "distortions" entries) and
 * writes <out_dir>/<image_id>/<family>/<level>/<variant>.png + manifest.json.
 * images_dir must hold .png/.ppm files; their stems become image ids. */
XSTAB_API xstab_status xstab_generate_corpus(const char* images_dir, const char* specs_json_path,
                                             const char* out_dir);

/* Gaze-fixation density map for one image id from a fixation CSV/JSON file.
 * sigma_fov <= 0 selects the width/20 default. */
XSTAB_API xstab_status xstab_gfdm(const char* fixations_path, const char* image_id, size_t width,
                                  size_t height, double sigma_fov, xstab_map** out);

/* Models. */
XSTAB_API xstab_status xstab_model_load(const char* dir, xstab_model** out);
XSTAB_API xstab_status xstab_model_save(const xstab_model* model, const char* dir);
/* Trains the built-in CNN on the seeded synthetic-shapes set. */
XSTAB_API xstab_status xstab_model_train_toy(size_t epochs, double lr, size_t samples,
                                             uint64_t seed, xstab_model** out);
XSTAB_API void xstab_model_free(xstab_model* model);
XSTAB_API size_t xstab_model_layer_count(const xstab_model* model);
XSTAB_API xstab_status xstab_model_classify(const xstab_model* model, const xstab_image* img,
                                            size_t* label);

/* Explanation maps at out_w x out_h. method is "fem", "gradcam", or "mlfem".
 * For mlfem, weights must hold xstab_model_layer_count() non-negative layer
 * weights; pass NULL for uniform weights. fem_k is the threshold multiplier
 * used by fem/mlfem (1.0 is the default; ignored by gradcam). */
XSTAB_API xstab_status xstab_explain(const xstab_model* model, const xstab_image* img,
                                     const char* method, double fem_k, const double* weights,
                                     size_t n_weights, size_t out_w, size_t out_h,
                                     xstab_map** out);

/* Fits the mlfem layer-fusion weights on clean images vs reference maps.
 * images and references are parallel arrays of length n; weights_out must
 * hold xstab_model_layer_count() doubles. */
XSTAB_API xstab_status xstab_fit_fusion_weights(const xstab_model* model,
                                                const xstab_image* const* images,
                                                const xstab_map* const* references, size_t n,
                                                double fem_k, double* weights_out,
                                                size_t n_weights);

/* Metrics. */
XSTAB_API xstab_status xstab_pcc(const xstab_map* a, const xstab_map* b, double* out);
XSTAB_API xstab_status xstab_sim(const xstab_map* a, const xstab_map* b, double* out);
XSTAB_API xstab_status xstab_image_distance(const xstab_image* a, const xstab_image* b,
                                            double* out);
XSTAB_API xstab_status xstab_map_distance(const xstab_map* a, const xstab_map* b, double* out);
XSTAB_API xstab_status xstab_lipschitz_ratio(const xstab_image* x, const xstab_image* xp,
                                             const xstab_map* e, const xstab_map* ep,
                                             double* out);

/* One-shot evaluation pipeline. config_json_path follows the documented run
 * config schema; out_dir receives report.json plus the CSV tables. seed >= 0
 * overrides the config's master seed; pass -1 to keep the config's value. */
XSTAB_API xstab_status xstab_evaluate(const char* config_json_path, const char* out_dir,
                                      int64_t seed_override);

/* Regenerates the CSV tables from an existing report.json. */
XSTAB_API xstab_status xstab_report_csvs(const char* report_json_path, const char* out_dir);

/* Writes a seeded synthetic-shapes study corpus: <out>/images/img_###.png and
 * <out>/fixations.csv. */
XSTAB_API xstab_status xstab_synth_corpus(const char* out_dir, size_t n_images, uint64_t seed);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* XSTAB_H */
