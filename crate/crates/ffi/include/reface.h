#ifndef REFACE_H
#define REFACE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every call.
typedef enum RefaceStatus {
  REFACE_STATUS_OK = 0,
  REFACE_STATUS_NULL_POINTER = 1,
  REFACE_STATUS_INVALID_ARGUMENT = 2,
  REFACE_STATUS_IO = 3,
  REFACE_STATUS_PARSE = 4,
  REFACE_STATUS_VALIDATION = 5,
  REFACE_STATUS_INTEGRITY = 6,
  REFACE_STATUS_INTERNAL = 7,
} RefaceStatus;

typedef enum RefaceModality {
  REFACE_MODALITY_REID = 0,
  REFACE_MODALITY_FACE = 1,
} RefaceModality;

// A loaded run configuration.
typedef struct RefaceEngine RefaceEngine;

// An identity-indexed set of unit vectors.
typedef struct RefaceGallery RefaceGallery;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// Valid until the next call on the same thread.
const char *reface_last_error_message(void);

// Library version as a static nul-terminated string.
const char *reface_version(void);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void reface_string_free(char *s);

// Load a TOML run configuration.
//
// # Safety
// `config_path` must be a nul-terminated string; `out` must be writable.
enum RefaceStatus reface_engine_from_config(const char *config_path, struct RefaceEngine **out);

// Release an engine handle.
//
// # Safety
// `engine` must come from [`reface_engine_from_config`] and not have been freed. Null is ignored.
void reface_engine_free(struct RefaceEngine *engine);

// Override the fusion weight of a loaded configuration.
//
// # Safety
// `engine` must be a live handle.
enum RefaceStatus reface_engine_set_alpha(struct RefaceEngine *engine, double alpha);

// Label every query track and write the prediction file to `out_path`.
//
// # Safety
// `engine` must be a live handle; `out_path` a nul-terminated string.
enum RefaceStatus reface_engine_annotate(const struct RefaceEngine *engine, const char *out_path);

// Evaluate a prediction file against the configured manifests. Writes the
// metrics report as a JSON object to `out_json`.
//
// # Safety
// `engine` must be a live handle; `predictions_path` a nul-terminated
// string; `out_json` writable. The returned string is freed with [`reface_string_free`].
enum RefaceStatus reface_engine_evaluate(const struct RefaceEngine *engine,
                                         const char *predictions_path,
                                         char **out_json);

// Cosine similarity of two unit vectors of length `dim`.
//
// # Safety
// `u` and `v` must point to `dim` doubles; `out` must be writable.
enum RefaceStatus reface_cosine_similarity(const double *u,
                                           const double *v,
                                           uintptr_t dim,
                                           double *out);

// Element-wise `alpha * reid + (1 - alpha) * face` over `n` aligned scores.
//
// # Safety
// `reid`, `face` and `out` must each point to `n` doubles.
enum RefaceStatus reface_fuse(const double *reid,
                              const double *face,
                              uintptr_t n,
                              double alpha,
                              double *out);

// Whether both eyes and the nose lie inside `box` (`[x1, y1, x2, y2]`), edges included.
//
// # Safety
// `bbox` must point to 4 doubles, each keypoint to 2; `out` must be writable.
enum RefaceStatus reface_face_inside(const double *bbox,
                                     const double *left_eye,
                                     const double *right_eye,
                                     const double *nose,
                                     bool *out);

// Create an empty gallery.
//
// # Safety
// `out` must be writable.
enum RefaceStatus reface_gallery_new(enum RefaceModality modality, struct RefaceGallery **out);

// Release a gallery handle.
//
// # Safety
// `gallery` must come from [`reface_gallery_new`] and not have been freed. Null is ignored.
void reface_gallery_free(struct RefaceGallery *gallery);

// Add a vector under `label`. The vector is L2-normalized on insertion.
//
// # Safety
// `gallery` must be a live handle; strings nul-terminated; `vector` must point to `dim` doubles.
enum RefaceStatus reface_gallery_add(struct RefaceGallery *gallery,
                                     const char *label,
                                     const char *sample_id,
                                     const double *vector,
                                     uintptr_t dim);

// Total number of vectors in the gallery.
//
// # Safety
// `gallery` must be a live handle; `out` writable.
enum RefaceStatus reface_gallery_len(const struct RefaceGallery *gallery, uintptr_t *out);

// Highest similarity between `query` and any vector of `label`; 0 when the
// label is absent.
//
// # Safety
// `gallery` must be a live handle; `label` nul-terminated; `query` must point to `dim` doubles.
enum RefaceStatus reface_gallery_identity_confidence(const struct RefaceGallery *gallery,
                                                     const char *label,
                                                     const double *query,
                                                     uintptr_t dim,
                                                     double *out);

// Label a track of `n_images` unit vectors stored row-major in `vectors`.
// Writes the predicted label and its mean confidence.
//
// # Safety
// `gallery` must be a live handle; `vectors` must point to
// `n_images * dim` doubles; `out_label` and `out_score` writable. The label
// is freed with [`reface_string_free`].
enum RefaceStatus reface_gallery_predict_track(const struct RefaceGallery *gallery,
                                               const double *vectors,
                                               uintptr_t n_images,
                                               uintptr_t dim,
                                               char **out_label,
                                               double *out_score);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REFACE_H */
