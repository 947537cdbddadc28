#ifndef F2M_H
#define F2M_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum F2mStatus {
  F2M_STATUS_OK = 0,
  F2M_STATUS_NULL_POINTER = 1,
  F2M_STATUS_INVALID_ARGUMENT = 2,
  F2M_STATUS_IO = 3,
  F2M_STATUS_FORMAT = 4,
  F2M_STATUS_DEGENERATE = 5,
  F2M_STATUS_LOCALIZATION_FAILED = 6,
  F2M_STATUS_NON_CONVERGENCE = 7,
  F2M_STATUS_PANIC = 8,
} F2mStatus;

// A trained scene coordinate regressor.
typedef struct F2mModel F2mModel;

typedef struct F2mRansacOptions {
  // Inlier threshold on the reprojection error, in pixels.
  double max_reproj_error_px;
  size_t max_iterations;
  // Probability of having drawn an all-inlier sample before stopping early.
  double confidence;
  uint64_t seed;
  // Refine the best hypothesis on its inliers with Gauss-Newton.
  bool refine_on_inliers;
} F2mRansacOptions;

// Pinhole intrinsics in pixels.
typedef struct F2mIntrinsics {
  double fx;
  double fy;
  double cx;
  double cy;
} F2mIntrinsics;

// World-to-camera pose: rotation quaternion `(w, x, y, z)` and translation.
typedef struct F2mPose {
  double q[4];
  double t[3];
} F2mPose;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a NUL-terminated string with static lifetime.
const char *f2m_version(void);

// Message of the last failure on this thread, or null if none occurred.
// The pointer stays valid until the next failing call on this thread.
const char *f2m_last_error(void);

// Defaults: 12 px threshold, 10000 iterations, confidence 0.9999, seed 0,
// refinement on.
struct F2mRansacOptions f2m_ransac_options_default(void);

// Loads a model file and stores a new handle in `*out`.
//
// # Safety
// `path` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
enum F2mStatus f2m_model_load(const char *path, struct F2mModel **out);

// Releases a handle from [`f2m_model_load`]; null is ignored.
//
// # Safety
// `model` must be null or a handle not yet freed.
void f2m_model_free(struct F2mModel *model);

// Descriptor dimension expected by the model, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t f2m_model_input_dim(const struct F2mModel *model);

// Number of weights and biases, or 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
size_t f2m_model_param_count(const struct F2mModel *model);

// Regresses `n` descriptors (`n × dim` floats) to `n × 3` scene coordinates.
//
// # Safety
// `descriptors` must hold `n * dim` values and `out_coords` room for `n * 3`.
enum F2mStatus f2m_model_forward(const struct F2mModel *model,
                                 const float *descriptors,
                                 size_t n,
                                 size_t dim,
                                 double *out_coords);

// Robust pose from `n` 2D-3D matches: `pixels` holds `n × 2` values, `world`
// `n × 3`. `out_inliers` (n flags) and `out_n_inliers` may be null.
//
// # Safety
// Every non-null pointer must be valid for the sizes above.
enum F2mStatus f2m_estimate_pose(const double *pixels,
                                 const double *world,
                                 size_t n,
                                 const struct F2mIntrinsics *k,
                                 const struct F2mRansacOptions *options,
                                 struct F2mPose *out_pose,
                                 uint8_t *out_inliers,
                                 size_t *out_n_inliers);

// Regresses scene coordinates for one frame and estimates its pose.
// `keypoints` holds `n × 2` pixel positions, `descriptors` `n × dim` values.
//
// # Safety
// Every non-null pointer must be valid for the sizes above; `model` must be
// a live handle.
enum F2mStatus f2m_localize(const struct F2mModel *model,
                            const float *keypoints,
                            const float *descriptors,
                            size_t n,
                            size_t dim,
                            const struct F2mIntrinsics *k,
                            const struct F2mRansacOptions *options,
                            struct F2mPose *out_pose,
                            size_t *out_n_inliers);

// Camera-center distance (m) and rotation angle (deg) between two poses.
//
// # Safety
// All pointers must be valid.
enum F2mStatus f2m_pose_error(const struct F2mPose *estimate,
                              const struct F2mPose *truth,
                              double *out_m,
                              double *out_deg);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* F2M_H */
