/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef PHYSTRACK_H
#define PHYSTRACK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PtStatus {
  PT_STATUS_OK = 0,
  PT_STATUS_NULL_ARGUMENT = 1,
  PT_STATUS_INVALID_ARGUMENT = 2,
  PT_STATUS_CONFIG = 3,
  PT_STATUS_IO = 4,
  PT_STATUS_MODEL = 5,
  PT_STATUS_TRACKER = 6,
  PT_STATUS_BUFFER_TOO_SMALL = 7,
  PT_STATUS_PANIC = 8,
} PtStatus;

typedef enum PtHand {
  PT_HAND_LEFT = 0,
  PT_HAND_RIGHT = 1,
} PtHand;

typedef struct PtDepthReader PtDepthReader;

typedef struct PtModel PtModel;

typedef struct PtTracker PtTracker;

/**
 * Pinhole camera. `near` and `far` clip the depth range in meters.
 */
typedef struct PtIntrinsics {
  uint32_t width;
  uint32_t height;
  double fx;
  double fy;
  double cx;
  double cy;
  double near;
  double far;
} PtIntrinsics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full message length
 * including the terminator, so a zero-length call sizes the buffer.
 */
size_t pt_last_error(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pt_version(void);

/**
 * The builtin 17-bone hand, or its mirror image for the left hand.
 */
enum PtStatus pt_model_default(enum PtHand hand, struct PtModel **out);

/**
 * Parses a model file's JSON text.
 */
enum PtStatus pt_model_from_json(const char *json, struct PtModel **out);

void pt_model_free(struct PtModel *model);

enum PtStatus pt_model_body_count(const struct PtModel *model, size_t *out);

/**
 * Starts a tracker for one hand in the open pose at `root` (x, y, z, then
 * quaternion w, x, y, z; null means palm toward the camera 45 cm away).
 * `config_json` may be null for defaults. The model is copied.
 */
enum PtStatus pt_tracker_new(const struct PtModel *model,
                             enum PtHand hand,
                             const double *root,
                             const char *config_json,
                             struct PtTracker **out);

/**
 * Adds a second hand, or replaces the tracker of an existing one.
 */
enum PtStatus pt_tracker_add_hand(struct PtTracker *tracker,
                                  const struct PtModel *model,
                                  enum PtHand hand,
                                  const double *root);

void pt_tracker_free(struct PtTracker *tracker);

/**
 * Tracks one depth frame: `count` row-major depths in meters, 0 for no
 * return, `count == width * height`.
 */
enum PtStatus pt_tracker_step(struct PtTracker *tracker,
                              const struct PtIntrinsics *intrinsics,
                              const float *depth,
                              size_t count);

/**
 * Writes the hand's best pose, 7 values per body (x, y, z, w, qx, qy,
 * qz). `written` receives the number of values needed; with a short
 * buffer nothing is copied and BufferTooSmall is returned.
 */
enum PtStatus pt_tracker_pose(const struct PtTracker *tracker,
                              enum PtHand hand,
                              double *out,
                              size_t capacity,
                              size_t *written);

/**
 * Winning strategy of the last frame (0 normal, 1 gross motion, 2
 * grasping, 3 finger flip, 4 feature seeded) and its errTotal in meters.
 * Fails before the first step or when the hand saw no points.
 */
enum PtStatus pt_tracker_last_result(const struct PtTracker *tracker,
                                     enum PtHand hand,
                                     int32_t *strategy,
                                     double *err_total);

enum PtStatus pt_depth_reader_open(const char *path, struct PtDepthReader **out);

/**
 * Header of an open sequence. Any output pointer may be null. The file
 * does not store clip planes, so `near` and `far` come back as the
 * reader's permissive defaults.
 */
enum PtStatus pt_depth_reader_info(const struct PtDepthReader *reader,
                                   struct PtIntrinsics *intrinsics,
                                   double *frame_rate,
                                   uint32_t *frame_count);

/**
 * Reads the next frame into `out` (width * height floats). `has_frame`
 * is set to 0 after the last frame.
 */
enum PtStatus pt_depth_reader_next(struct PtDepthReader *reader,
                                   float *out,
                                   size_t capacity,
                                   int32_t *has_frame);

void pt_depth_reader_free(struct PtDepthReader *reader);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHYSTRACK_H */
