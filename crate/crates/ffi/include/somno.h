#ifndef SOMNO_H
#define SOMNO_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>
#include <stdbool.h>

/**
 * Result of every call.
 */
typedef enum SomnoStatus {
  SOMNO_STATUS_OK = 0,
  SOMNO_STATUS_NULL_POINTER = 1,
  SOMNO_STATUS_INVALID_ARGUMENT = 2,
  SOMNO_STATUS_BUFFER_TOO_SMALL = 3,
  SOMNO_STATUS_IO = 4,
  SOMNO_STATUS_FORMAT = 5,
  SOMNO_STATUS_WRONG_PHASE = 6,
  SOMNO_STATUS_INCOMPLETE = 7,
  SOMNO_STATUS_PANIC = 8,
} SomnoStatus;

/**
 * Session phase as reported by [`somno_session_phase`].
 */
typedef enum SomnoPhase {
  SOMNO_PHASE_INTAKE = 0,
  SOMNO_PHASE_STIMULATING = 1,
  SOMNO_PHASE_QUIET = 2,
  SOMNO_PHASE_FINALIZED = 3,
} SomnoPhase;

/**
 * A trained sleep-experience classifier.
 */
typedef struct SomnoExperienceNet SomnoExperienceNet;

/**
 * One closed-loop session.
 */
typedef struct SomnoSession SomnoSession;

/**
 * A trained epoch stager.
 */
typedef struct SomnoStageNet SomnoStageNet;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message for the most recent failure on this thread, or an empty
 * string. Valid until the next `somno_` call on the same thread.
 */
const char *somno_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *somno_version(void);

/**
 * Anti-alias filter and downsample `n` samples taken at `rate_hz` by
 * `factor`.
 *
 * # Safety
 * `x` must hold `n` doubles; `out` must have room for `out_cap` doubles.
 */
enum SomnoStatus somno_decimate(const double *x,
                                size_t n,
                                uint32_t rate_hz,
                                uint32_t factor,
                                double *out,
                                size_t out_cap,
                                size_t *out_len);

/**
 * Staging features of one 30 s epoch at 100 Hz (`n` must be 3000): five
 * relative band powers (delta, theta, alpha, sigma, beta) then log total
 * power.
 *
 * # Safety
 * `epoch` must hold `n` doubles; `out` must have room for 6 doubles.
 */
enum SomnoStatus somno_band_powers(const double *epoch, size_t n, double *out);

/**
 * Load a stage checkpoint. Free the handle with [`somno_stage_net_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SomnoStatus somno_stage_net_load(const char *path, struct SomnoStageNet **out);

/**
 * # Safety
 * `net` must come from [`somno_stage_net_load`] and not be freed twice.
 */
void somno_stage_net_free(struct SomnoStageNet *net);

/**
 * Stage code for one 30 s epoch at 100 Hz.
 *
 * # Safety
 * `net` must be a live handle; `epoch` must hold `n` doubles.
 */
enum SomnoStatus somno_stage_net_classify(const struct SomnoStageNet *net,
                                          const double *epoch,
                                          size_t n,
                                          uint8_t *stage);

/**
 * Load an experience checkpoint. Free with [`somno_experience_net_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum SomnoStatus somno_experience_net_load(const char *path, struct SomnoExperienceNet **out);

/**
 * # Safety
 * `net` must come from [`somno_experience_net_load`] and not be freed twice.
 */
void somno_experience_net_free(struct SomnoExperienceNet *net);

/**
 * Predict the experience code and its probability from 20 stage codes.
 *
 * # Safety
 * `net` must be a live handle; `stages` must hold `n` bytes.
 */
enum SomnoStatus somno_experience_net_predict(const struct SomnoExperienceNet *net,
                                              const uint8_t *stages,
                                              size_t n,
                                              uint8_t *experience,
                                              double *probability);

/**
 * Accuracy and two-class macro F1 of `preds` against `labels` (experience
 * codes).
 *
 * # Safety
 * `preds` and `labels` must each hold `n` bytes.
 */
enum SomnoStatus somno_metrics(const uint8_t *preds,
                               const uint8_t *labels,
                               size_t n,
                               double *acc,
                               double *f1);

/**
 * Encode one data frame. `samples` is channel-major,
 * `n_channels * n_samples` values; `seq` must be at least 1.
 *
 * # Safety
 * `samples` must hold `n_channels * n_samples` floats; `out` must have room
 * for `out_cap` bytes.
 */
enum SomnoStatus somno_frame_encode(uint64_t seq,
                                    uint64_t t0_ms,
                                    uint16_t n_channels,
                                    uint32_t n_samples,
                                    const float *samples,
                                    uint8_t *out,
                                    size_t out_cap,
                                    size_t *out_len);

/**
 * Decode the data frame at the start of `buf`. On success `*consumed` is the
 * frame length in bytes. Returns `SOMNO_STATUS_INCOMPLETE` if more bytes are
 * needed, `SOMNO_STATUS_FORMAT` on bad magic, CRC or payload.
 *
 * # Safety
 * `buf` must hold `len` bytes; `samples` must have room for `samples_cap`
 * floats; the scalar outputs must be writable.
 */
enum SomnoStatus somno_frame_decode(const uint8_t *buf,
                                    size_t len,
                                    uint64_t *seq,
                                    uint64_t *t0_ms,
                                    uint16_t *n_channels,
                                    uint32_t *n_samples,
                                    float *samples,
                                    size_t samples_cap,
                                    size_t *samples_len,
                                    size_t *consumed);

/**
 * Render a stimulus and write it as a 16-bit stereo 44.1 kHz WAV file.
 * Rain uses the built-in synthetic texture.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum SomnoStatus somno_stim_write_wav(uint32_t kind,
                                      double duration_s,
                                      uint64_t seed,
                                      double gain_dbfs,
                                      const char *path);

/**
 * Start a session. The models are copied, so their handles may be freed
 * afterwards. `answers` is intake text (`key = value` lines). `policy` is
 * policy text, or NULL for the built-in placeholder; `force_stimulus` below
 * 0 uses the policy, otherwise it names the stimulus code to play.
 *
 * # Safety
 * Handles must be live; strings NUL-terminated or NULL where allowed.
 */
enum SomnoStatus somno_session_new(const struct SomnoStageNet *stage,
                                   const struct SomnoExperienceNet *experience,
                                   const char *answers,
                                   const char *policy,
                                   int32_t force_stimulus,
                                   uint32_t stop_k,
                                   double gain_dbfs,
                                   struct SomnoSession **out);

/**
 * # Safety
 * `session` must come from [`somno_session_new`] and not be freed twice.
 */
void somno_session_free(struct SomnoSession *session);

/**
 * Classify one preprocessed 30 s epoch (3000 samples at 100 Hz) and advance
 * the session.
 *
 * # Safety
 * `session` must be live; `epoch` must hold `n` doubles.
 */
enum SomnoStatus somno_session_push_epoch(struct SomnoSession *session,
                                          const double *epoch,
                                          size_t n);

/**
 * Advance the session with an externally scored stage code.
 *
 * # Safety
 * `session` must be live.
 */
enum SomnoStatus somno_session_push_stage(struct SomnoSession *session, uint8_t stage);

/**
 * # Safety
 * `session` must be live; `phase` writable.
 */
enum SomnoStatus somno_session_phase(const struct SomnoSession *session, enum SomnoPhase *phase);

/**
 * Epoch at which the stimulus was stopped, or -1 while it is still playing.
 *
 * # Safety
 * `session` must be live; `epoch` writable.
 */
enum SomnoStatus somno_session_stop_epoch(const struct SomnoSession *session, int64_t *epoch);

/**
 * The stimulus code selected at session start.
 *
 * # Safety
 * `session` must be live; `kind` writable.
 */
enum SomnoStatus somno_session_stimulus(const struct SomnoSession *session, uint32_t *kind);

/**
 * JSON report of a finalized session, NUL-terminated. `*out_len` includes
 * the terminator.
 *
 * # Safety
 * `session` must be live; `out` must have room for `out_cap` bytes.
 */
enum SomnoStatus somno_session_report_json(const struct SomnoSession *session,
                                           char *out,
                                           size_t out_cap,
                                           size_t *out_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SOMNO_H */
