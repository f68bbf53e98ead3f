#ifndef FUZZCARD_H
#define FUZZCARD_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum FcEditKind {
  FC_EDIT_KIND_INSERT = 0,
  FC_EDIT_KIND_REMOVE = 1,
  FC_EDIT_KIND_MOVE = 2,
} FcEditKind;

typedef enum FcInit {
  FC_INIT_EVEN = 0,
  FC_INIT_PERCENTILE = 1,
} FcInit;

typedef enum FcReplayMode {
  FC_REPLAY_MODE_STRICT = 0,
  FC_REPLAY_MODE_RECORDED = 1,
} FcReplayMode;

/*
 Result of every fallible call.
 */
typedef enum FcStatus {
  FC_STATUS_OK = 0,
  FC_STATUS_NULL_ARGUMENT = 1,
  FC_STATUS_INVALID_UTF8 = 2,
  FC_STATUS_INVALID_JSON = 3,
  FC_STATUS_INVALID_ARGUMENT = 4,
  FC_STATUS_BUFFER_TOO_SMALL = 5,
  /*
   The operation is not allowed at the session's current stage.
   */
  FC_STATUS_ILLEGAL_STAGE = 6,
  /*
   A card edit would break the chain; the chain is left unchanged.
   */
  FC_STATUS_INVALID_EDIT = 7,
  /*
   The data or chains cannot produce a valid result.
   */
  FC_STATUS_UNPROCESSABLE = 8,
  FC_STATUS_REPLAY_FAILED = 9,
  FC_STATUS_PANIC = 10,
} FcStatus;

/*
 A card chain.
 */
typedef struct FcChain FcChain;

/*
 An elicitation session.
 */
typedef struct FcSession FcSession;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL after a
 success. The pointer stays valid until the next call on the thread.
 */
const char *fc_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *fc_version(void);

/*
 Releases a string returned by this library. NULL is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void fc_string_free(char *s);

/*
 Encodes `len` strictly increasing values running from `lower` to
 `upper` as a chain of `10^precision` cards. Anchors are labelled
 `t_0 .. t_{len-1}`.

 # Safety
 `values` must point to `len` doubles; `out` must be writable.
 */
enum FcStatus fc_chain_encode(double lower,
                              double upper,
                              const double *values,
                              uintptr_t len,
                              uint32_t precision,
                              struct FcChain **out);

/*
 Builds a chain from `len` gap counts. `min_gap` is 1 for strict chains
 and 0 when ties are allowed.

 # Safety
 `gaps` must point to `len` integers; `out` must be writable.
 */
enum FcStatus fc_chain_from_gaps(double lower,
                                 double upper,
                                 const uint64_t *gaps,
                                 uintptr_t len,
                                 uint32_t precision,
                                 uint64_t min_gap,
                                 struct FcChain **out);

/*
 Parses a chain from its JSON form.

 # Safety
 `json` must be a NUL-terminated string; `out` must be writable.
 */
enum FcStatus fc_chain_from_json(const char *json, struct FcChain **out);

/*
 # Safety
 `chain` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_chain_to_json(const struct FcChain *chain, char **out);

/*
 Number of anchors; zero for NULL.

 # Safety
 `chain` must be NULL or a live handle.
 */
uintptr_t fc_chain_anchor_count(const struct FcChain *chain);

/*
 Copies the gap counts into `out`. `written` receives the number of gaps
 even when the buffer is too small.

 # Safety
 `chain` must be a live handle, `out` must hold `capacity` integers and
 `written` must be NULL or writable.
 */
enum FcStatus fc_chain_gaps(const struct FcChain *chain,
                            uint64_t *out,
                            uintptr_t capacity,
                            uintptr_t *written);

/*
 Decodes every anchor to its value.

 # Safety
 As for [`fc_chain_gaps`], with `out` holding `capacity` doubles.
 */
enum FcStatus fc_chain_decode(const struct FcChain *chain,
                              double *out,
                              uintptr_t capacity,
                              uintptr_t *written);

/*
 Applies one edit in place. `target_gap_index` is read only for moves.
 On failure the chain is unchanged.

 # Safety
 `chain` must be a live handle.
 */
enum FcStatus fc_chain_apply_edit(struct FcChain *chain,
                                  enum FcEditKind kind,
                                  uintptr_t gap_index,
                                  uintptr_t target_gap_index,
                                  uint64_t count);

/*
 # Safety
 `chain` must be NULL or a handle not yet freed.
 */
void fc_chain_free(struct FcChain *chain);

/*
 Runs C-FKM on `n` observations within `[lower, upper]` and writes the
 `k` centroids to `centroids`. `iterations` and `converged` may be NULL.

 # Safety
 `data` must hold `n` doubles and `centroids` room for `k`.
 */
enum FcStatus fc_cfkm_fit(const double *data,
                          uintptr_t n,
                          double lower,
                          double upper,
                          uintptr_t k,
                          double fuzzifier,
                          enum FcInit init,
                          double tolerance,
                          uintptr_t max_iter,
                          double *centroids,
                          uintptr_t *iterations,
                          bool *converged);

/*
 Starts a session. `dataset_json` is a dataset document such as
 `{"kind":"values","values":[...],"bounds":[a,b]}`; `params_json` may be
 NULL for the defaults.

 # Safety
 String arguments must be NUL-terminated; `out` must be writable.
 */
enum FcStatus fc_session_new(const char *dataset_json,
                             const char *params_json,
                             struct FcSession **out);

/*
 Restores a session from [`fc_session_to_json`] output.

 # Safety
 `json` must be NUL-terminated; `out` must be writable.
 */
enum FcStatus fc_session_from_json(const char *json, struct FcSession **out);

/*
 # Safety
 `session` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_session_to_json(const struct FcSession *session, char **out);

/*
 Writes the current stage name, e.g. `"step1_proposed"`.

 # Safety
 `session` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_session_stage(const struct FcSession *session, char **out);

/*
 Produces the next proposal. `request_json` is NULL for Steps 1 and 2 and
 `{"class":0,"side":"right","k_side":3}` for a Step-3 side.

 # Safety
 `session` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_session_advance(struct FcSession *session, const char *request_json, char **out);

/*
 Applies a JSON array of edits to the open chain, all or nothing, and
 returns the edited chain. `target` selects `"levels"` or `"breakpoints"`
 in Step 3 and may be NULL otherwise.

 # Safety
 `session` must be a live handle; strings NUL-terminated or NULL where
 allowed; `out` must be writable.
 */
enum FcStatus fc_session_apply_edits(struct FcSession *session,
                                     const char *target,
                                     const char *edits_json,
                                     char **out);

/*
 Validates the open stage. `request_json` may be NULL to commit the
 edited chains as they stand.

 # Safety
 `session` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_session_commit(struct FcSession *session, const char *request_json, char **out);

/*
 Freezes the session and returns partition, centroids, cores and transcript.

 # Safety
 `session` must be a live handle; `out` must be writable.
 */
enum FcStatus fc_session_finalize(struct FcSession *session, char **out);

/*
 # Safety
 `session` must be NULL or a handle not yet freed.
 */
void fc_session_free(struct FcSession *session);

/*
 Replays a transcript (a JSON array of entries) against a dataset.

 # Safety
 String arguments must be NUL-terminated; `out` must be writable.
 */
enum FcStatus fc_replay(const char *dataset_json,
                        const char *transcript_json,
                        enum FcReplayMode mode,
                        struct FcSession **out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* FUZZCARD_H */
