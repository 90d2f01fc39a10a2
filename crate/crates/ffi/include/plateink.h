#ifndef PLATEINK_H
#define PLATEINK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PiStatus {
  PI_STATUS_OK = 0,
  PI_STATUS_NULL_ARGUMENT = 1,
  PI_STATUS_INVALID_UTF8 = 2,
  PI_STATUS_LOAD_FAILED = 3,
  PI_STATUS_PARSE_FAILED = 4,
  PI_STATUS_REFUSED = 5,
  PI_STATUS_RENDER_FAILED = 6,
  PI_STATUS_IO_FAILED = 7,
  PI_STATUS_INVALID_ARGUMENT = 8,
  PI_STATUS_PANICKED = 9,
} PiStatus;

// Dataset, asset library and the current composition.
typedef struct PiEngine PiEngine;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failure on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *pi_last_error_message(void);

// Opens a dataset manifest and an asset library directory. On success
// `*out` receives a handle to release with [`pi_engine_free`].
//
// # Safety
// `dataset_path` and `assets_dir` must be NUL-terminated strings and `out`
// a valid pointer.
enum PiStatus pi_engine_open(const char *dataset_path,
                             const char *assets_dir,
                             struct PiEngine **out);

// Releases an engine. Null is ignored.
//
// # Safety
// `engine` must come from [`pi_engine_open`] and not be used afterwards.
void pi_engine_free(struct PiEngine *engine);

// Applies one JSON command. Returns `Refused` when the engine rejects it,
// leaving the state unchanged. When `out_events` is non-null it receives the
// JSON array of resulting events either way.
//
// # Safety
// `engine` must be a live handle and `command_json` a NUL-terminated string.
enum PiStatus pi_engine_apply_command(struct PiEngine *engine,
                                      const char *command_json,
                                      char **out_events);

// Current revision, or 0 for a null handle.
//
// # Safety
// `engine` must be null or a live handle.
uint64_t pi_engine_revision(const struct PiEngine *engine);

// Current state as state-file JSON.
//
// # Safety
// `engine` must be a live handle and `out` a valid pointer.
enum PiStatus pi_engine_state_json(const struct PiEngine *engine, char **out);

// # Safety
// `engine` must be a live handle and `path` a NUL-terminated string.
enum PiStatus pi_engine_save_state(const struct PiEngine *engine, const char *path);

// Replaces the current state with a saved one.
//
// # Safety
// `engine` must be a live handle and `path` a NUL-terminated string.
enum PiStatus pi_engine_load_state(struct PiEngine *engine, const char *path);

// Renders the current state to PNG bytes. `camera` is null for the default
// camera or `px,py,pz,lx,ly,lz,ux,uy,uz,fov`. Release the buffer with
// [`pi_buffer_free`].
//
// # Safety
// `engine` must be a live handle, `camera` null or a NUL-terminated string,
// and `out_data`/`out_len` valid pointers.
enum PiStatus pi_engine_render_png(const struct PiEngine *engine,
                                   uint32_t width,
                                   uint32_t height,
                                   const char *camera,
                                   uint8_t **out_data,
                                   size_t *out_len);

// # Safety
// `data`/`len` must come from [`pi_engine_render_png`]. Null is ignored.
void pi_buffer_free(uint8_t *data, size_t len);

// # Safety
// `s` must be a string returned by this library. Null is ignored.
void pi_string_free(char *s);

// One xorshift64* step: writes the output and the next state.
//
// # Safety
// `out_value` and `out_state` must be valid pointers.
enum PiStatus pi_prng_next(uint64_t state, uint64_t *out_value, uint64_t *out_state);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLATEINK_H */
