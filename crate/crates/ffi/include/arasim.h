#ifndef ARASIM_H
#define ARASIM_H

#pragma once

/* Generated by cbindgen from the arasim-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum AraStatus {
  AraStatus_Ok = 0,
  AraStatus_NullArgument = 1,
  AraStatus_InvalidUtf8 = 2,
  AraStatus_ParseError = 3,
  AraStatus_InvalidSpec = 4,
  AraStatus_CapacityError = 5,
  AraStatus_ContractError = 6,
  AraStatus_ConfigError = 7,
  AraStatus_TraceError = 8,
  AraStatus_ProtocolError = 9,
  AraStatus_SimulationError = 10,
  AraStatus_PlanError = 11,
  AraStatus_IoError = 12,
  AraStatus_InternalError = 13,
} AraStatus;

/**
 * Parsed, validated system specification.
 */
typedef struct AraSpecHandle AraSpecHandle;

/**
 * A synthesized interconnect: crossbar topology plus bank-to-DMAC map.
 */
typedef struct AraSynthHandle AraSynthHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ara_version(void);

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *ara_last_error(void);

/**
 * Release a string returned through an out parameter.
 *
 * # Safety
 * `s` must have been produced by this library and not freed before.
 */
void ara_string_free(char *s);

/**
 * Parse an ARA specification XML document.
 *
 * # Safety
 * `xml` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum AraStatus ara_spec_parse(const char *xml, struct AraSpecHandle **out);

/**
 * # Safety
 * `h` must come from [`ara_spec_parse`] and not already be freed.
 */
void ara_spec_free(struct AraSpecHandle *h);

/**
 * Canonical JSON dump of a parsed specification.
 *
 * # Safety
 * `h` must be a live handle; `out` must be a valid pointer.
 */
enum AraStatus ara_spec_to_json(const struct AraSpecHandle *h, char **out);

/**
 * Banks needed so any `connectivity` simultaneously active accelerators can
 * hold one bank per port. Pass `connectivity = 0` for the spec's value.
 *
 * # Safety
 * `h` must be a live handle; `out` must be a valid pointer.
 */
enum AraStatus ara_spec_buffer_demand(const struct AraSpecHandle *h,
                                      uint32_t connectivity,
                                      uint64_t *out);

/**
 * Synthesize the partial crossbar and interleaved network. Set
 * `private_buffers` for one dedicated bank per port; `connectivity = 0`
 * uses the spec's value.
 *
 * # Safety
 * `h` must be a live handle; `out` must be a valid pointer.
 */
enum AraStatus ara_synthesize(const struct AraSpecHandle *h,
                              bool private_buffers,
                              uint32_t connectivity,
                              struct AraSynthHandle **out);

/**
 * # Safety
 * `h` must come from [`ara_synthesize`] and not already be freed.
 */
void ara_synth_free(struct AraSynthHandle *h);

/**
 * Topology and interleave map as one JSON document (the `synth` file
 * format of the command-line tool).
 *
 * # Safety
 * `h` must be a live handle; `out` must be a valid pointer.
 */
enum AraStatus ara_synth_to_json(const struct AraSynthHandle *h, char **out);

/**
 * # Safety
 * `h` must be a live handle; `out` must be a valid pointer.
 */
enum AraStatus ara_synth_cross_points(const struct AraSynthHandle *h, uint64_t *out);

/**
 * # Safety
 * `h` must be a live handle; `out` must be a valid pointer.
 */
enum AraStatus ara_synth_num_banks(const struct AraSynthHandle *h, uint64_t *out);

/**
 * # Safety
 * `h` must be a live handle; `out` must be a valid pointer.
 */
enum AraStatus ara_synth_buffer_demand(const struct AraSynthHandle *h, uint64_t *out);

/**
 * Whether the synthesized topology passed the exhaustive subset oracle.
 *
 * # Safety
 * `h` must be a live handle; `out` must be a valid pointer.
 */
enum AraStatus ara_synth_feasible(const struct AraSynthHandle *h, bool *out);

/**
 * Simulate a workload and return the performance report as JSON.
 *
 * Exactly one of `trace_text` (trace file contents) and `pattern`
 * (generator syntax such as `all_parallel:2`) must be non-NULL. `synth` may
 * be NULL to synthesize the spec's shared topology on the fly. `overrides`
 * is an optional `;`-separated `key=value` list applied to the platform
 * model.
 *
 * # Safety
 * Non-NULL pointers must be valid; strings must be NUL-terminated.
 */
enum AraStatus ara_simulate(const struct AraSpecHandle *spec,
                            const struct AraSynthHandle *synth,
                            const char *trace_text,
                            const char *pattern,
                            const char *overrides,
                            char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ARASIM_H */
