/* C interface for the plumber leakage-template workbench.
 *
 * Kept in sync with crates/ffi/src/lib.rs by hand; a cbindgen.toml is
 * provided for regeneration (`cbindgen --crate plumber-ffi`) where the
 * tool is available.
 */

#ifndef PLUMBER_H
#define PLUMBER_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes returned by every fallible function. */
enum {
  PLUMBER_OK = 0,
  PLUMBER_ERR_NULL = 1,    /* required pointer argument was null */
  PLUMBER_ERR_INVALID = 2, /* invalid parameter or configuration */
  PLUMBER_ERR_PARSE = 3,   /* text input failed to parse */
  PLUMBER_ERR_RANGE = 4,   /* value outside its permitted range */
  PLUMBER_ERR_UTF8 = 5,    /* string argument was not valid UTF-8 */
  PLUMBER_ERR_IO = 6,      /* file system error */
  PLUMBER_ERR_BUFFER = 7   /* output buffer too small */
};

/* Address field ids for plumber_extract_field. */
enum {
  PLUMBER_FIELD_OFFSET = 0,
  PLUMBER_FIELD_SET = 1,
  PLUMBER_FIELD_TAG = 2,
  PLUMBER_FIELD_WORD = 3,
  PLUMBER_FIELD_BUS = 4,
  PLUMBER_FIELD_PAGE = 5
};

/* Replacement policy ids for plumber_sim_new. */
enum {
  PLUMBER_POLICY_LRU = 0,
  PLUMBER_POLICY_FIFO = 1,
  PLUMBER_POLICY_RANDOM = 2
};

/* Simulator feature flags for plumber_sim_new. */
enum {
  PLUMBER_SIM_NO_PREVICTION = 1u << 0,
  PLUMBER_SIM_NO_PREFETCHER = 1u << 1
};

/* Opaque handles. */
typedef struct PlumberGeometry PlumberGeometry;
typedef struct PlumberSim PlumberSim;
typedef struct PlumberLt PlumberLt;

typedef struct PlumberCounters {
  uint64_t instructions;
  uint64_t previctions;
  uint64_t prefetch_issues;
  uint64_t branches;
  uint64_t mispredictions;
} PlumberCounters;

/* Library version string; static storage, do not free. */
const char *plumber_version(void);

/* Copy the calling thread's last error message into buf (NUL-terminated).
 * Returns PLUMBER_ERR_BUFFER when the message was truncated. */
int plumber_last_error(char *buf, size_t len);

/* Geometry: construction, field extraction, composition. */
PlumberGeometry *plumber_geometry_default(void);
int plumber_geometry_new(uint64_t line_size, uint64_t num_sets,
                         uint32_t associativity, uint64_t bus_size,
                         uint64_t page_size, uint32_t addr_bits,
                         PlumberGeometry **out);
void plumber_geometry_free(PlumberGeometry *geom);
int plumber_extract_field(const PlumberGeometry *geom, uint64_t addr,
                          int field, uint64_t *out);
int plumber_compose_addr(const PlumberGeometry *geom, uint64_t tag,
                         uint64_t set, uint64_t offset, uint64_t *out);

/* Simulator: one demand load at a time, precondition loads, probes. */
int plumber_sim_new(const PlumberGeometry *geom, int policy, uint64_t seed,
                    uint32_t flags, PlumberSim **out);
void plumber_sim_free(PlumberSim *sim);
int plumber_sim_reset(PlumberSim *sim);
int plumber_sim_load(PlumberSim *sim, uint64_t addr, size_t instr_idx,
                     int *hit_out);
int plumber_sim_preload(PlumberSim *sim, uint64_t addr);
int plumber_sim_probe(const PlumberSim *sim, uint64_t addr, int *cached_out);
int plumber_sim_counters(const PlumberSim *sim, PlumberCounters *out);

/* Specification language utilities. */
int plumber_gts_testcase_count(const char *text, const PlumberGeometry *geom,
                               uint64_t seed, uint64_t cap, uint64_t *out);

/* Leakage templates: load from .lt.json, classify access traces. */
int plumber_lt_load_file(const char *path, PlumberLt **out);
void plumber_lt_free(PlumberLt *lt);
int plumber_lt_classify_trace(const PlumberLt *lt,
                              const PlumberGeometry *geom,
                              const uint64_t *instr_addrs,
                              const uint64_t *data_addrs, size_t n,
                              char *label_buf, size_t buf_len);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* PLUMBER_H */
