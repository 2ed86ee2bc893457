#ifndef AREAFLUX_H
#define AREAFLUX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AfStatus {
  AF_STATUS_OK = 0,
  AF_STATUS_NULL_POINTER = 1,
  // A spec string, number or handle combination was rejected.
  AF_STATUS_INVALID_ARGUMENT = 2,
  // The operation is not defined on this surface kind.
  AF_STATUS_UNSUPPORTED = 3,
  // A computation failed (non-finite values, diverging integrator, ...).
  AF_STATUS_NUMERICAL = 4,
  AF_STATUS_PANIC = 5,
} AfStatus;

typedef enum AfSurfaceKind {
  AF_SURFACE_KIND_DISK = 0,
  AF_SURFACE_KIND_ANNULUS = 1,
  AF_SURFACE_KIND_MOBIUS = 2,
} AfSurfaceKind;

typedef struct AfForm AfForm;

typedef struct AfMap AfMap;

// A surface together with the defaults used to build maps and forms on it.
typedef struct AfSurface AfSurface;

// Quadrature for surface integrals: Gauss order and panel counts in x and y.
typedef struct AfQuadrature {
  uint32_t order;
  uint32_t panels_x;
  uint32_t panels_y;
} AfQuadrature;

// Both sides of the transgression identity for a pair of maps.
typedef struct AfTransgression {
  double f1;
  double f2;
  double f12;
  // `F(h1) + F(h2) − F(h1∘h2)`.
  double lhs;
  // The Euler class cocycle of the boundary maps.
  double rhs;
} AfTransgression;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static description of a status code.
const char *af_status_string(enum AfStatus status);

// Copies the message of the last failed call on this thread into `buf` (NUL terminated,
// truncated to `len`). Returns the full message length without the terminator.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t af_last_error(char *buf, size_t len);

// Creates a surface. `half_width` is the strip half-width and is ignored for the disk.
//
// # Safety
// `out` must be a valid pointer.
enum AfStatus af_surface_new(enum AfSurfaceKind kind, double half_width, struct AfSurface **out);

// # Safety
// `s` must be null or a handle from [`af_surface_new`] not yet freed.
void af_surface_free(struct AfSurface *s);

// # Safety
// `s` must be a live surface handle and `area` a valid pointer.
enum AfStatus af_surface_area(const struct AfSurface *s, double *area);

// Builds a map from a spec such as `"shear:t=1"` or `"twist:cx=0.5,cy=0,ax=0.2,ay=0.15,a=0.01"`.
//
// # Safety
// `s` must be a live surface handle, `spec` a NUL-terminated string and `out` valid.
enum AfStatus af_map_new(const struct AfSurface *s, const char *spec, struct AfMap **out);

// `outer ∘ inner` as a new handle.
//
// # Safety
// Both maps must be live handles and `out` valid.
enum AfStatus af_map_compose(const struct AfMap *outer,
                             const struct AfMap *inner,
                             struct AfMap **out);

// # Safety
// `m` must be null or a live map handle.
void af_map_free(struct AfMap *m);

// Evaluates the map at `p[0..2]`. `image` receives two values; `jacobian`, if not null,
// receives `Dg` row-major as four values.
//
// # Safety
// `p` and `image` must point to 2 doubles, `jacobian` to 4 or be null.
enum AfStatus af_map_apply(const struct AfMap *m, const double *p, double *image, double *jacobian);

// Builds a closed 1-form from a spec such as `"dx"`, `"dual:0"` or `"form:p=1,q=0"`.
//
// # Safety
// `s` must be a live surface handle, `spec` a NUL-terminated string and `out` valid.
enum AfStatus af_form_new(const struct AfSurface *s, const char *spec, struct AfForm **out);

// # Safety
// `f` must be null or a live form handle.
void af_form_free(struct AfForm *f);

// Flux of `m` paired with `lambda`. `quad` may be null for the default rule.
//
// # Safety
// Handles must be live, `quad` null or valid, `value` valid.
enum AfStatus af_flux(const struct AfMap *m,
                      const struct AfForm *lambda,
                      const struct AfQuadrature *quad,
                      double *value);

// Calabi invariant: on the disk the global one, on strips the local one over the cover patch
// `patch = [x0, x1, y0, y1]` with orientation sign `e_sign`.
//
// # Safety
// `m` must be live, `patch` null (disk only) or 4 doubles, `quad` null or valid, `value` valid.
enum AfStatus af_calabi(const struct AfMap *m,
                        const double *patch,
                        double e_sign,
                        const struct AfQuadrature *quad,
                        double *value);

// Both sides of the transgression identity on the Möbius band.
//
// # Safety
// Handles must be live, `quad` null or valid, `result` valid.
enum AfStatus af_transgression(const struct AfMap *h1,
                               const struct AfMap *h2,
                               const struct AfForm *lambda,
                               const struct AfQuadrature *quad,
                               struct AfTransgression *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* AREAFLUX_H */
