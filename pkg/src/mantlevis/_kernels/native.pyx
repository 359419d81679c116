# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled ray-marching kernel: per-ray scalar loops over shell segments.

Same sample placement, brush test, transfer-function lookup and front-to-back
compositing as the pure-python fallback; this is the hot path.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport asin, atan2, exp, floor, fmax, fmin, INFINITY, M_PI, sqrt

cnp.import_array()

BACKEND = "native"

DEF CODE_X = -1
DEF CODE_Y = -2
DEF CODE_Z = -3
DEF CODE_DEPTH = -4


cdef inline double _trilinear(const float[:, :, :, ::1] v, Py_ssize_t f,
                              Py_ssize_t i0, Py_ssize_t j0,
                              Py_ssize_t k0, Py_ssize_t k1,
                              double tr, double tlat, double tlon) nogil:
    cdef double c00 = v[f, i0, j0, k0] * (1.0 - tlon) + v[f, i0, j0, k1] * tlon
    cdef double c01 = v[f, i0, j0 + 1, k0] * (1.0 - tlon) + v[f, i0, j0 + 1, k1] * tlon
    cdef double c10 = v[f, i0 + 1, j0, k0] * (1.0 - tlon) + v[f, i0 + 1, j0, k1] * tlon
    cdef double c11 = v[f, i0 + 1, j0 + 1, k0] * (1.0 - tlon) + v[f, i0 + 1, j0 + 1, k1] * tlon
    cdef double c0 = c00 * (1.0 - tlat) + c01 * tlat
    cdef double c1 = c10 * (1.0 - tlat) + c11 * tlat
    return c0 * (1.0 - tr) + c1 * tr


cdef inline double _tf_channel(const double[::1] xs, const double[:, ::1] rgba,
                               Py_ssize_t n, double x, Py_ssize_t c) nogil:
    cdef Py_ssize_t lo, hi, mid
    if x <= xs[0]:
        return rgba[0, c]
    if x >= xs[n - 1]:
        return rgba[n - 1, c]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if xs[mid] <= x:
            lo = mid
        else:
            hi = mid
    cdef double w = (x - xs[lo]) / (xs[hi] - xs[lo])
    return rgba[lo, c] * (1.0 - w) + rgba[hi, c] * w


def march_rays(const double[:, ::1] origins,
               const double[:, ::1] dirs,
               double r_inner, double r_outer,
               int n_r, int n_lat, int n_lon,
               const float[:, :, :, ::1] fields,
               int color_index,
               const cnp.int64_t[::1] res_codes,
               const double[::1] res_lo,
               const double[::1] res_hi,
               const double[::1] tf_values,
               const double[:, ::1] tf_rgba,
               double opacity_scale, double step,
               const double[::1] jitter,
               double early_threshold,
               bint track_sample_depth):
    cdef Py_ssize_t n = origins.shape[0]
    cdef Py_ssize_t n_res = res_codes.shape[0]
    cdef Py_ssize_t n_tf = tf_values.shape[0]

    rgba_arr = np.zeros((n, 4), dtype=np.float64)
    depth_arr = np.full(n, np.inf, dtype=np.float64)
    cdef double[:, ::1] rgba = rgba_arr
    cdef double[::1] depth = depth_arr

    cdef double dr = (r_outer - r_inner) / (n_r - 1)
    cdef double dlat = 180.0 / (n_lat - 1)
    cdef double dlon = 360.0 / n_lon

    cdef double dmin = INFINITY
    cdef double dmax = -INFINITY

    cdef Py_ssize_t ray, seg, q, i0, j0, k0, k1, code
    cdef int kk
    cdef double ox, oy, oz, dx, dy, dz, b, oo, disc_o, disc_i, s
    cdef double tn_out, tf_out, tn_in, tf_in
    cdef double seg0_a, seg0_b, seg1_a, seg1_b, t0, t1, t
    cdef double px, py, pz, radius, lat, lon, fr, flat, flon
    cdef double tr, tlat, tlon, val, cval, a_tf, alpha, trans
    cdef bint accept, pierced
    cdef double cr, cg, cb

    with nogil:
        for ray in range(n):
            ox = origins[ray, 0]; oy = origins[ray, 1]; oz = origins[ray, 2]
            dx = dirs[ray, 0]; dy = dirs[ray, 1]; dz = dirs[ray, 2]
            b = ox * dx + oy * dy + oz * dz
            oo = ox * ox + oy * oy + oz * oz

            disc_o = b * b - (oo - r_outer * r_outer)
            if disc_o <= 0.0:
                continue
            s = sqrt(disc_o)
            tn_out = -b - s
            tf_out = -b + s
            if tf_out <= 0.0:
                continue
            disc_i = b * b - (oo - r_inner * r_inner)
            pierced = disc_i > 0.0 and (-b + sqrt(disc_i)) > 0.0
            if pierced:
                s = sqrt(disc_i)
                tn_in = -b - s
                tf_in = -b + s
                seg0_a = fmax(tn_out, 0.0)
                seg0_b = fmax(tn_in, 0.0)
                seg1_a = fmax(tf_in, 0.0)
                seg1_b = tf_out
            else:
                seg0_a = fmax(tn_out, 0.0)
                seg0_b = tf_out
                seg1_a = 0.0
                seg1_b = -1.0

            for seg in range(2):
                if seg == 0:
                    t0 = seg0_a; t1 = seg0_b
                else:
                    t0 = seg1_a; t1 = seg1_b
                if t1 <= t0:
                    continue
                kk = 0
                while True:
                    t = t0 + (kk + jitter[ray]) * step
                    if t >= t1 or rgba[ray, 3] >= early_threshold:
                        break
                    kk += 1
                    px = ox + t * dx; py = oy + t * dy; pz = oz + t * dz
                    radius = sqrt(px * px + py * py + pz * pz)
                    if radius < r_inner or radius > r_outer:
                        continue
                    lat = asin(fmin(fmax(pz / radius, -1.0), 1.0)) * (180.0 / M_PI)
                    lon = atan2(py, px) * (180.0 / M_PI)
                    if lon < 0.0:
                        lon += 360.0

                    fr = (radius - r_inner) / dr
                    i0 = <Py_ssize_t> floor(fr)
                    if i0 > n_r - 2:
                        i0 = n_r - 2
                    if i0 < 0:
                        i0 = 0
                    tr = fr - i0
                    if tr < 0.0:
                        tr = 0.0
                    elif tr > 1.0:
                        tr = 1.0

                    flat = (lat + 90.0) / dlat
                    j0 = <Py_ssize_t> floor(flat)
                    if j0 > n_lat - 2:
                        j0 = n_lat - 2
                    if j0 < 0:
                        j0 = 0
                    tlat = flat - j0
                    if tlat < 0.0:
                        tlat = 0.0
                    elif tlat > 1.0:
                        tlat = 1.0

                    flon = lon / dlon
                    k0 = (<Py_ssize_t> floor(flon)) % n_lon
                    tlon = flon - floor(flon)
                    k1 = (k0 + 1) % n_lon

                    accept = True
                    for q in range(n_res):
                        code = res_codes[q]
                        if code >= 0:
                            val = _trilinear(fields, code, i0, j0, k0, k1, tr, tlat, tlon)
                        elif code == CODE_X:
                            val = px
                        elif code == CODE_Y:
                            val = py
                        elif code == CODE_Z:
                            val = pz
                        else:
                            val = r_outer - radius
                        if val < res_lo[q] or val > res_hi[q]:
                            accept = False
                            break
                    if not accept:
                        continue

                    cval = _trilinear(fields, color_index, i0, j0, k0, k1, tr, tlat, tlon)
                    a_tf = _tf_channel(tf_values, tf_rgba, n_tf, cval, 3)
                    cr = _tf_channel(tf_values, tf_rgba, n_tf, cval, 0)
                    cg = _tf_channel(tf_values, tf_rgba, n_tf, cval, 1)
                    cb = _tf_channel(tf_values, tf_rgba, n_tf, cval, 2)
                    alpha = 1.0 - exp(-opacity_scale * a_tf * step)
                    trans = 1.0 - rgba[ray, 3]
                    rgba[ray, 0] += trans * alpha * cr
                    rgba[ray, 1] += trans * alpha * cg
                    rgba[ray, 2] += trans * alpha * cb
                    rgba[ray, 3] += trans * alpha
                    if rgba[ray, 3] >= 0.5 and depth[ray] == INFINITY:
                        depth[ray] = t
                    if track_sample_depth:
                        if r_outer - radius < dmin:
                            dmin = r_outer - radius
                        if r_outer - radius > dmax:
                            dmax = r_outer - radius
    return rgba_arr, depth_arr, (dmin, dmax)
