# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend. Semantics are identical to _pure."""

from libc.stdlib cimport malloc, free


def xor_fold(list blobs) -> bytes:
    cdef Py_ssize_t width = 0, n, i
    cdef bytes blob
    for blob in blobs:
        n = len(blob)
        if n > width:
            width = n
    out = bytearray(width)
    if width == 0:
        return bytes(out)
    cdef unsigned char[::1] acc = out
    cdef const unsigned char[::1] src
    cdef unsigned char *ap = &acc[0]
    cdef const unsigned char *sp
    for blob in blobs:
        n = len(blob)
        if n == 0:
            continue
        src = blob
        sp = &src[0]
        for i in range(n):
            ap[i] ^= sp[i]
    return bytes(out)


cdef inline long long _bisect_left(const long long[::1] keys, long long key, Py_ssize_t n) noexcept:
    cdef Py_ssize_t lo = 0, hi = n, mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if keys[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


def greedy_assign(object xs_a, object ys_a, object zs_a, object order_a,
                  object cell_keys_a, object cell_pts_a, long long cell_w, long long g):
    cdef const long long[::1] xs = xs_a
    cdef const long long[::1] ys = ys_a
    cdef const long long[::1] zs = zs_a
    cdef const long long[::1] order = order_a
    cdef const long long[::1] cell_keys = cell_keys_a
    cdef const long long[::1] cell_pts = cell_pts_a
    cdef Py_ssize_t n = xs.shape[0]

    from array import array
    out = array("q", bytes(8 * n))
    cdef long long[::1] group_of = out

    cdef unsigned char *assigned = <unsigned char *> malloc(n)
    cdef long long *sel_d2 = NULL
    cdef long long *sel_idx = NULL
    cdef long long kmax = g - 1 if g - 1 < n else n
    if kmax > 0:
        sel_d2 = <long long *> malloc(kmax * sizeof(long long))
        sel_idx = <long long *> malloc(kmax * sizeof(long long))
    if assigned == NULL or (kmax > 0 and (sel_d2 == NULL or sel_idx == NULL)):
        free(assigned); free(sel_d2); free(sel_idx)
        raise MemoryError()

    cdef Py_ssize_t i
    cdef long long seed, gid, remaining, k, found, r, rmax, bound
    cdef long long sx, sy, sz, scx, scy, scz, p, dx, dy, dz, d2, j, pos
    cdef long long max_cx = 0, max_cy = 0, max_cz = 0
    cdef long long cx, cy, cz, x_lo, x_hi, y_lo, y_hi, z_lo, z_hi
    cdef long long cy0, cy1, cz0, cz1, cx0, cx1
    cdef long long key
    cdef long long HUGE = <long long> 1 << 62

    for i in range(n):
        assigned[i] = 0
        group_of[i] = -1
        if xs[i] // cell_w > max_cx:
            max_cx = xs[i] // cell_w
        if ys[i] // cell_w > max_cy:
            max_cy = ys[i] // cell_w
        if zs[i] // cell_w > max_cz:
            max_cz = zs[i] // cell_w

    gid = 0
    remaining = n
    try:
        for i in range(n):
            seed = order[i]
            if assigned[seed]:
                continue
            assigned[seed] = 1
            remaining -= 1
            group_of[seed] = gid
            k = g - 1
            if k > remaining:
                k = remaining
            if k > 0:
                for j in range(k):
                    sel_d2[j] = HUGE
                    sel_idx[j] = -1
                found = 0
                sx = xs[seed]; sy = ys[seed]; sz = zs[seed]
                scx = sx // cell_w; scy = sy // cell_w; scz = sz // cell_w
                rmax = scx
                if max_cx - scx > rmax: rmax = max_cx - scx
                if scy > rmax: rmax = scy
                if max_cy - scy > rmax: rmax = max_cy - scy
                if scz > rmax: rmax = scz
                if max_cz - scz > rmax: rmax = max_cz - scz
                r = 0
                while r <= rmax:
                    x_lo = scx - r; x_hi = scx + r
                    y_lo = scy - r; y_hi = scy + r
                    z_lo = scz - r; z_hi = scz + r
                    if r == 0:
                        found = _scan_cell(scx, scy, scz, cell_keys, cell_pts, n,
                                           assigned, xs, ys, zs, sx, sy, sz,
                                           sel_d2, sel_idx, k, found)
                    else:
                        cy0 = y_lo if y_lo > 0 else 0
                        cy1 = y_hi if y_hi < max_cy else max_cy
                        cz0 = z_lo if z_lo > 0 else 0
                        cz1 = z_hi if z_hi < max_cz else max_cz
                        if x_lo >= 0:
                            for cy in range(cy0, cy1 + 1):
                                for cz in range(cz0, cz1 + 1):
                                    found = _scan_cell(x_lo, cy, cz, cell_keys, cell_pts, n,
                                                       assigned, xs, ys, zs, sx, sy, sz,
                                                       sel_d2, sel_idx, k, found)
                        if x_hi <= max_cx:
                            for cy in range(cy0, cy1 + 1):
                                for cz in range(cz0, cz1 + 1):
                                    found = _scan_cell(x_hi, cy, cz, cell_keys, cell_pts, n,
                                                       assigned, xs, ys, zs, sx, sy, sz,
                                                       sel_d2, sel_idx, k, found)
                        cx0 = x_lo + 1 if x_lo + 1 > 0 else 0
                        cx1 = x_hi - 1 if x_hi - 1 < max_cx else max_cx
                        if y_lo >= 0:
                            for cx in range(cx0, cx1 + 1):
                                for cz in range(cz0, cz1 + 1):
                                    found = _scan_cell(cx, y_lo, cz, cell_keys, cell_pts, n,
                                                       assigned, xs, ys, zs, sx, sy, sz,
                                                       sel_d2, sel_idx, k, found)
                        if y_hi <= max_cy:
                            for cx in range(cx0, cx1 + 1):
                                for cz in range(cz0, cz1 + 1):
                                    found = _scan_cell(cx, y_hi, cz, cell_keys, cell_pts, n,
                                                       assigned, xs, ys, zs, sx, sy, sz,
                                                       sel_d2, sel_idx, k, found)
                        cy0 = y_lo + 1 if y_lo + 1 > 0 else 0
                        cy1 = y_hi - 1 if y_hi - 1 < max_cy else max_cy
                        if z_lo >= 0:
                            for cx in range(cx0, cx1 + 1):
                                for cy in range(cy0, cy1 + 1):
                                    found = _scan_cell(cx, cy, z_lo, cell_keys, cell_pts, n,
                                                       assigned, xs, ys, zs, sx, sy, sz,
                                                       sel_d2, sel_idx, k, found)
                        if z_hi <= max_cz:
                            for cx in range(cx0, cx1 + 1):
                                for cy in range(cy0, cy1 + 1):
                                    found = _scan_cell(cx, cy, z_hi, cell_keys, cell_pts, n,
                                                       assigned, xs, ys, zs, sx, sy, sz,
                                                       sel_d2, sel_idx, k, found)
                    if found >= k:
                        bound = r * cell_w
                        if bound * bound > sel_d2[k - 1]:
                            break
                    r += 1
                for j in range(k):
                    p = sel_idx[j]
                    assigned[p] = 1
                    group_of[p] = gid
                remaining -= k
            gid += 1
    finally:
        free(assigned)
        free(sel_d2)
        free(sel_idx)
    return out


cdef inline long long _scan_cell(long long cx, long long cy, long long cz,
                                 const long long[::1] cell_keys, const long long[::1] cell_pts,
                                 Py_ssize_t n, unsigned char *assigned,
                                 const long long[::1] xs, const long long[::1] ys,
                                 const long long[::1] zs,
                                 long long sx, long long sy, long long sz,
                                 long long *sel_d2, long long *sel_idx,
                                 long long k, long long found) noexcept:
    cdef long long key = (cx << 42) | (cy << 21) | cz
    cdef Py_ssize_t pos = _bisect_left(cell_keys, key, n)
    cdef long long p, dx, dy, dz, d2, j
    while pos < n and cell_keys[pos] == key:
        p = cell_pts[pos]
        pos += 1
        if assigned[p]:
            continue
        dx = xs[p] - sx
        dy = ys[p] - sy
        dz = zs[p] - sz
        d2 = dx * dx + dy * dy + dz * dz
        if d2 < sel_d2[k - 1] or (d2 == sel_d2[k - 1] and p < sel_idx[k - 1]):
            j = k - 1
            while j > 0 and (d2 < sel_d2[j - 1] or
                             (d2 == sel_d2[j - 1] and p < sel_idx[j - 1])):
                sel_d2[j] = sel_d2[j - 1]
                sel_idx[j] = sel_idx[j - 1]
                j -= 1
            sel_d2[j] = d2
            sel_idx[j] = p
            if found < k:
                found += 1
    return found
