"""Pure-Python kernel backend.

Mirrors the compiled extension exactly: same selection rules, same
integer arithmetic, bit-identical outputs.  XOR folding rides on
CPython's big-int XOR, which runs at C speed per call.
"""

from __future__ import annotations

from array import array
from bisect import bisect_left

_HUGE = 1 << 62


def xor_fold(blobs) -> bytes:
    width = 0
    acc = 0
    for blob in blobs:
        if len(blob) > width:
            width = len(blob)
        acc ^= int.from_bytes(blob, "little")
    return acc.to_bytes(width, "little")


def greedy_assign(xs, ys, zs, order, cell_keys, cell_pts, cell_w, g):
    n = len(xs)
    assigned = bytearray(n)
    group_of = array("q", bytes(8 * n))
    for i in range(n):
        group_of[i] = -1

    max_cx = max(xs) // cell_w
    max_cy = max(ys) // cell_w
    max_cz = max(zs) // cell_w

    gid = 0
    remaining = n
    for seed in order:
        if assigned[seed]:
            continue
        assigned[seed] = 1
        remaining -= 1
        group_of[seed] = gid
        k = g - 1
        if k > remaining:
            k = remaining
        if k > 0:
            sel_d2 = [_HUGE] * k
            sel_idx = [-1] * k
            found = 0
            sx = xs[seed]
            sy = ys[seed]
            sz = zs[seed]
            scx = sx // cell_w
            scy = sy // cell_w
            scz = sz // cell_w
            # furthest ring that can still hold a grid cell
            rmax = max(scx, max_cx - scx, scy, max_cy - scy, scz, max_cz - scz)
            r = 0
            while r <= rmax:
                for cx, cy, cz in _ring(scx, scy, scz, r, max_cx, max_cy, max_cz):
                    key = (cx << 42) | (cy << 21) | cz
                    pos = bisect_left(cell_keys, key)
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
                            while j > 0 and (
                                d2 < sel_d2[j - 1] or (d2 == sel_d2[j - 1] and p < sel_idx[j - 1])
                            ):
                                sel_d2[j] = sel_d2[j - 1]
                                sel_idx[j] = sel_idx[j - 1]
                                j -= 1
                            sel_d2[j] = d2
                            sel_idx[j] = p
                            if found < k:
                                found += 1
                # rings beyond r sit at least r*cell_w away, so once the
                # selection is full and strictly closer the search is exact
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
    return group_of


def _ring(scx, scy, scz, r, max_cx, max_cy, max_cz):
    """Cells at Chebyshev distance r from (scx, scy, scz), clipped to the grid."""
    if r == 0:
        yield (scx, scy, scz)
        return
    x_lo = scx - r
    x_hi = scx + r
    y_lo = scy - r
    y_hi = scy + r
    z_lo = scz - r
    z_hi = scz + r
    for cx in (x_lo, x_hi):
        if 0 <= cx <= max_cx:
            for cy in range(max(y_lo, 0), min(y_hi, max_cy) + 1):
                for cz in range(max(z_lo, 0), min(z_hi, max_cz) + 1):
                    yield (cx, cy, cz)
    for cy in (y_lo, y_hi):
        if 0 <= cy <= max_cy:
            for cx in range(max(x_lo + 1, 0), min(x_hi - 1, max_cx) + 1):
                for cz in range(max(z_lo, 0), min(z_hi, max_cz) + 1):
                    yield (cx, cy, cz)
    for cz in (z_lo, z_hi):
        if 0 <= cz <= max_cz:
            for cx in range(max(x_lo + 1, 0), min(x_hi - 1, max_cx) + 1):
                for cy in range(max(y_lo + 1, 0), min(y_hi - 1, max_cy) + 1):
                    yield (cx, cy, cz)
