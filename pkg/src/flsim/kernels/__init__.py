"""Hot kernels with a compiled core and a pure-Python fallback.

Two operations dominate runtime at display scale and are therefore backed
by an optional Cython extension: byte-wise XOR folding of group payloads
and greedy nearest-neighbor group assignment over the point mesh.  The
backend is picked once at import: the compiled module when it built,
otherwise the pure implementation.  Set FLSIM_PURE=1 to force the pure
backend.  Both backends are exact integer/byte computations and produce
bit-identical results; ``benchmarks/bench_kernels.py`` compares their
throughput.
"""

from __future__ import annotations

import os
from array import array
from collections.abc import Sequence

from . import _pure

_impl = _pure
BACKEND = "pure"

if os.environ.get("FLSIM_PURE") != "1":
    try:
        from . import _core  # type: ignore[attr-defined]

        _impl = _core
        BACKEND = "compiled"
    except ImportError:
        pass

_COORD_LIMIT = 1 << 21  # packed cell keys hold 21 bits per axis


def xor_fold(blobs: Sequence[bytes]) -> bytes:
    """XOR all blobs together, zero-padding each to the longest length."""
    return _impl.xor_fold(list(blobs))


def _spread_bits(v: int) -> int:
    # spaces the low 21 bits of v three apart (classic Morton spreading)
    v &= 0x1FFFFF
    v = (v | (v << 32)) & 0x1F00000000FFFF
    v = (v | (v << 16)) & 0x1F0000FF0000FF
    v = (v | (v << 8)) & 0x100F00F00F00F00F
    v = (v | (v << 4)) & 0x10C30C30C30C30C3
    v = (v | (v << 2)) & 0x1249249249249249
    return v


def morton_key(l: int, h: int, d: int) -> int:
    """Interleave the bits of three 21-bit coordinates into one sort key."""
    return _spread_bits(l) | (_spread_bits(h) << 1) | (_spread_bits(d) << 2)


def greedy_group_assign(coords: Sequence[tuple[int, int, int]], g: int) -> list[int]:
    """Partition points into groups of at most ``g`` by greedy proximity.

    Seeds are taken in Morton order; each seed grabs its g-1 nearest
    unassigned neighbors by exact squared Euclidean distance with ties
    broken by point index, so the result does not depend on the backend's
    search order.  Returns the group id of every point; ids are dense and
    numbered in formation order.
    """
    if g < 1:
        raise ValueError(f"group size g={g} must be >= 1")
    n = len(coords)
    if n == 0:
        return []

    xs = array("q", bytes(8 * n))
    ys = array("q", bytes(8 * n))
    zs = array("q", bytes(8 * n))
    for i, (x, y, z) in enumerate(coords):
        if not (0 <= x < _COORD_LIMIT and 0 <= y < _COORD_LIMIT and 0 <= z < _COORD_LIMIT):
            raise ValueError(f"coordinate {coords[i]} outside supported cell range")
        xs[i] = x
        ys[i] = y
        zs[i] = z

    order = array("q", sorted(range(n), key=lambda i: (morton_key(xs[i], ys[i], zs[i]), i)))

    # Uniform grid for neighbor pruning: cell width is the smallest power of
    # two keeping the grid no finer than ~4 cells per point.  Any width gives
    # the same assignment (the search is exact); this one keeps it fast.
    span_x = max(xs) + 1
    span_y = max(ys) + 1
    span_z = max(zs) + 1
    cell_w = 1
    while ((span_x + cell_w - 1) // cell_w) * ((span_y + cell_w - 1) // cell_w) * (
        (span_z + cell_w - 1) // cell_w
    ) > 4 * n:
        cell_w *= 2

    keyed = sorted(
        range(n),
        key=lambda i: ((xs[i] // cell_w << 42) | (ys[i] // cell_w << 21) | (zs[i] // cell_w), i),
    )
    cell_pts = array("q", keyed)
    cell_keys = array(
        "q",
        [(xs[i] // cell_w << 42) | (ys[i] // cell_w << 21) | (zs[i] // cell_w) for i in keyed],
    )

    group_of = _impl.greedy_assign(xs, ys, zs, order, cell_keys, cell_pts, cell_w, g)
    return list(group_of)
