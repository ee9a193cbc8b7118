"""Point-cloud file I/O and synthetic clouds for desk-scale experiments.

The on-disk format is whitespace-separated text, one point per line:

    l h d R G B A

Coordinates are non-negative integers, R/G/B are integers in [0, 255],
and A is either an integer in [0, 255] or a real in [0, 1].  The alpha
convention is auto-detected once per file (a decimal point or exponent
anywhere in column 7 selects the normalized form) and must be uniform.
Lines starting with '#' and blank lines are ignored.  Files written by
:func:`write` read back as an equal cloud.
"""

from __future__ import annotations

import random

from .model import DisplayPoint, PointCloud, validate_cloud

SYNTH_KINDS = ("grid", "sphere_shell", "uniform_random")


class CloudParseError(ValueError):
    """A cloud file line could not be parsed; carries the 1-based line number."""

    def __init__(self, path, line_no, message):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class MixedAlphaConventionError(CloudParseError):
    """A file mixes 8-bit and normalized alpha values."""


def load(path) -> PointCloud:
    """Parse and validate a cloud file."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().split("\n")

    rows: list[tuple[int, list[str]]] = []
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) != 7:
            raise CloudParseError(path, line_no, f"expected 7 fields, found {len(fields)}")
        rows.append((line_no, fields))

    normalized_alpha = any("." in f[6] or "e" in f[6] or "E" in f[6] for _, f in rows)

    points = []
    for line_no, fields in rows:
        coords = []
        for name, token in zip("lhd", fields[:3]):
            try:
                value = int(token)
            except ValueError:
                raise CloudParseError(path, line_no, f"{name}={token!r} is not an integer") from None
            if value < 0:
                raise CloudParseError(path, line_no, f"{name}={value} is negative")
            coords.append(value)
        channels = []
        for name, token in zip("RGB", fields[3:6]):
            try:
                value = int(token)
            except ValueError:
                raise CloudParseError(path, line_no, f"{name}={token!r} is not an integer") from None
            if not 0 <= value <= 255:
                raise CloudParseError(path, line_no, f"{name}={value} outside [0, 255]")
            channels.append(value)
        alpha_token = fields[6]
        if normalized_alpha:
            try:
                alpha: int | float = float(alpha_token)
            except ValueError:
                raise CloudParseError(path, line_no, f"A={alpha_token!r} is not a number") from None
            if not 0.0 <= alpha <= 1.0:
                if "." not in alpha_token and "e" not in alpha_token and "E" not in alpha_token:
                    raise MixedAlphaConventionError(
                        path, line_no,
                        f"A={alpha_token} is 8-bit but this file uses normalized alpha",
                    )
                raise CloudParseError(path, line_no, f"A={alpha} outside [0, 1]")
        else:
            try:
                alpha = int(alpha_token)
            except ValueError:
                raise CloudParseError(path, line_no, f"A={alpha_token!r} is not an integer") from None
            if not 0 <= alpha <= 255:
                raise CloudParseError(path, line_no, f"A={alpha} outside [0, 255]")
        points.append(DisplayPoint(*coords, *channels, alpha))

    return validate_cloud(PointCloud(points=tuple(points)))


def write(cloud: PointCloud, path) -> None:
    """Write a cloud in the text format; inverse of :func:`load`."""
    alpha_types = {type(p.a) for p in cloud.points}
    if len(alpha_types) > 1:
        raise ValueError("cloud mixes 8-bit and normalized alpha; cannot pick a file convention")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("# l h d R G B A\n")
        for p in cloud.points:
            alpha = repr(p.a) if isinstance(p.a, float) else str(p.a)
            fh.write(f"{p.l} {p.h} {p.d} {p.r} {p.g} {p.b} {alpha}\n")


def synth(kind: str, n: int, extent: int, seed: int = 0) -> PointCloud:
    """Deterministically generate ``n`` distinct points inside an ``extent``-cell cube."""
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown synth kind {kind!r}; pick one of {SYNTH_KINDS}")
    if n < 0:
        raise ValueError(f"n={n} must be >= 0")
    if extent < 1 and n > 0:
        raise ValueError(f"extent={extent} holds no cells")
    capacity = extent ** 3
    if n > capacity:
        raise ValueError(f"n={n} points do not fit in {extent}^3={capacity} distinct cells")

    if n == 0:
        return PointCloud(points=())

    if kind == "grid":
        cells = [_unrank(i, extent) for i in range(n)]
    elif kind == "sphere_shell":
        center = (extent - 1) / 2.0
        radius_sq = center * center
        ranked = sorted(
            range(capacity),
            key=lambda i: (abs(_dist_sq(_unrank(i, extent), center) - radius_sq), i),
        )
        cells = [_unrank(i, extent) for i in ranked[:n]]
    else:
        rng = random.Random(seed)
        cells = [_unrank(i, extent) for i in rng.sample(range(capacity), n)]

    points = tuple(DisplayPoint(l, h, d) for l, h, d in cells)
    return validate_cloud(PointCloud(points=points))


def _unrank(i: int, extent: int) -> tuple[int, int, int]:
    return (i % extent, (i // extent) % extent, i // (extent * extent))


def _dist_sq(cell: tuple[int, int, int], center: float) -> float:
    return sum((c - center) ** 2 for c in cell)
