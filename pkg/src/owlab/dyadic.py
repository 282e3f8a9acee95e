"""Dyadic cube geometry: level/offset indexing, grid windows, and the
two-cube comparison kernel.

Conventions fixed here and used everywhere else:

* A cube at level ``j`` with integer offset ``k`` (length-``n`` vector) is
  ``2**-j * ([0,1)**n + k)``; its side is ``2**-j`` and its anchor is the
  lower-left corner ``2**-j * k``.
* Distances between cubes are Euclidean distances between anchors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

__all__ = [
    "Cube",
    "Window",
    "KernelParams",
    "comparison_kernel",
    "min_enclosing_cube",
    "build_window",
    "cube_at",
]


@dataclass(frozen=True)
class Cube:
    """Dyadic cube 2^-j([0,1)^n + k), identified by level and offset."""

    n: int
    j: int
    k: tuple[int, ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be positive")
        if len(self.k) != self.n:
            raise ValueError(f"offset has length {len(self.k)}, expected {self.n}")

    @property
    def side(self) -> float:
        return 2.0 ** (-self.j)

    @property
    def volume(self) -> float:
        return 2.0 ** (-self.j * self.n)

    @property
    def anchor(self) -> np.ndarray:
        """Lower-left corner, the cube's reference point."""
        return np.asarray(self.k, dtype=float) * self.side

    @property
    def lower(self) -> np.ndarray:
        return self.anchor

    @property
    def upper(self) -> np.ndarray:
        return (np.asarray(self.k, dtype=float) + 1.0) * self.side

    def parent(self) -> "Cube":
        return Cube(self.n, self.j - 1, tuple(ki >> 1 for ki in self.k))

    def children(self) -> list["Cube"]:
        out = []
        for bits in range(2**self.n):
            off = tuple(2 * self.k[i] + ((bits >> i) & 1) for i in range(self.n))
            out.append(Cube(self.n, self.j + 1, off))
        return out

    def ancestor(self, levels_up: int) -> "Cube":
        return Cube(self.n, self.j - levels_up, tuple(ki >> levels_up for ki in self.k))

    def contains_point(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return bool(np.all(x >= self.lower) and np.all(x < self.upper))

    def contains_cube(self, other: "Cube") -> bool:
        if other.j < self.j:
            return False
        return other.ancestor(other.j - self.j) == self


def cube_at(n: int, j: int, x) -> Cube:
    """The unique level-j dyadic cube containing the point x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (n,):
        raise ValueError(f"point has shape {x.shape}, expected ({n},)")
    k = tuple(int(np.floor(xi * 2.0**j)) for xi in x)
    return Cube(n, j, k)


@dataclass(frozen=True)
class KernelParams:
    """Exponents (a, b, c) of the cube comparison kernel."""

    a: float
    b: float
    c: float

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or self.c < 0:
            raise ValueError("kernel exponents must be nonnegative")

    def swapped(self) -> "KernelParams":
        return KernelParams(self.b, self.a, self.c)


def comparison_kernel(params: KernelParams, q: Cube, r: Cube) -> float:
    """Size/distance comparison kernel of two cubes.

    Returns ``(1 + l(R)/l(Q))**a * (1 + l(Q)/l(R))**b
    * (1 + |x_Q - x_R| / max(l(Q), l(R)))**c`` with Euclidean anchor
    distance.  Swapping the cubes swaps the roles of a and b.
    """
    if q.n != r.n:
        raise ValueError("cubes must have the same dimension")
    lq, lr = q.side, r.side
    dist = float(np.linalg.norm(q.anchor - r.anchor))
    return (
        (1.0 + lr / lq) ** params.a
        * (1.0 + lq / lr) ** params.b
        * (1.0 + dist / max(lq, lr)) ** params.c
    )


def comparison_kernel_neg(params, q: Cube, r: Cube) -> float:
    """Kernel with negated exponents, the envelope of almost-diagonal entries.

    ``params`` may be any object with fields (a, b, c) >= 0 interpreted as
    decay rates; this avoids constructing a negative ``KernelParams``.
    """
    if q.n != r.n:
        raise ValueError("cubes must have the same dimension")
    lq, lr = q.side, r.side
    dist = float(np.linalg.norm(q.anchor - r.anchor))
    return (
        (1.0 + lr / lq) ** (-params.a)
        * (1.0 + lq / lr) ** (-params.b)
        * (1.0 + dist / max(lq, lr)) ** (-params.c)
    )


@dataclass(frozen=True)
class Box:
    """Axis-aligned half-open box [lo, hi)^n, not necessarily dyadic."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("box bounds must have equal length")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("box must be nondegenerate")

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def side(self) -> float:
        return max(h - l for l, h in zip(self.lo, self.hi))


def min_enclosing_cube(q: Cube, r: Cube) -> Box:
    """Smallest axis-aligned cube (as a box, generally non-dyadic) containing both cubes.

    Its side is comparable to max(l(Q), l(R)) + |x_Q - x_R| in each axis.
    """
    if q.n != r.n:
        raise ValueError("cubes must have the same dimension")
    lo = np.minimum(q.lower, r.lower)
    hi = np.maximum(q.upper, r.upper)
    side = float(np.max(hi - lo))
    # anchor at the hull's lower corner; the hull fits since side majorizes it
    return Box(tuple(lo), tuple(lo + side))


@dataclass(frozen=True)
class Window:
    """Finite slab of the dyadic grid: levels j_min..j_max of all cubes
    meeting a fixed box.  Enumeration order is (level, lexicographic offset)
    and is bit-stable across runs."""

    n: int
    j_min: int
    j_max: int
    box: Box
    _cubes: tuple[Cube, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.j_min > self.j_max:
            raise ValueError("j_min must not exceed j_max")
        if self.box.n != self.n:
            raise ValueError("box dimension mismatch")
        object.__setattr__(self, "_cubes", tuple(self._enumerate()))

    def _enumerate(self) -> Iterator[Cube]:
        for j in range(self.j_min, self.j_max + 1):
            scale = 2.0**j
            lo = [int(np.floor(l * scale)) for l in self.box.lo]
            # half-open box: cube k meets [lo,hi) iff k*2^-j < hi and (k+1)*2^-j > lo
            hi = [int(np.ceil(h * scale)) for h in self.box.hi]
            ranges = [range(a, b) for a, b in zip(lo, hi)]
            idx = [r.start for r in ranges]
            # lexicographic walk, last axis fastest
            while True:
                yield Cube(self.n, j, tuple(idx))
                axis = self.n - 1
                while axis >= 0:
                    idx[axis] += 1
                    if idx[axis] < ranges[axis].stop:
                        break
                    idx[axis] = ranges[axis].start
                    axis -= 1
                if axis < 0:
                    break

    def cubes(self) -> tuple[Cube, ...]:
        return self._cubes

    def cubes_at_level(self, j: int) -> list[Cube]:
        return [q for q in self._cubes if q.j == j]

    def __len__(self) -> int:
        return len(self._cubes)

    def __contains__(self, q: Cube) -> bool:
        return q in set(self._cubes)

    def index(self) -> dict[Cube, int]:
        return {q: i for i, q in enumerate(self._cubes)}

    def finest_cells(self) -> list[Cube]:
        """Cells of the finest level; every coarser window cube is a union of these."""
        return self.cubes_at_level(self.j_max)

    def deepened(self, extra_levels: int) -> "Window":
        return Window(self.n, self.j_min, self.j_max + extra_levels, self.box)


def build_window(n: int, j_min: int, j_max: int, lo, hi) -> Window:
    """Window over the box [lo, hi) with levels j_min..j_max."""
    lo = tuple(float(v) for v in np.atleast_1d(lo))
    hi = tuple(float(v) for v in np.atleast_1d(hi))
    if len(lo) == 1 and n > 1:
        lo = lo * n
    if len(hi) == 1 and n > 1:
        hi = hi * n
    return Window(n, j_min, j_max, Box(lo, hi))
