"""Dyadic sequences and weighted Besov / Triebel-Lizorkin sequence norms.

A sequence assigns a target-space vector to each cube of a window (absent =
zero).  The level-j layer of a sequence is the piecewise-constant function
sum_Q t_Q 1_Q / |Q|^(1/2) over level-j cubes, and the two mixed norms are

    Besov:            l^q over levels of  L^p(dx)  of  2^(js) * layer size,
    Triebel-Lizorkin: L^p(dx) of l^q over levels.

The "layer size" at x is either rho_Q(t_Q) for a per-cube norm family, or
||V(x) t_Q|| for a pointwise weight.  All piecewise-constant structure is
integrated exactly on the finest window level; pointwise weights use
per-cell closed forms or quadrature.  Level factors 2^(js) are accumulated
in log2 space so extreme s*j cannot overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import Cube, Window, cube_at
from .weights import MidpointRule, WeightBase, cube_norm

__all__ = [
    "SpaceParams",
    "NormFamily",
    "DyadicSequence",
    "layer_eval",
    "seq_norm",
    "rescale_map",
    "single_cube_bound",
    "save_sequence",
    "load_sequence",
]

BESOV = "besov"
TRIEBEL_LIZORKIN = "tl"


@dataclass(frozen=True)
class SpaceParams:
    """Smoothness/integrability parameters (s, p, q) plus the scale kind."""

    s: float
    p: float
    q: float  # inf allowed
    kind: str = BESOV

    def __post_init__(self):
        if self.p <= 0 or self.q <= 0:
            raise ValueError("p and q must be positive")
        if self.kind not in (BESOV, TRIEBEL_LIZORKIN):
            raise ValueError(f"unknown space kind {self.kind!r}")

    def J(self, n: int) -> float:
        """Critical index n/min(1,p) (Besov) or n/min(1,p,q) (TL)."""
        if self.kind == BESOV:
            return n / min(1.0, self.p)
        return n / min(1.0, self.p, self.q)

    def J_u(self, n: int, u: float) -> float:
        """Critical index with the family's u in place of 1."""
        if self.kind == BESOV:
            return n / min(self.p, u)
        return n / min(self.p, self.q, u)

    def rescaled(self, u: float) -> "SpaceParams":
        return SpaceParams(self.s * u, self.p / u, self.q / u, self.kind)


@dataclass(frozen=True)
class NormFamily:
    """Per-cube quasi-norm assignment rho_Q.

    Either induced by a weight (rho_Q = averaged weighted norm at a fixed
    exponent r) or synthetic (per-cube positive scale times the target
    norm).  Metadata (u, a, b, c) records the family's u-triangle exponent
    and cube-to-cube comparison growth for almost-diagonal bookkeeping.
    """

    weight: WeightBase | None = None
    r: float | None = None
    table: dict | None = None  # Cube -> positive scale
    fn: object = None  # (Cube, vec) -> float, for pulled-back families
    base_norm_exponent: float = 2.0
    u: float = 1.0
    abc: tuple[float, float, float] | None = None
    rule: MidpointRule = field(default_factory=MidpointRule)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @staticmethod
    def from_weight(weight: WeightBase, r: float, u: float | None = None, abc=None,
                    rule: MidpointRule | None = None) -> "NormFamily":
        return NormFamily(weight=weight, r=r, u=min(1.0, r) if u is None else u,
                          abc=abc, rule=rule or MidpointRule())

    @staticmethod
    def synthetic(table: dict, base_norm_exponent: float = 2.0, u: float = 1.0,
                  abc=None) -> "NormFamily":
        if any(v <= 0 for v in table.values()):
            raise ValueError("synthetic scales must be positive")
        return NormFamily(table=dict(table), base_norm_exponent=base_norm_exponent,
                          u=u, abc=abc)

    @staticmethod
    def from_callable(fn, u: float = 1.0, abc=None) -> "NormFamily":
        return NormFamily(fn=fn, u=u, abc=abc)

    def value(self, cube: Cube, vec: np.ndarray) -> float:
        vec = np.asarray(vec, dtype=float)
        if self.weight is not None:
            key = (cube, vec.tobytes())
            hit = self._cache.get(key)
            if hit is None:
                hit = cube_norm(self.weight, cube, self.r, vec, self.rule)
                self._cache[key] = hit
            return hit
        if self.fn is not None:
            return float(self.fn(cube, vec))
        if self.table is not None:
            scale = self.table.get(cube)
            if scale is None:
                raise KeyError(f"synthetic family has no entry for {cube}")
            from .weights import vector_norm

            return float(scale * vector_norm(vec, self.base_norm_exponent))
        from .weights import vector_norm

        return float(vector_norm(vec, self.base_norm_exponent))

    @staticmethod
    def unweighted(base_norm_exponent: float = 2.0) -> "NormFamily":
        return NormFamily(base_norm_exponent=base_norm_exponent)


@dataclass
class DyadicSequence:
    """Cube-indexed vectors supported inside a window."""

    window: Window
    values: dict[Cube, np.ndarray] = field(default_factory=dict)
    m: int = 1

    def __post_init__(self):
        clean = {}
        for q, v in self.values.items():
            v = np.atleast_1d(np.asarray(v, dtype=float))
            if not np.all(np.isfinite(v)):
                raise ValueError(f"non-finite value at {q}")
            if np.any(v != 0.0):
                clean[q] = v
                self.m = len(v)
        self.values = clean

    def get(self, cube: Cube) -> np.ndarray:
        return self.values.get(cube, np.zeros(self.m))

    def support(self) -> list[Cube]:
        return sorted(self.values.keys(), key=lambda q: (q.j, q.k))

    def levels(self) -> list[int]:
        return sorted({q.j for q in self.values})

    def __add__(self, other: "DyadicSequence") -> "DyadicSequence":
        vals = {q: v.copy() for q, v in self.values.items()}
        for q, v in other.values.items():
            vals[q] = vals.get(q, 0.0) + v
        return DyadicSequence(self.window, vals, self.m)

    def scaled(self, c: float) -> "DyadicSequence":
        return DyadicSequence(self.window, {q: c * v for q, v in self.values.items()}, self.m)

    def restricted(self, keep) -> "DyadicSequence":
        return DyadicSequence(
            self.window, {q: v for q, v in self.values.items() if keep(q)}, self.m
        )


def layer_eval(t: DyadicSequence, j: int, x) -> np.ndarray:
    """Value of the level-j layer function at a point: t_Q / |Q|^(1/2)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    lo = np.asarray(t.window.box.lo)
    hi = np.asarray(t.window.box.hi)
    if np.any(x < lo) or np.any(x >= hi):
        raise ValueError("point outside the window box")
    q = cube_at(t.window.n, j, x)
    v = t.values.get(q)
    if v is None:
        return np.zeros(t.m)
    return v / math.sqrt(q.volume)


def _log2_norm_q(log2_terms: np.ndarray, q: float) -> float:
    """log2 of the l^q norm of positive terms given as log2 values."""
    log2_terms = log2_terms[np.isfinite(log2_terms)]
    if len(log2_terms) == 0:
        return -math.inf
    top = float(np.max(log2_terms))
    if math.isinf(q):
        return top
    return top + math.log2(float(np.sum(2.0 ** (q * (log2_terms - top))))) / q


def _level_log2_lp(t: DyadicSequence, j: int, p: float, sizes: dict[Cube, float]) -> float:
    """log2 of the L^p norm of the level-j size layer sum_Q size_Q 1_Q/|Q|^(1/2)."""
    terms = []
    for q in t.values:
        if q.j != j:
            continue
        s = sizes[q]
        if s <= 0.0:
            continue
        # |Q|^(1-p/2) * size^p, in log2
        terms.append((1.0 - p / 2.0) * math.log2(q.volume) + p * math.log2(s))
    if not terms:
        return -math.inf
    arr = np.asarray(terms)
    top = float(np.max(arr))
    return (top + math.log2(float(np.sum(2.0 ** (arr - top))))) / p


def _rho_sizes(t: DyadicSequence, family: NormFamily) -> dict[Cube, float]:
    return {q: family.value(q, v) for q, v in t.values.items()}


def _pointwise_level_log2_lp(t, j, p, weight, rule) -> float:
    """log2 L^p norm of ||V(x) t_j(x)|| at level j, cube by cube."""
    terms = []
    for q, v in t.values.items():
        if q.j != j:
            continue
        r = cube_norm(weight, q, p, v, rule)
        if r <= 0.0:
            continue
        terms.append((1.0 - p / 2.0) * math.log2(q.volume) + p * math.log2(r))
    if not terms:
        return -math.inf
    arr = np.asarray(terms)
    top = float(np.max(arr))
    return (top + math.log2(float(np.sum(2.0 ** (arr - top))))) / p


def seq_norm(
    t: DyadicSequence,
    params: SpaceParams,
    source: NormFamily | WeightBase,
    rule: MidpointRule = MidpointRule(),
) -> float:
    """Weighted sequence norm of the given space.

    ``source`` is a per-cube norm family (averaging semantics) or a weight
    (pointwise semantics).  The piecewise-constant layer structure is
    integrated exactly; pointwise weights reduce to per-cube averaged
    integrals on each layer (Besov) or to per-finest-cell quadrature (TL).
    """
    if not t.values:
        return 0.0
    s, p, q = params.s, params.p, params.q
    pointwise = isinstance(source, WeightBase)
    if params.kind == BESOV:
        logs = []
        sizes = None if pointwise else _rho_sizes(t, source)
        for j in t.levels():
            if pointwise:
                lvl = _pointwise_level_log2_lp(t, j, p, source, rule)
            else:
                lvl = _level_log2_lp(t, j, p, sizes)
            if lvl > -math.inf:
                logs.append(j * s + lvl)
        out = _log2_norm_q(np.asarray(logs), q)
        return 0.0 if out == -math.inf else 2.0**out
    # Triebel-Lizorkin: exact stack over the finest window cells
    return _tl_norm(t, params, source, rule)


def _tl_norm(t, params, source, rule) -> float:
    s, p, q = params.s, params.p, params.q
    pointwise = isinstance(source, WeightBase)
    sizes = None if pointwise else _rho_sizes(t, source)
    sup_levels = t.levels()
    fine_j = max(max(sup_levels), t.window.j_max)
    # cells: finest-level cubes under the union of supported cubes
    cells: dict[Cube, list[Cube]] = {}
    for qq in t.values:
        for cell in _descendants_at(qq, fine_j):
            cells.setdefault(cell, []).append(qq)
    total_log2 = []  # log2 of |cell| * stack(cell)^p
    for cell, owners in cells.items():
        if pointwise:
            stack_log2 = _pointwise_cell_stack_log2(t, cell, owners, params, source, rule)
        else:
            per_level = []
            for qq in owners:
                sz = sizes[qq]
                if sz <= 0.0:
                    continue
                per_level.append(qq.j * s - 0.5 * math.log2(qq.volume) + math.log2(sz))
            stack_log2 = _log2_norm_q(np.asarray(per_level), q)
        if stack_log2 == -math.inf:
            continue
        total_log2.append(math.log2(cell.volume) + p * stack_log2)
    if not total_log2:
        return 0.0
    arr = np.asarray(total_log2)
    top = float(np.max(arr))
    return 2.0 ** ((top + math.log2(float(np.sum(2.0 ** (arr - top))))) / p)


def _descendants_at(cube: Cube, j: int) -> list[Cube]:
    if j < cube.j:
        raise ValueError("descendant level must be at least the cube level")
    span = 2 ** (j - cube.j)
    out = []
    idx = [0] * cube.n
    while True:
        out.append(Cube(cube.n, j, tuple(cube.k[a] * span + idx[a] for a in range(cube.n))))
        axis = cube.n - 1
        while axis >= 0:
            idx[axis] += 1
            if idx[axis] < span:
                break
            idx[axis] = 0
            axis -= 1
        if axis < 0:
            break
    return out


def _pointwise_cell_stack_log2(t, cell, owners, params, weight, rule):
    """log2 of the L^p(cell)-integrated l^q stack of ||V(x) t_j(x)||.

    Returns log2( (avg over quad nodes of stack^p) )^(1/p) ... combined with
    the cell volume by the caller; here: log2 of (int_cell stack(x)^p dx /
    |cell|)^(1/p) evaluated by midpoint quadrature on the cell.
    """
    s, p, q = params.s, params.p, params.q
    pts, w = rule.cube_nodes(cell, weight)
    vals = np.zeros((len(owners), len(w)))
    scale = np.zeros(len(owners))
    for i, qq in enumerate(owners):
        vals[i] = weight.norms_at(pts, t.values[qq])
        scale[i] = qq.j * s - 0.5 * math.log2(qq.volume)
    # stack per node in log2 space
    with np.errstate(divide="ignore"):
        lg = np.log2(vals) + scale[:, None]
    node_stack = np.array([_log2_norm_q(lg[:, k], q) for k in range(len(w))])
    finite = node_stack > -math.inf
    if not np.any(finite):
        return -math.inf
    top = float(np.max(node_stack[finite]))
    acc = float(np.dot(w[finite], 2.0 ** (p * (node_stack[finite] - top)))) / cell.volume
    return top + math.log2(acc) / p


def rescale_map(t: DyadicSequence, family: NormFamily, u: float) -> DyadicSequence:
    """Scalarized sequence rho_Q(t_Q)^u * l(Q)^(n(1-u)/2).

    Its unweighted norm at parameters (s*u, p/u, q/u), raised to 1/u,
    reproduces the family norm of t exactly.
    """
    if u <= 0:
        raise ValueError("u must be positive")
    n = t.window.n
    vals = {}
    for qq, v in t.values.items():
        size = family.value(qq, v)
        vals[qq] = np.array([size**u * qq.side ** (n * (1.0 - u) / 2.0)])
    return DyadicSequence(t.window, vals, 1)


def single_cube_bound(
    t: DyadicSequence, r: Cube, family: NormFamily, params: SpaceParams
) -> tuple[bool, float, float]:
    """Check rho_R(t_R) <= l(R)^s |R|^(1/2 - 1/p) * ||t||; returns (ok, lhs, rhs)."""
    lhs = family.value(r, t.get(r))
    total = seq_norm(t, params, family)
    rhs = r.side**params.s * r.volume ** (0.5 - 1.0 / params.p) * total
    return lhs <= rhs * (1.0 + 1e-12) + 1e-300, lhs, rhs


# ---------------------------------------------------------------------------
# Serialization: "j k1 .. kn v1 .. vm" lines under a small header
# ---------------------------------------------------------------------------


def save_sequence(t: DyadicSequence, path) -> None:
    w = t.window
    lines = [
        f"# dyadic-sequence n={w.n} m={t.m} j_min={w.j_min} j_max={w.j_max} "
        f"lo={','.join(repr(v) for v in w.box.lo)} hi={','.join(repr(v) for v in w.box.hi)}"
    ]
    for qq in t.support():
        v = t.values[qq]
        lines.append(
            " ".join([str(qq.j)] + [str(ki) for ki in qq.k] + [repr(float(x)) for x in v])
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_sequence(path) -> DyadicSequence:
    from .dyadic import build_window

    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    head = lines[0]
    if not head.startswith("# dyadic-sequence"):
        raise ValueError("missing sequence header")
    fields = dict(part.split("=", 1) for part in head.split()[2:])
    n, m = int(fields["n"]), int(fields["m"])
    lo = [float(v) for v in fields["lo"].split(",")]
    hi = [float(v) for v in fields["hi"].split(",")]
    window = build_window(n, int(fields["j_min"]), int(fields["j_max"]), lo, hi)
    vals = {}
    for ln in lines[1:]:
        parts = ln.split()
        j = int(parts[0])
        k = tuple(int(v) for v in parts[1 : 1 + n])
        vec = np.array([float(v) for v in parts[1 + n :]])
        if len(vec) != m:
            raise ValueError("value arity mismatch")
        vals[Cube(n, j, k)] = vec
    return DyadicSequence(window, vals, m)
