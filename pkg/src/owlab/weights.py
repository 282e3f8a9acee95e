"""Finite-dimensional weight models and per-cube quasi-norm machinery.

A weight is a matrix-valued map V(x) on R^n acting on a finite-dimensional
target space (C^m with an l^u norm).  The central object is the averaged
cube quasi-norm

    cube_norm(V, Q, p, e) = ( avg_Q ||V(x) e||^p dx )^(1/p),

together with its dual norm, and the derived estimators: the duality-type
weight constant, the reverse Hoelder lifting index, the doubling dimension,
and cube-to-cube norm ratios.

Closed-form power integrals are used wherever the weight is diagonal with
1D power-law entries and the target exponent matches p; everything else
falls back to midpoint quadrature on a grid whose cell boundaries are split
at the weight's singular coordinates, so nodes never hit a singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dyadic import Cube, Window

__all__ = [
    "TargetSpace",
    "IdentityWeight",
    "DiagonalPowerWeight",
    "DiagonalLogWeight",
    "BlockTriangularWeight",
    "PiecewiseConstantWeight",
    "MidpointRule",
    "RHIEstimate",
    "DoublingEstimate",
    "power_interval_integral",
    "vector_norm",
    "dual_exponent",
    "cube_norm",
    "dual_cube_norm",
    "ap_constant",
    "reverse_holder_index",
    "doubling_dimension",
    "norm_ratio",
    "bmo_block_weight",
]


def dual_exponent(p: float) -> float:
    """Hoelder conjugate, with the convention p' = inf for p <= 1."""
    if p <= 1.0:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


def vector_norm(v: np.ndarray, u: float) -> np.ndarray:
    """l^u norm along the last axis (u >= 1, inf allowed)."""
    av = np.abs(v)
    if math.isinf(u):
        return av.max(axis=-1)
    if u == 1.0:
        return av.sum(axis=-1)
    if u == 2.0:
        return np.sqrt((av * av).sum(axis=-1))
    return (av**u).sum(axis=-1) ** (1.0 / u)


@dataclass(frozen=True)
class TargetSpace:
    """Coordinate space C^m with the l^exponent norm."""

    m: int
    exponent: float = 2.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("target dimension must be positive")
        if self.exponent < 1.0:
            raise ValueError("target norm exponent must be >= 1")

    def norm(self, v: np.ndarray) -> np.ndarray:
        return vector_norm(v, self.exponent)

    def dual_norm(self, v: np.ndarray) -> np.ndarray:
        return vector_norm(v, dual_exponent(self.exponent))


# ---------------------------------------------------------------------------
# Exact 1D power integrals
# ---------------------------------------------------------------------------


def power_interval_integral(a: float, b: float, c: float, gamma: float) -> float:
    """Exact integral of |x - c|**gamma over [a, b].

    Uses the antiderivative split at the center; returns inf when the
    integral diverges (gamma <= -1 with c inside or touching [a, b]).
    """
    if b < a:
        raise ValueError("need a <= b")
    if a == b:
        return 0.0
    if gamma == 0.0:
        return b - a
    lo, hi = a - c, b - c
    g1 = gamma + 1.0
    if g1 > 0.0:

        def F(t):
            return math.copysign(abs(t) ** g1, t) / g1

        return F(hi) - F(lo)
    # divergent exponent: finite only when 0 is strictly outside [lo, hi]
    if lo <= 0.0 <= hi:
        return math.inf
    if hi < 0.0:
        lo, hi = -hi, -lo
    if g1 == 0.0:
        return math.log(hi / lo)
    return (hi**g1 - lo**g1) / g1


def power_cell_integrals(edges: np.ndarray, c: float, gamma: float) -> np.ndarray:
    """Exact integrals of |x - c|**gamma over consecutive cells of a 1D grid."""
    t = edges - c
    g1 = gamma + 1.0
    if g1 > 0.0:
        F = np.sign(t) * np.abs(t) ** g1 / g1
        return np.diff(F)
    out = np.empty(len(edges) - 1)
    for i in range(len(edges) - 1):
        out[i] = power_interval_integral(edges[i], edges[i + 1], c, gamma)
    return out


# ---------------------------------------------------------------------------
# Weight models
# ---------------------------------------------------------------------------


class WeightBase:
    """Common interface: pointwise application and structural hooks."""

    target: TargetSpace
    n: int  # spatial dimension

    @property
    def m(self) -> int:
        return self.target.m

    def apply_at(self, xs: np.ndarray, e: np.ndarray) -> np.ndarray:
        """V(x) e for xs of shape (N, n); returns (N, m)."""
        raise NotImplementedError

    def apply_transpose_at(self, xs: np.ndarray, e: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def norms_at(self, xs: np.ndarray, e: np.ndarray) -> np.ndarray:
        return self.target.norm(self.apply_at(xs, e))

    def inverse_adjoint(self) -> "WeightBase":
        raise NotImplementedError

    def singular_coords(self, axis: int) -> list[float]:
        """Coordinates along an axis where the entries are singular or kinked."""
        return []

    # structural hooks for closed-form paths
    @property
    def is_identity(self) -> bool:
        return False

    def diagonal_power_profile(self):
        """(centers (m, n), exponents (m,)) when V = diag(|x - x_i|^g_i), else None."""
        return None


@dataclass(frozen=True)
class IdentityWeight(WeightBase):
    target: TargetSpace
    n: int = 1

    def apply_at(self, xs, e):
        xs = np.atleast_2d(xs)
        return np.broadcast_to(np.asarray(e, dtype=float), (xs.shape[0], self.m)).copy()

    apply_transpose_at = apply_at

    def norms_at(self, xs, e):
        xs = np.atleast_2d(xs)
        return np.full(xs.shape[0], float(self.target.norm(np.asarray(e, dtype=float))))

    def inverse_adjoint(self):
        return IdentityWeight(TargetSpace(self.m, dual_exponent(self.target.exponent)), self.n)

    @property
    def is_identity(self):
        return True


@dataclass(frozen=True)
class DiagonalPowerWeight(WeightBase):
    """V(x) = diag(|x - x_i|**g_i), one center/exponent per coordinate."""

    centers: tuple[tuple[float, ...], ...]
    exponents: tuple[float, ...]
    target: TargetSpace
    n: int = 1

    def __post_init__(self):
        if len(self.centers) != self.m or len(self.exponents) != self.m:
            raise ValueError("need one center and one exponent per coordinate")

    def _entries(self, xs: np.ndarray) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        cent = np.asarray(self.centers, dtype=float)  # (m, n)
        d = np.linalg.norm(xs[:, None, :] - cent[None, :, :], axis=-1)  # (N, m)
        g = np.asarray(self.exponents)
        with np.errstate(divide="ignore"):
            return d ** g[None, :]

    def apply_at(self, xs, e):
        return self._entries(xs) * np.asarray(e, dtype=float)[None, :]

    apply_transpose_at = apply_at

    def inverse_adjoint(self):
        return DiagonalPowerWeight(
            self.centers,
            tuple(-g for g in self.exponents),
            TargetSpace(self.m, dual_exponent(self.target.exponent)),
            self.n,
        )

    def singular_coords(self, axis):
        return sorted({c[axis] for c, g in zip(self.centers, self.exponents) if g != 0.0})

    def diagonal_power_profile(self):
        return np.asarray(self.centers, dtype=float), np.asarray(self.exponents, dtype=float)


@dataclass(frozen=True)
class DiagonalLogWeight(WeightBase):
    """Diagonal entries log|x - x_i|; used as the block of a triangular weight."""

    centers: tuple[tuple[float, ...], ...]
    target: TargetSpace
    n: int = 1

    def __post_init__(self):
        if len(self.centers) != self.m:
            raise ValueError("need one center per coordinate")

    def _entries(self, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        cent = np.asarray(self.centers, dtype=float)
        d = np.linalg.norm(xs[:, None, :] - cent[None, :, :], axis=-1)
        with np.errstate(divide="ignore"):
            return np.log(d)

    def apply_at(self, xs, e):
        return self._entries(xs) * np.asarray(e, dtype=float)[None, :]

    apply_transpose_at = apply_at

    def singular_coords(self, axis):
        return sorted({c[axis] for c in self.centers})


@dataclass(frozen=True)
class BlockTriangularWeight(WeightBase):
    """Lower-triangular block weight [[I, 0], [B(x), I]] on C^(2m).

    Always invertible; the inverse adjoint [[I, -B(x)^T], [0, I]] is exact.
    """

    inner: WeightBase
    target: TargetSpace
    n: int = 1
    flip: bool = False  # True encodes the inverse-adjoint acting on the dual split

    def apply_at(self, xs, e):
        xs = np.atleast_2d(xs)
        e = np.asarray(e, dtype=float)
        mi = self.inner.m
        e1, e2 = e[:mi], e[mi:]
        if not self.flip:
            y1 = np.broadcast_to(e1, (xs.shape[0], mi)).copy()
            y2 = self.inner.apply_at(xs, e1) + e2[None, :]
        else:
            y1 = -self.inner.apply_transpose_at(xs, e2) + e1[None, :]
            y2 = np.broadcast_to(e2, (xs.shape[0], mi)).copy()
        return np.concatenate([y1, y2], axis=1)

    def apply_transpose_at(self, xs, e):
        xs = np.atleast_2d(xs)
        e = np.asarray(e, dtype=float)
        mi = self.inner.m
        e1, e2 = e[:mi], e[mi:]
        if not self.flip:
            y1 = e1[None, :] + self.inner.apply_transpose_at(xs, e2)
            y2 = np.broadcast_to(e2, (xs.shape[0], mi)).copy()
        else:
            y1 = np.broadcast_to(e1, (xs.shape[0], mi)).copy()
            y2 = e2[None, :] - self.inner.apply_at(xs, e1)
        return np.concatenate([y1, y2], axis=1)

    def inverse_adjoint(self):
        return BlockTriangularWeight(
            self.inner,
            TargetSpace(self.m, dual_exponent(self.target.exponent)),
            self.n,
            flip=not self.flip,
        )

    def singular_coords(self, axis):
        return self.inner.singular_coords(axis)


def bmo_block_weight(inner: WeightBase, exponent: float = 2.0) -> BlockTriangularWeight:
    """2m x 2m lower-triangular weight with the given m x m block."""
    return BlockTriangularWeight(inner, TargetSpace(2 * inner.m, exponent), inner.n)


@dataclass(frozen=True)
class PiecewiseConstantWeight(WeightBase):
    """Per-cell invertible matrices on a uniform grid over a box."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    cells_per_axis: int
    matrices: np.ndarray  # shape cells^n x m x m, C-order over the cell lattice
    target: TargetSpace
    n: int = 1

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=float)
        expected = self.cells_per_axis**self.n
        if mats.shape != (expected, self.m, self.m):
            raise ValueError(f"matrices must have shape ({expected}, m, m)")
        for a in mats:
            if abs(np.linalg.det(a)) < 1e-14:
                raise ValueError("piecewise-constant weight must be invertible per cell")

    def _cell_index(self, xs):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        frac = (xs - lo) / (hi - lo)
        idx = np.clip((frac * self.cells_per_axis).astype(int), 0, self.cells_per_axis - 1)
        flat = np.zeros(xs.shape[0], dtype=int)
        for axis in range(self.n):
            flat = flat * self.cells_per_axis + idx[:, axis]
        return flat

    def apply_at(self, xs, e):
        mats = np.asarray(self.matrices)[self._cell_index(xs)]
        return mats @ np.asarray(e, dtype=float)

    def apply_transpose_at(self, xs, e):
        mats = np.asarray(self.matrices)[self._cell_index(xs)]
        return np.einsum("nij,i->nj", mats, np.asarray(e, dtype=float))

    def inverse_adjoint(self):
        inv_t = np.linalg.inv(np.asarray(self.matrices)).transpose(0, 2, 1)
        return PiecewiseConstantWeight(
            self.lo,
            self.hi,
            self.cells_per_axis,
            inv_t,
            TargetSpace(self.m, dual_exponent(self.target.exponent)),
            self.n,
        )

    def singular_coords(self, axis):
        step = (self.hi[axis] - self.lo[axis]) / self.cells_per_axis
        return [self.lo[axis] + i * step for i in range(1, self.cells_per_axis)]


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MidpointRule:
    """Composite midpoint rule; axes are split at given coordinates so that
    nodes never coincide with integrand singularities."""

    nodes_per_axis: int = 64
    min_nodes_per_segment: int = 8

    def __post_init__(self):
        if self.nodes_per_axis < 2:
            raise ValueError("need at least 2 nodes per axis")

    def axis_nodes(self, lo: float, hi: float, splits: list[float]):
        cuts = [lo] + [s for s in sorted(set(splits)) if lo < s < hi] + [hi]
        nodes, weights = [], []
        total = hi - lo
        for a, b in zip(cuts[:-1], cuts[1:]):
            k = max(self.min_nodes_per_segment, round(self.nodes_per_axis * (b - a) / total))
            h = (b - a) / k
            nodes.append(a + h * (np.arange(k) + 0.5))
            weights.append(np.full(k, h))
        return np.concatenate(nodes), np.concatenate(weights)

    def cube_nodes(self, cube: Cube, weight: WeightBase):
        """Tensorized nodes and weights over a cube; weights sum to |Q|."""
        per_axis = []
        for axis in range(cube.n):
            lo, hi = cube.lower[axis], cube.upper[axis]
            per_axis.append(self.axis_nodes(lo, hi, weight.singular_coords(axis)))
        if cube.n == 1:
            x, w = per_axis[0]
            return x[:, None], w
        grids = np.meshgrid(*[p[0] for p in per_axis], indexing="ij")
        wgrids = np.meshgrid(*[p[1] for p in per_axis], indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        w = np.ones(pts.shape[0])
        for wg in wgrids:
            w = w * wg.ravel()
        return pts, w


# ---------------------------------------------------------------------------
# Cube quasi-norms
# ---------------------------------------------------------------------------


def _diag_closed_form_ok(weight: WeightBase, p: float) -> bool:
    prof = weight.diagonal_power_profile()
    return (
        prof is not None
        and weight.n == 1
        and not math.isinf(p)
        and weight.target.exponent == p
        and p >= 1.0
    )


def _diag_cube_pth_moments(weight: WeightBase, cube: Cube, p: float) -> np.ndarray:
    """avg_Q |v_i|^p per coordinate, exact, for 1D diagonal power weights."""
    centers, exps = weight.diagonal_power_profile()
    a, b = cube.lower[0], cube.upper[0]
    out = np.empty(weight.m)
    for i in range(weight.m):
        out[i] = power_interval_integral(a, b, centers[i][0], exps[i] * p) / (b - a)
    return out


def cube_norm(
    weight: WeightBase,
    cube: Cube,
    p: float,
    e: np.ndarray,
    rule: MidpointRule = MidpointRule(),
) -> float:
    """Averaged weighted size of a vector over a cube: (avg ||V e||^p)^(1/p).

    p = inf takes the max over quadrature nodes.  Closed-form power
    integrals are used for 1D diagonal power weights when the target
    exponent equals p; the general path is midpoint quadrature.
    """
    e = np.asarray(e, dtype=float)
    if weight.is_identity:
        return float(weight.target.norm(e))
    if math.isinf(p):
        pts, _ = rule.cube_nodes(cube, weight)
        return float(np.max(weight.norms_at(pts, e)))
    prof = weight.diagonal_power_profile()
    if prof is not None and weight.n == 1:
        nz = np.nonzero(e)[0]
        if len(nz) == 1:
            # one nonzero coordinate: exact for every target exponent
            i = nz[0]
            centers, exps = prof
            a, b = cube.lower[0], cube.upper[0]
            mom = power_interval_integral(a, b, centers[i][0], exps[i] * p) / (b - a)
            if not math.isfinite(mom):
                raise FloatingPointError(f"cube norm diverged on {cube}: non-integrable power")
            return mom ** (1.0 / p) * abs(float(e[i]))
    if _diag_closed_form_ok(weight, p):
        mom = _diag_cube_pth_moments(weight, cube, p)
        val = float(np.dot(mom, np.abs(e) ** p))
        if not math.isfinite(val):
            raise FloatingPointError(f"cube norm diverged on {cube}: non-integrable power")
        return val ** (1.0 / p)
    pts, w = rule.cube_nodes(cube, weight)
    vals = weight.norms_at(pts, e)
    acc = float(np.dot(w, vals**p)) / cube.volume
    if not math.isfinite(acc):
        raise FloatingPointError("cube norm quadrature overflow")
    return acc ** (1.0 / p)


# -- sphere-search maximizer -------------------------------------------------


def _numeric_grad(f, e, h=1e-6):
    g = np.zeros_like(e)
    for i in range(len(e)):
        step = np.zeros_like(e)
        step[i] = h
        g[i] = (f(e + step) - f(e - step)) / (2 * h)
    return g


def sphere_maximize(f, m, rng, n_starts=16, extra_starts=(), rel_tol=1e-6, max_steps=500):
    """Multi-start projected gradient ascent of a scale-invariant objective
    over the Euclidean unit sphere.  Returns (best value, best point, converged).
    """
    starts = [np.asarray(s, dtype=float) for s in extra_starts]
    starts += [rng.standard_normal(m) for _ in range(n_starts)]
    best_val, best_e, best_conv = -math.inf, None, False
    for e0 in starts:
        nrm = np.linalg.norm(e0)
        if nrm == 0.0:
            continue
        e = e0 / nrm
        val = f(e)
        step = 0.25
        converged = False
        for _ in range(max_steps):
            g = _numeric_grad(f, e)
            g = g - np.dot(g, e) * e
            gn = np.linalg.norm(g)
            if gn < 1e-14:
                converged = True
                break
            improved = False
            while step > 1e-13:
                trial = e + step * g / gn
                trial /= np.linalg.norm(trial)
                fv = f(trial)
                if fv > val:
                    gain = fv - val
                    e, val = trial, fv
                    improved = True
                    step *= 1.5
                    if gain < rel_tol * max(abs(val), 1e-300):
                        converged = True
                    break
                step *= 0.5
            if not improved or converged:
                converged = converged or not improved
                break
        if val > best_val:
            best_val, best_e, best_conv = val, e, converged
    return best_val, best_e, best_conv


def _duality_start(e_star: np.ndarray, u: float) -> np.ndarray:
    """Maximizer of <e*, e>/||e||_u for the plain l^u norm; optimizer seed."""
    es = np.asarray(e_star, dtype=float)
    if math.isinf(u):
        s = np.sign(es)
        return np.where(s == 0.0, 1.0, s)
    if u == 1.0:
        e = np.zeros_like(es)
        e[int(np.argmax(np.abs(es)))] = 1.0
        return e
    ud = dual_exponent(u)
    return np.sign(es) * np.abs(es) ** (ud - 1.0)


def dual_cube_norm_with_flag(
    weight: WeightBase,
    cube: Cube,
    p: float,
    e_star: np.ndarray,
    rule: MidpointRule = MidpointRule(),
    seed: int = 0xA9,
    n_starts: int = 16,
) -> tuple[float, bool]:
    """Dual norm sup_e |<e*, e>| / cube_norm(V, Q, p, e); (value, converged)."""
    e_star = np.asarray(e_star, dtype=float)
    if weight.is_identity:
        return float(weight.target.dual_norm(e_star)), True
    if _diag_closed_form_ok(weight, p):
        mom = _diag_cube_pth_moments(weight, cube, p)
        return _weighted_lp_dual(mom, e_star, p), True
    rng = np.random.default_rng(seed)

    def objective(e):
        r = cube_norm(weight, cube, p, e, rule)
        if r == 0.0 or not math.isfinite(r):
            return 0.0
        return abs(float(np.dot(e_star, e))) / r

    start = _duality_start(e_star, weight.target.exponent)
    val, _, conv = sphere_maximize(objective, weight.m, rng, n_starts, extra_starts=[start])
    return float(val), conv


def _weighted_lp_dual(mom: np.ndarray, e_star: np.ndarray, p: float) -> float:
    """Dual of e -> (sum_i mom_i |e_i|^p)^(1/p) evaluated at e*."""
    if np.any(mom == 0.0):
        return math.inf if np.any(np.abs(e_star[mom == 0.0]) > 0) else 0.0
    if p > 1.0:
        pd = dual_exponent(p)
        return float(np.sum(mom ** (1.0 - pd) * np.abs(e_star) ** pd) ** (1.0 / pd))
    # p <= 1: one-hot vectors are optimal
    return float(np.max(np.abs(e_star) * mom ** (-1.0 / p)))


def dual_cube_norm(weight, cube, p, e_star, rule=MidpointRule(), seed=0xA9, n_starts=16):
    return dual_cube_norm_with_flag(weight, cube, p, e_star, rule, seed, n_starts)[0]


# ---------------------------------------------------------------------------
# Weight constant (duality comparison over a window of cubes)
# ---------------------------------------------------------------------------


def _window_cubes_with_ancestors(window: Window, extra_levels: int = 3) -> list[Cube]:
    seen: dict[Cube, None] = {}
    for q in window.cubes():
        seen.setdefault(q, None)
    for q in window.cubes_at_level(window.j_min):
        c = q
        for _ in range(extra_levels):
            c = c.parent()
            seen.setdefault(c, None)
    return list(seen.keys())


def _hilbert_gram(weight: WeightBase, cube: Cube, rule: MidpointRule) -> np.ndarray:
    """avg_Q V(x)^T V(x) dx, for the Euclidean-target fast path."""
    pts, w = rule.cube_nodes(cube, weight)
    m = weight.m
    cols = np.stack([weight.apply_at(pts, np.eye(m)[i]) for i in range(m)], axis=2)  # (N,m,m)
    g = np.einsum("n,nij,nik->jk", w, cols, cols) / cube.volume
    return g


def _cube_duality_ratio(weight, cube, p, rule, seed):
    """sup over the dual space of cube_norm(V^-*, Q, p') / dual_cube_norm(V, Q, p)."""
    inv_adj = weight.inverse_adjoint()
    pd = dual_exponent(p)
    if _diag_closed_form_ok(weight, p):
        mom = _diag_cube_pth_moments(weight, cube, p)
        mom_dual = _diag_cube_pth_moments(inv_adj, cube, pd)
        # ratio of two weighted l^p' norms; one-hot directions are extremal
        return float(np.max((mom_dual * mom ** (pd / p)) ** (1.0 / pd))), True
    if p == 2.0 and weight.target.exponent == 2.0:
        g = _hilbert_gram(weight, cube, rule)
        g_dual = _hilbert_gram(inv_adj, cube, rule)
        lam = scipy.linalg.eigh(g_dual, np.linalg.inv(g), eigvals_only=True)[-1]
        return float(math.sqrt(max(lam, 0.0))), True
    rng = np.random.default_rng(seed)

    def objective(e_star):
        num = cube_norm(inv_adj, cube, pd, e_star, rule)
        den, _ = dual_cube_norm_with_flag(weight, cube, p, e_star, rule, seed, n_starts=4)
        if den == 0.0:
            return 0.0
        return num / den

    val, _, conv = sphere_maximize(objective, weight.m, rng, n_starts=8, max_steps=200)
    return float(val), conv


def ap_constant(
    weight: WeightBase,
    p: float,
    window: Window,
    rule: MidpointRule = MidpointRule(),
    seed: int = 0xA9,
    ancestor_levels: int = 3,
) -> float:
    """Window-restricted duality-comparison constant of a weight.

    For p > 1 this is the largest, over window cubes and their ancestors, of
    the ratio of the inverse-adjoint cube norm to the dual cube norm; for
    p <= 1 it compares the cube norm against the min of ||V(y)e|| over
    nodes.  It is a lower bound for the supremum over all cubes.
    """
    cubes = _window_cubes_with_ancestors(window, ancestor_levels)
    best = 0.0
    if p > 1.0:
        for q in cubes:
            val, _ = _cube_duality_ratio(weight, q, p, rule, seed)
            best = max(best, val)
        return best
    # p <= 1: cube norm against essential infimum (min over quadrature nodes)
    rng = np.random.default_rng(seed)
    for q in cubes:
        pts, _ = rule.cube_nodes(q, weight)
        if weight.m == 1 and weight.diagonal_power_profile() is not None and weight.n == 1:
            mom = _diag_cube_pth_moments(weight, q, p)
            low = float(np.min(np.abs(weight.apply_at(pts, np.ones(1)))))
            if low == 0.0:
                raise FloatingPointError(f"near-singular weight at a node of {q}")
            best = max(best, float(mom[0] ** (1.0 / p) / low))
            continue

        def objective(e):
            num = cube_norm(weight, q, p, e, rule)
            den = float(np.min(weight.norms_at(pts, e)))
            if den == 0.0:
                raise FloatingPointError(f"near-singular weight at a node of {q}")
            return num / den

        one_hots = [np.eye(weight.m)[i] for i in range(weight.m)]
        val, _, _ = sphere_maximize(
            objective, weight.m, rng, n_starts=8, extra_starts=one_hots, max_steps=200
        )
        best = max(best, float(val))
    return best


# ---------------------------------------------------------------------------
# Reverse Hoelder lifting index
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RHIEstimate:
    eps: float
    eta: float
    worst_ratio_eps: float
    worst_ratio_eta: float
    eps_degenerate: bool = False
    eta_trivial: bool = False


def _probe_vectors(m: int, seed: int, extra: int = 4) -> list[np.ndarray]:
    rng = np.random.default_rng(seed)
    probes = [np.eye(m)[i] for i in range(m)]
    probes += [rng.standard_normal(m) for _ in range(extra)]
    return probes


def _lift_ratio(weight, cube, p, eps, e, rule):
    try:
        hi = cube_norm(weight, cube, p + eps, e, rule)
        lo = cube_norm(weight, cube, p, e, rule)
    except FloatingPointError:
        return math.inf
    if lo == 0.0:
        return 0.0
    return hi / lo


def reverse_holder_index(
    weight: WeightBase,
    p: float,
    window: Window,
    eps_grid,
    growth_threshold: float = 4.0,
    rule: MidpointRule = MidpointRule(),
    seed: int = 0xA9,
) -> RHIEstimate:
    """Largest grid eps with cube_norm at exponent p+eps within a factor of
    the exponent-p norm, over sampled cubes and directions; likewise eta for
    the inverse adjoint at the conjugate exponent.  Grid estimates are lower
    bounds for the true lifting indices.
    """
    eps_grid = sorted(float(v) for v in eps_grid)
    if not eps_grid or eps_grid[0] <= 0:
        raise ValueError("eps grid must contain positive values")
    cubes = window.cubes()
    probes = _probe_vectors(weight.m, seed)

    def scan(w, base_p):
        chosen, worst_at_chosen, degenerate = 0.0, math.nan, True
        for eps in eps_grid:
            worst = 0.0
            for q in cubes:
                for e in probes:
                    worst = max(worst, _lift_ratio(w, q, base_p, eps, e, rule))
            if worst <= growth_threshold:
                chosen, worst_at_chosen, degenerate = eps, worst, False
            else:
                break
        return chosen, worst_at_chosen, degenerate

    eps, worst_eps, eps_deg = scan(weight, p)
    pd = dual_exponent(p)
    if math.isinf(pd):
        return RHIEstimate(eps, eps_grid[-1], worst_eps, 1.0, eps_deg, eta_trivial=True)
    eta, worst_eta, _ = scan(weight.inverse_adjoint(), pd)
    return RHIEstimate(eps, eta, worst_eps, worst_eta, eps_deg)


# ---------------------------------------------------------------------------
# Doubling dimension
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DoublingEstimate:
    beta: float
    residual: float


def _cube_pth_mass(weight, cube, p, rule):
    """Unnormalized integral of ||V e||^p over the cube (per probe e)."""
    if _diag_closed_form_ok(weight, p):
        mom = _diag_cube_pth_moments(weight, cube, p)

        def mass(e):
            return float(np.dot(mom, np.abs(e) ** p)) * cube.volume

        return mass
    pts, w = rule.cube_nodes(cube, weight)

    def mass(e):
        return float(np.dot(w, weight.norms_at(pts, e) ** p))

    return mass


def doubling_dimension(
    weight: WeightBase,
    p: float,
    window: Window,
    rule: MidpointRule = MidpointRule(),
    seed: int = 0xA9,
) -> DoublingEstimate:
    """Growth exponent of nested-cube masses: per deepest cube, the mass of
    each ancestor is regressed on the side ratio in log-log scale; the
    estimate is the steepest chain slope over sampled directions, clamped to
    the spatial dimension.
    """
    if window.j_max - window.j_min < 2:
        raise ValueError("insufficient nesting depth (< 3 levels)")
    probes = _probe_vectors(weight.m, seed)
    best_slope, best_res = -math.inf, 0.0
    for leaf in window.cubes_at_level(window.j_max):
        chain = [leaf]
        c = leaf
        while c.j > window.j_min:
            c = c.parent()
            chain.append(c)
        masses_per_probe = []
        for e in probes:
            masses_per_probe.append([_cube_pth_mass(weight, s, p, rule)(e) for s in chain])
        xs = np.array([(leaf.j - s.j) * math.log(2.0) for s in chain])
        for masses in masses_per_probe:
            masses = np.asarray(masses)
            if np.any(masses <= 0.0) or not np.all(np.isfinite(masses)):
                continue
            ys = np.log(masses / masses[0])
            slope, intercept = np.polyfit(xs, ys, 1)
            res = float(np.max(np.abs(ys - (slope * xs + intercept))))
            if slope > best_slope:
                best_slope, best_res = float(slope), res
    beta = max(best_slope, float(window.n))
    return DoublingEstimate(beta, best_res)


# ---------------------------------------------------------------------------
# Cube-to-cube norm ratio
# ---------------------------------------------------------------------------


def norm_ratio(
    weight: WeightBase,
    p: float,
    q: Cube,
    r: Cube,
    rule: MidpointRule = MidpointRule(),
    seed: int = 0xA9,
) -> float:
    """sup over directions of cube_norm(V, Q, p, e) / cube_norm(V, R, p, e)."""
    if weight.is_identity or q == r:
        return 1.0
    if _diag_closed_form_ok(weight, p):
        mq = _diag_cube_pth_moments(weight, q, p)
        mr = _diag_cube_pth_moments(weight, r, p)
        return float(np.max(mq / mr) ** (1.0 / p))
    if p == 2.0 and weight.target.exponent == 2.0:
        gq = _hilbert_gram(weight, q, rule)
        gr = _hilbert_gram(weight, r, rule)
        lam = scipy.linalg.eigh(gq, gr, eigvals_only=True)[-1]
        return float(math.sqrt(max(lam, 0.0)))
    rng = np.random.default_rng(seed)

    def objective(e):
        den = cube_norm(weight, r, p, e, rule)
        if den == 0.0:
            return 0.0
        return cube_norm(weight, q, p, e, rule) / den

    val, _, _ = sphere_maximize(objective, weight.m, rng, n_starts=8, max_steps=200)
    return float(val)
