"""Averaging and sparse operators on weighted L^p, plus the two analytic
growth-rate experiments.

* The averaging operator f -> 1_Q <f>_Q has weighted operator norm equal to
  a ratio of a cube norm against a dual cube norm; this module evaluates
  that ratio in closed form (diagonal weights), by Gram matrices (Euclidean
  targets at p = 2), or by sphere search, and independently brute-forces
  the operator norm over piecewise-constant inputs as an oracle.
* Sparse operators sum coefficient-weighted cube averages over a sparse
  cube family with disjoint witness sets.
* The lacunary diagonal-weight experiment measures the base-2 growth rates
  of both sides of the failed two-variable averaging inequality.
* The diverging-supremum experiment Monte Carlo integrates the running
  supremum of |log of the dyadic fractional part + 1|^p, whose divergence
  is driven by long zero runs in binary expansions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import Cube
from .weights import (
    MidpointRule,
    WeightBase,
    cube_norm,
    dual_cube_norm_with_flag,
    dual_exponent,
    power_cell_integrals,
    power_interval_integral,
    sphere_maximize,
    _diag_closed_form_ok,
    _diag_cube_pth_moments,
    _hilbert_gram,
)

__all__ = [
    "SparseFamily",
    "SampledFunction",
    "averaging_norm_rhs",
    "averaging_norm_oracle",
    "sparse_apply",
    "cantor_sparse_family",
    "lp_weight_norm",
    "p22_experiment",
    "P22Result",
    "normal_sup_experiment",
    "NormalSupResult",
]


# ---------------------------------------------------------------------------
# Averaging operator norm
# ---------------------------------------------------------------------------


def averaging_norm_rhs(
    weight: WeightBase,
    p: float,
    cube: Cube,
    rule: MidpointRule = MidpointRule(),
    seed: int = 0xA9,
) -> float:
    """Exact operator-norm formula for f -> 1_Q <f>_Q on weighted L^p:
    sup over directions of cube_norm(V, Q, p, e) / dual cube norm of the
    inverse adjoint at the conjugate exponent."""
    if p <= 1.0 or math.isinf(p):
        raise ValueError("averaging norm formula needs p in (1, inf)")
    if weight.is_identity:
        return 1.0
    pd = dual_exponent(p)
    inv_adj = weight.inverse_adjoint()
    if _diag_closed_form_ok(weight, p):
        mom = _diag_cube_pth_moments(weight, cube, p)
        mom_dual = _diag_cube_pth_moments(inv_adj, cube, pd)
        return float(np.max((mom * mom_dual ** (p / pd)) ** (1.0 / p)))
    if p == 2.0 and weight.target.exponent == 2.0:
        import scipy.linalg

        g = _hilbert_gram(weight, cube, rule)
        g_dual = _hilbert_gram(inv_adj, cube, rule)
        lam = scipy.linalg.eigh(g, np.linalg.inv(g_dual), eigvals_only=True)[-1]
        return float(math.sqrt(max(lam, 0.0)))
    rng = np.random.default_rng(seed)

    def objective(e):
        den, _ = dual_cube_norm_with_flag(inv_adj, cube, pd, e, rule, seed, n_starts=4)
        if den == 0.0:
            return 0.0
        return cube_norm(weight, cube, p, e, rule) / den

    val, _, _ = sphere_maximize(objective, weight.m, rng, n_starts=8, max_steps=200)
    return float(val)


def averaging_norm_oracle(
    weight: WeightBase,
    p: float,
    cube: Cube,
    partition_cells: int = 256,
    n_starts: int = 6,
    seed: int = 0xA9,
    max_sweeps: int = 400,
    rel_tol: float = 1e-10,
) -> tuple[float, bool]:
    """Brute-force operator norm over piecewise-constant scalar inputs.

    Maximizes |<f>_Q| * ||v||_{L^p(Q)} / ||v f||_{L^p(Q)} by cyclic
    coordinate ascent with closed-form per-cell updates, multi-start.
    Only scalar weights (m = 1).  Returns (value, converged).
    """
    if weight.m != 1:
        raise ValueError("oracle is scalar-only")
    if partition_cells < 16:
        raise ValueError("need at least 16 partition cells")
    if p <= 1.0:
        raise ValueError("oracle needs p in (1, inf)")
    a0, b0 = cube.lower[0], cube.upper[0]
    edges = np.linspace(a0, b0, partition_cells + 1)
    # exact per-cell masses of v^p
    prof = weight.diagonal_power_profile()
    if prof is not None and weight.n == 1:
        centers, exps = prof
        w_cells = power_cell_integrals(edges, centers[0][0], exps[0] * p)
    else:
        w_cells = np.empty(partition_cells)
        rule = MidpointRule(nodes_per_axis=8)
        for i in range(partition_cells):
            x, wq = rule.axis_nodes(edges[i], edges[i + 1], weight.singular_coords(0))
            w_cells[i] = float(np.dot(wq, weight.norms_at(x[:, None], np.ones(1)) ** p))
    if not np.all(np.isfinite(w_cells)) or np.any(w_cells <= 0.0):
        raise FloatingPointError("degenerate cell masses for the oracle")
    vol = b0 - a0
    cell_meas = np.diff(edges) / vol  # averaging coefficients a_c
    total_mass = float(w_cells.sum())  # ||v 1_Q||_{L^p}^p

    def ratio(f):
        avg = float(np.dot(cell_meas, f))
        den = float(np.dot(w_cells, np.abs(f) ** p))
        if den == 0.0:
            return 0.0
        return abs(avg) * (total_mass / den) ** (1.0 / p)

    rng = np.random.default_rng(seed)
    best, best_conv = 0.0, False
    starts = [np.ones(partition_cells)]
    starts += [np.abs(rng.standard_normal(partition_cells)) + 1e-3 for _ in range(n_starts - 1)]
    for f in starts:
        f = f / np.dot(w_cells, f**p) ** (1.0 / p)
        val = ratio(f)
        converged = False
        for _ in range(max_sweeps):
            prev = val
            for c in range(partition_cells):
                rest_num = float(np.dot(cell_meas, f)) - cell_meas[c] * f[c]
                rest_den = float(np.dot(w_cells, np.abs(f) ** p)) - w_cells[c] * abs(f[c]) ** p
                if rest_num <= 0.0 or rest_den <= 0.0:
                    continue
                # stationary point of (A + a t) / (B + w t^p)^(1/p) in t > 0
                f[c] = (cell_meas[c] * rest_den / (rest_num * w_cells[c])) ** (1.0 / (p - 1.0))
            val = ratio(f)
            if abs(val - prev) <= rel_tol * max(prev, 1e-300):
                converged = True
                break
        if val > best:
            best, best_conv = val, converged
    return best, best_conv


# ---------------------------------------------------------------------------
# Sparse operators
# ---------------------------------------------------------------------------


@dataclass
class SampledFunction:
    """Piecewise-constant vector function on a uniform grid over [lo, hi)."""

    lo: float
    hi: float
    values: np.ndarray  # (cells, m)

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite sample values")

    @property
    def cells(self) -> int:
        return self.values.shape[0]

    @property
    def m(self) -> int:
        return self.values.shape[1]

    def edges(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.cells + 1)

    def cell_width(self) -> float:
        return (self.hi - self.lo) / self.cells

    def midpoints(self) -> np.ndarray:
        e = self.edges()
        return (e[:-1] + e[1:]) / 2.0


@dataclass
class SparseFamily:
    """Cubes with coefficient callables and disjoint witness subsets.

    Each entry is (cube, a_fn, b_fn) with |a|, |b| <= 1 on the cube; the
    witness of each cube is its middle-third slab, and pairwise witness
    disjointness is verified on construction (density 1/3).
    """

    entries: list  # (Cube, a_fn, b_fn)
    eta: float = 1.0 / 3.0

    def __post_init__(self):
        intervals = sorted(self._witness(q) for q, _, _ in self.entries)
        for (a1, b1), (a2, b2) in zip(intervals[:-1], intervals[1:]):
            if a2 < b1 - 1e-12:
                raise ValueError("witness sets overlap; family is not sparse")

    @staticmethod
    def _witness(q: Cube) -> tuple[float, float]:
        a, b = q.lower[0], q.upper[0]
        third = (b - a) / 3.0
        return (a + third, a + 2.0 * third)

    def cubes(self) -> list[Cube]:
        return [q for q, _, _ in self.entries]


def cantor_sparse_family(top: Cube, depth: int, coeff=None) -> SparseFamily:
    """Sparse family from outer'-quarter recursion under a top interval.

    Each selected cube contributes its two outer-quarter grandchildren, so
    every middle-third witness is disjoint from all descendants.
    """
    if top.n != 1:
        raise ValueError("generator is one-dimensional")
    if coeff is None:
        coeff = lambda q: ((lambda x: np.ones_like(x)), (lambda x: np.ones_like(x)))
    entries = []
    frontier = [top]
    for _ in range(depth + 1):
        nxt = []
        for q in frontier:
            a_fn, b_fn = coeff(q)
            entries.append((q, a_fn, b_fn))
            c0, c1 = q.children()
            nxt.append(c0.children()[0])
            nxt.append(c1.children()[1])
        frontier = nxt
    return SparseFamily(entries)


def sparse_apply(family: SparseFamily, f: SampledFunction) -> SampledFunction:
    """T f = sum over cubes of a_Q * (avg of b_Q f over Q), exact on the grid."""
    width = f.cell_width()
    mids = f.midpoints()
    out = np.zeros_like(f.values)
    for q, a_fn, b_fn in family.entries:
        a0, b0 = q.lower[0], q.upper[0]
        i0 = (a0 - f.lo) / width
        i1 = (b0 - f.lo) / width
        if abs(i0 - round(i0)) > 1e-9 or abs(i1 - round(i1)) > 1e-9:
            raise ValueError(f"grid does not refine {q}")
        i0, i1 = int(round(i0)), int(round(i1))
        if i0 < 0 or i1 > f.cells:
            raise ValueError(f"{q} is outside the sampled box")
        xs = mids[i0:i1]
        a_vals = np.asarray(a_fn(xs), dtype=float)
        b_vals = np.asarray(b_fn(xs), dtype=float)
        if np.any(np.abs(a_vals) > 1.0 + 1e-12) or np.any(np.abs(b_vals) > 1.0 + 1e-12):
            raise ValueError(f"coefficients exceed 1 in absolute value on {q}")
        avg = (b_vals[:, None] * f.values[i0:i1]).sum(axis=0) * width / (b0 - a0)
        out[i0:i1] += a_vals[:, None] * avg[None, :]
    return SampledFunction(f.lo, f.hi, out)


def lp_weight_norm(f: SampledFunction, weight: WeightBase, p: float) -> float:
    """||f||_{L^p(V)} = (int ||V(x) f(x)||^p dx)^(1/p) for grid functions."""
    edges = f.edges()
    prof = weight.diagonal_power_profile()
    acc = 0.0
    if prof is not None and weight.n == 1 and weight.target.exponent == p:
        centers, exps = prof
        for i in range(weight.m):
            masses = power_cell_integrals(edges, centers[i][0], exps[i] * p)
            acc += float(np.dot(masses, np.abs(f.values[:, i]) ** p))
        return acc ** (1.0 / p)
    rule = MidpointRule(nodes_per_axis=4, min_nodes_per_segment=2)
    for c in range(f.cells):
        xs, wq = rule.axis_nodes(edges[c], edges[c + 1], weight.singular_coords(0))
        vals = weight.norms_at(xs[:, None], f.values[c])
        acc += float(np.dot(wq, vals**p))
    return acc ** (1.0 / p)


# ---------------------------------------------------------------------------
# Two-variable averaging inequality: lacunary diagonal-weight growth rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class P22Result:
    n_values: list[int]
    lhs: list[float]
    rhs: list[float]
    slope_lhs: float  # base-2 slope of log2(lhs) vs N
    slope_rhs: float
    slope_lhs_rooted: float  # slopes of the 1/p-rooted sides
    slope_rhs_rooted: float
    rhs_exact: list[float]  # closed-form counterpart of the quadrature rhs


def p22_experiment(
    p: float,
    eps: float,
    n_range,
    grid: int = 4096,
) -> P22Result:
    """Growth rates of both sides of the two-variable averaging inequality
    for the lacunary diagonal power weight on [0, 1).

    lhs(N) = avg_x ( avg_y ||V(x) f_N(y)|| )^p,
    rhs(N) = avg_y ||V(y) f_N(y)||^p,

    where the vector norm is taken before the y-integration, making the
    inner integrand integrable despite the per-coordinate singularities.
    Midpoint quadrature on a grid whose boundaries contain every center.
    """
    if not 1.0 < p < math.inf:
        raise ValueError("need p in (1, inf)")
    pd = dual_exponent(p)
    if not 0.0 < eps < 1.0 / (3.0 * pd):
        raise ValueError("eps must lie in (0, 1/(3 p'))")
    n_values = sorted(int(v) for v in n_range)
    n_max = n_values[-1]
    if grid < 2 ** (n_max + 1) or grid % 2**n_max != 0:
        raise ValueError("grid too coarse for the largest N (need >= 2^(N+1), divisible by 2^N)")
    a_exp = (1.0 / pd - eps) * p  # weight factor exponent, positive
    b_exp = (-1.0 + 2.0 * eps) * p  # vector factor exponent, in (-p, 0)
    xs = (np.arange(grid) + 0.5) / grid
    s_acc = np.zeros((grid, grid))
    rhs_acc = np.zeros(grid)
    rhs_exact_acc = 0.0
    lhs_vals, rhs_vals, rhs_exact_vals = [], [], []
    edges = np.linspace(0.0, 1.0, grid + 1)
    for j in range(n_max + 1):
        centers = np.arange(2**j) * 2.0**-j
        wj = 2.0 ** (-j * (1.0 + eps * p))
        d_a = np.abs(xs[:, None] - centers[None, :]) ** a_exp
        d_b = np.abs(xs[:, None] - centers[None, :]) ** b_exp
        s_acc += wj * (d_a @ d_b.T)
        rhs_acc += wj * (np.abs(xs[:, None] - centers[None, :]) ** (a_exp + b_exp)).sum(axis=1)
        for c in centers:
            rhs_exact_acc += wj * power_interval_integral(0.0, 1.0, c, a_exp + b_exp)
        if j in n_values:
            inner = (s_acc ** (1.0 / p)).mean(axis=1)
            lhs_vals.append(float((inner**p).mean()))
            rhs_vals.append(float(rhs_acc.mean()))
            rhs_exact_vals.append(float(rhs_exact_acc))
    fit = lambda ys: float(np.polyfit(n_values, np.log2(ys), 1)[0])
    sl, sr = fit(lhs_vals), fit(rhs_vals)
    return P22Result(
        n_values, lhs_vals, rhs_vals, sl, sr, sl / p, sr / p, rhs_exact_vals
    )


# ---------------------------------------------------------------------------
# Diverging running supremum over dyadic fractional parts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormalSupResult:
    j_values: list[int]
    s_values: list[float]
    std_errors: list[float]
    samples: int
    truncated_tail: bool  # True when some fractional part fell below 2^-64


def normal_sup_experiment(
    p: float,
    j_range,
    mc_samples: int = 100_000,
    seed: int = 0xA9,
    tail_bits: int = 64,
) -> NormalSupResult:
    """Monte Carlo estimate of S(J) = int_0^1 max_{j<=J} |log frac(2^j x) + 1|^p dx.

    Points are sampled as explicit bit streams, so dyadic shifts stay exact
    far beyond double precision; frac(2^j x) is reconstructed from 64 bits
    after position j.  The per-sample running max makes S(J) monotone in J
    by construction.
    """
    if mc_samples < 10_000:
        raise ValueError("need at least 1e4 samples")
    if tail_bits != 64:
        raise ValueError("the bit register is 64 bits wide")
    j_values = sorted(int(v) for v in j_range)
    j_max = j_values[-1]
    rng = np.random.default_rng(seed)
    scale = 0.5**64
    sums = np.zeros(len(j_values))
    sq_sums = np.zeros(len(j_values))
    done = 0
    truncated = False
    chunk = 20_000
    while done < mc_samples:
        b = min(chunk, mc_samples - done)
        bits = rng.integers(0, 2, size=(b, j_max + 65), dtype=np.uint64)
        # 64-bit register holding digits after position t of x = 0.b1 b2 ...
        reg = np.zeros(b, dtype=np.uint64)
        for k in range(64):
            reg = (reg << np.uint64(1)) | bits[:, k]
        running = np.full(b, -np.inf)
        out = np.empty((b, len(j_values)))
        col = 0
        for j in range(1, j_max + 1):
            reg = (reg << np.uint64(1)) | bits[:, j + 63]
            frac = reg.astype(np.float64) * scale
            if np.any(frac == 0.0):
                truncated = True
                frac = np.maximum(frac, scale)
            running = np.maximum(running, np.abs(np.log(frac) + 1.0) ** p)
            if j == j_values[col]:
                out[:, col] = running
                col += 1
        sums += out.sum(axis=0)
        sq_sums += (out**2).sum(axis=0)
        done += b
    means = sums / mc_samples
    variances = np.maximum(sq_sums / mc_samples - means**2, 0.0)
    stderr = np.sqrt(variances / mc_samples)
    return NormalSupResult(j_values, list(means), list(stderr), mc_samples, truncated)
