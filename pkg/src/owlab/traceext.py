"""Sequence-level trace and extension maps between dimensions n and n-1.

An (n-1)-dimensional sequence u lifts to the n-dimensional sequence that
places l(I)^(1/2) u_I on the slab cube I x [k l(I), (k+1) l(I)) and zero
elsewhere.  For unweighted Besov norms the lift is an exact isometry onto
the (s - 1/p)-smoothness space one dimension down; for Triebel-Lizorkin
norms it is an equivalence with constants governed by the disjoint
middle-third slabs.  The weighted transfer criterion compares a base-side
norm family against the lifted-cube family, direction by direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dyadic import Box, Cube, Window
from .seqspace import BESOV, DyadicSequence, NormFamily, SpaceParams, seq_norm

__all__ = [
    "slab_cube",
    "lift_sequence",
    "restrict_sequence",
    "trace_norm_check",
    "TraceCheck",
    "trace_partner_params",
    "pullback_family",
]


def pullback_family(lifted_family: NormFamily, k: int) -> NormFamily:
    """Base-side family d_I(e) := rho at the slab-k cube over I."""
    return NormFamily.from_callable(
        lambda base, vec: lifted_family.value(slab_cube(base, k), vec),
        u=lifted_family.u,
    )


def slab_cube(base: Cube, k: int) -> Cube:
    """The n-dimensional cube I x [k l(I), (k+1) l(I)) over a base cube I."""
    return Cube(base.n + 1, base.j, base.k + (k,))


def _lifted_window(window: Window, k: int) -> Window:
    """Window in dimension n containing every slab-k cube over the base window."""
    positions = [k * 2.0**-j for j in range(window.j_min, window.j_max + 1)]
    positions += [(k + 1) * 2.0**-j for j in range(window.j_min, window.j_max + 1)]
    lo = window.box.lo + (min(positions),)
    hi = window.box.hi + (max(positions),)
    return Window(window.n + 1, window.j_min, window.j_max, Box(lo, hi))


def lift_sequence(u: DyadicSequence, k: int) -> DyadicSequence:
    """Slab embedding: value l(I)^(1/2) u_I on the slab-k cube over each I."""
    window = _lifted_window(u.window, k)
    vals = {}
    for base, v in u.values.items():
        vals[slab_cube(base, k)] = math.sqrt(base.side) * v
    return DyadicSequence(window, vals, u.m)


def restrict_sequence(t: DyadicSequence, k: int) -> DyadicSequence:
    """Left inverse of the lift: u_I = l(I)^(-1/2) t on the slab-k cube over I."""
    w = t.window
    base_window = Window(w.n - 1, w.j_min, w.j_max, Box(w.box.lo[:-1], w.box.hi[:-1]))
    vals = {}
    for q, v in t.values.items():
        if q.k[-1] != k:
            continue
        base = Cube(q.n - 1, q.j, q.k[:-1])
        vals[base] = v / math.sqrt(base.side)
    return DyadicSequence(base_window, vals, t.m)


def trace_partner_params(params: SpaceParams) -> SpaceParams:
    """Base-side Besov parameters (s - 1/p, p, r) with r = q (Besov) or p (TL)."""
    r = params.q if params.kind == BESOV else params.p
    return SpaceParams(params.s - 1.0 / params.p, params.p, r, BESOV)


@dataclass(frozen=True)
class TraceCheck:
    lifted_norm: float
    base_norm: float
    ratio: float  # base / lifted
    transfer_ratios: list[float]  # sampled d_I(e) / rho_{Q(I,k)}(e)


def trace_norm_check(
    u: DyadicSequence,
    k: int,
    params: SpaceParams,
    base_family: NormFamily | None = None,
    lifted_family: NormFamily | None = None,
    probe_seed: int = 0xA9,
    n_probes: int = 3,
) -> TraceCheck:
    """Both sides of the lift identity plus sampled per-cube transfer ratios.

    ``params`` describes the n-dimensional side; the base side uses the
    partner parameters.  Defaults to unweighted families on both sides, in
    which case the Besov ratio is exactly 1.
    """
    if base_family is None:
        base_family = NormFamily.unweighted(2.0)
    if lifted_family is None:
        lifted_family = NormFamily.unweighted(2.0)
    lifted = lift_sequence(u, k)
    lifted_norm = seq_norm(lifted, params, lifted_family)
    base_params = trace_partner_params(params)
    base_norm = seq_norm(u, base_params, base_family)
    ratio = base_norm / lifted_norm if lifted_norm > 0.0 else math.nan
    rng = np.random.default_rng(probe_seed)
    probes = [np.eye(u.m)[i] for i in range(u.m)]
    probes += [rng.standard_normal(u.m) for _ in range(n_probes)]
    transfer = []
    for base in u.values:
        q = slab_cube(base, k)
        for e in probes:
            den = lifted_family.value(q, e)
            if den > 0.0:
                transfer.append(base_family.value(base, e) / den)
    return TraceCheck(lifted_norm, base_norm, ratio, transfer)
