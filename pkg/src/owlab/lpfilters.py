"""1D band-limited filter pairs on a frequency grid.

The analysis filter is a smooth radial bump supported on the annulus
1/beta <= |xi| <= beta and equal to 1 on 1/alpha <= |xi| <= alpha, with
sqrt(2) < alpha < beta < pi so consecutive dyadic dilates of the inner
annulus overlap.  The synthesis filter is the bump divided by the sum of
its squared dyadic dilates, which makes

    sum_j  phat(-2^j xi) * psihat(2^j xi)  =  1   for every xi != 0

an algebraic identity.  Filters are carried as callables (exact evaluation
at arbitrary frequencies) plus sampled arrays on the grid for export.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FilterPair",
    "build_lp_pair",
    "partition_check",
    "conv_decay_check",
    "ConvDecayResult",
]


# smoothed step built from the standard compactly supported mollifier
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(48)


def _mollifier(t: np.ndarray) -> np.ndarray:
    """exp(1 - 1/(1 - t^2)) on (-1, 1), zero outside."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    ti = t[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti * ti))
    return out


def _mollifier_mass(lo: float, hi: float) -> np.ndarray:
    """Integral of the mollifier over [lo, hi] by Gauss-Legendre panels."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    mid = (lo + hi) / 2.0
    half = (hi - lo) / 2.0
    pts = mid[:, None] + half[:, None] * _GL_NODES[None, :]
    return half * (_mollifier(pts) @ _GL_WEIGHTS)


_TOTAL_MASS = float(_mollifier_mass(-1.0, 1.0)[0])


def _smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity transition from 1 at s <= 0 to 0 at s >= 1."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    out[s <= 0.0] = 1.0
    mid = (s > 0.0) & (s < 1.0)
    if np.any(mid):
        out[mid] = _mollifier_mass(2.0 * s[mid] - 1.0, 1.0) / _TOTAL_MASS
    return out


@dataclass(frozen=True)
class FilterPair:
    """Analysis/synthesis filter pair with band parameters and grid samples."""

    alpha: float
    beta: float
    grid: np.ndarray
    phat: np.ndarray
    psihat: np.ndarray

    def phat_fn(self, xi) -> np.ndarray:
        return _bump(np.asarray(xi, dtype=float), self.alpha, self.beta)

    def psihat_fn(self, xi) -> np.ndarray:
        return _psihat(np.asarray(xi, dtype=float), self.alpha, self.beta)


def _bump(xi: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Radial bump: 1 on [1/alpha, alpha], supported on [1/beta, beta]."""
    r = np.abs(xi)
    out = np.zeros_like(r)
    rising = (r > 1.0 / beta) & (r < 1.0 / alpha)
    out[rising] = _smooth_step(
        (1.0 / alpha - r[rising]) / (1.0 / alpha - 1.0 / beta)
    )
    out[(r >= 1.0 / alpha) & (r <= alpha)] = 1.0
    falling = (r > alpha) & (r < beta)
    out[falling] = _smooth_step((r[falling] - alpha) / (beta - alpha))
    return out


def _dyadic_square_sum(xi: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """sum_k bump(2^k xi)^2, a finite sum since the support is an annulus."""
    r = np.abs(np.asarray(xi, dtype=float))
    out = np.zeros_like(r)
    pos = r > 0.0
    rp = r[pos]
    k_lo = np.floor(np.log2(1.0 / (beta * rp))).astype(int)
    k_hi = np.ceil(np.log2(beta / rp)).astype(int)
    acc = np.zeros_like(rp)
    for shift in range(int((k_hi - k_lo).max()) + 1):
        acc += _bump(rp * 2.0 ** (k_lo + shift), alpha, beta) ** 2
    out[pos] = acc
    return out


def _psihat(xi: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Synthesis filter: bump(-xi) / sum_k bump(2^k xi)^2 (real, even bump)."""
    num = _bump(-np.asarray(xi, dtype=float), alpha, beta)
    out = np.zeros_like(num)
    nz = num != 0.0
    if np.any(nz):
        den = _dyadic_square_sum(np.asarray(xi, dtype=float)[nz], alpha, beta)
        out[nz] = num[nz] / den
    return out


def build_lp_pair(
    alpha: float,
    beta: float,
    grid_points: int = 2**14,
    grid_cutoff: float = 2.0**6,
) -> FilterPair:
    """Construct and validate a filter pair on a symmetric uniform grid."""
    if not math.sqrt(2.0) < alpha < beta < math.pi:
        raise ValueError("band parameters must satisfy sqrt(2) < alpha < beta < pi")
    grid = np.linspace(-grid_cutoff, grid_cutoff, grid_points, endpoint=False)
    nz = grid != 0.0
    den = _dyadic_square_sum(grid[nz], alpha, beta)
    if np.any(den < 1e-12):
        raise ValueError("square-sum denominator vanishes on the grid; parameters rejected")
    phat = _bump(grid, alpha, beta)
    psihat = _psihat(grid, alpha, beta)
    return FilterPair(alpha, beta, grid, phat, psihat)


def partition_check(pair: FilterPair) -> float:
    """Max over nonzero grid frequencies of |sum_j phat(-2^j xi) psihat(2^j xi) - 1|."""
    xi = pair.grid[pair.grid != 0.0]
    r = np.abs(xi)
    j_lo = np.floor(np.log2(1.0 / (pair.beta * r))).astype(int)
    j_hi = np.ceil(np.log2(pair.beta / r)).astype(int)
    total = np.zeros_like(r)
    for shift in range(int((j_hi - j_lo).max()) + 1):
        scaled = xi * 2.0 ** (j_lo + shift)
        total += pair.phat_fn(-scaled) * pair.psihat_fn(scaled)
    return float(np.max(np.abs(total - 1.0)))


@dataclass(frozen=True)
class ConvDecayResult:
    level_gaps: list[int]
    constants: list[float]  # C_d = max_x |phi_i * psi_j(x)| / envelope(x)
    slope: float  # fitted log2(C_d) decay rate per level gap


def _dilated_product_transform(pair: FilterPair, i: int, j: int, grid_points: int,
                               cutoff: float):
    """Samples of phat(xi/2^i) psihat(xi/2^j) and the dual space grid."""
    if cutoff < pair.beta * 2.0 ** max(i, j):
        raise ValueError("aliasing: grid cutoff below the band product support")
    dxi = 2.0 * cutoff / grid_points
    xi = (np.arange(grid_points) - grid_points // 2) * dxi
    product = pair.phat_fn(xi / 2.0**i) * pair.psihat_fn(xi / 2.0**j)
    # inverse transform with the continuous normalization 1/(2 pi)
    shifted = np.fft.ifftshift(product)
    conv = np.fft.fftshift(np.fft.ifft(shifted)) * grid_points * dxi / (2.0 * math.pi)
    x = np.fft.fftshift(np.fft.fftfreq(grid_points, d=dxi)) * 2.0 * math.pi
    return x, conv


def conv_decay_check(
    pair: FilterPair,
    i: int,
    j: int,
    decay_order: int,
    grid_points: int = 2**15,
    cutoff: float = 2.0**7,
) -> float:
    """Smallest C with |phi_i * psi_j(x)| <= C 2^(-|i-j| M) phi_min(x) on the
    space grid, where phi_min(x) = 2^min(i,j) (1 + 2^min(i,j)|x|)^(-M)."""
    x, conv = _dilated_product_transform(pair, i, j, grid_points, cutoff)
    jm = min(i, j)
    envelope = 2.0**jm * (1.0 + 2.0**jm * np.abs(x)) ** (-float(decay_order))
    ratio = np.abs(conv) / envelope
    return float(np.max(ratio)) * 2.0 ** (abs(i - j) * decay_order)


def conv_decay_profile(
    pair: FilterPair,
    decay_order: int,
    max_gap: int = 3,
    grid_points: int = 2**15,
    cutoff: float = 2.0**7,
) -> ConvDecayResult:
    """Decay constants across level gaps 0..max_gap at i = 0, plus the
    fitted slope of log2 C_d; the slope should be steeper than -decay_order
    (the envelope's gap factor is excluded from C_d here)."""
    gaps = list(range(max_gap + 1))
    consts = []
    for d in gaps:
        x, conv = _dilated_product_transform(pair, 0, d, grid_points, cutoff)
        envelope = (1.0 + np.abs(x)) ** (-float(decay_order))
        consts.append(float(np.max(np.abs(conv) / envelope)))
    floor = max(consts) * 1e-15
    logs = np.log2(np.maximum(consts, floor))
    slope = float(np.polyfit(gaps, logs, 1)[0])
    return ConvDecayResult(gaps, consts, slope)
