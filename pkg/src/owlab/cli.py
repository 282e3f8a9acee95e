"""Experiment runner, keyed-text configuration, and CSV output.

Usage:  owlab <experiment> --config <path> [--seed N] [--out DIR] [--threads N]

Configs are plain text, one "section.key = value" per line, '#' comments;
arrays are comma lists.  Every experiment writes <name>.csv plus
<name>_summary.csv into the output directory, with 12-significant-digit
decimal formatting and deterministic row order, so identical config and
seed reproduce byte-identical files.

Exit codes: 0 success, 1 unknown experiment or unusable config, 2
precondition violation, 3 numerical flag (non-convergence or divergence).
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import almostdiag, lpfilters, operators, seqspace, traceext, weights
from .dyadic import Cube, build_window

__all__ = ["main", "run_experiment", "emit_csv", "parse_config", "ConfigError"]

DEFAULT_SEED = 0xA9


class ConfigError(Exception):
    pass


def parse_config(text: str) -> dict:
    """Parse "section.key = value" lines into a flat dict of coerced values."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if not key or "." not in key:
            raise ConfigError(f"line {lineno}: keys must look like 'section.key'")
        out[key] = _coerce(val)
    return out


def _coerce(val: str):
    if "," in val:
        return [_coerce(v.strip()) for v in val.split(",")]
    low = val.lower()
    if low in ("true", "false"):
        return low == "true"
    if low in ("inf", "+inf"):
        return math.inf
    try:
        return int(val)
    except ValueError:
        pass
    try:
        return float(val)
    except ValueError:
        return val


class Config:
    def __init__(self, data: dict):
        self.data = data

    def get(self, key, default=None):
        return self.data.get(key, default)

    def require(self, key):
        if key not in self.data:
            raise ConfigError(f"missing required config key: {key}")
        return self.data[key]

    def get_list(self, key, default=None):
        v = self.data.get(key, default)
        if v is None:
            return None
        return v if isinstance(v, list) else [v]

    def int_range(self, key, default):
        v = self.get_list(key, default)
        return [int(x) for x in v]


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.12g}"
    return str(v)


def emit_csv(rows, header, path) -> None:
    """UTF-8 comma-separated table, header first, 12 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row arity {len(row)} does not match header arity {len(header)}")
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path):
    """Round-trip reader for emitted tables: (header, rows of floats/strings)."""
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        rows.append([_coerce(tok) for tok in line.split(",")])
    return header, rows


# ---------------------------------------------------------------------------
# Shared builders
# ---------------------------------------------------------------------------


def _build_weight(cfg: Config) -> weights.WeightBase:
    kind = cfg.get("weight.kind", "identity")
    m = int(cfg.get("weight.m", 1))
    exponent = float(cfg.get("weight.exponent", 2.0))
    n = int(cfg.get("window.n", 1))
    target = weights.TargetSpace(m, exponent)
    if kind == "identity":
        return weights.IdentityWeight(target, n)
    if kind == "diagonal-power":
        centers = cfg.get_list("weight.centers", [0.0] * m)
        exps = cfg.get_list("weight.exponents")
        if exps is None:
            raise ConfigError("missing required config key: weight.exponents")
        centers = tuple((float(c),) * n if not isinstance(c, list) else tuple(c) for c in centers)
        return weights.DiagonalPowerWeight(centers, tuple(float(g) for g in exps), target, n)
    if kind == "bmo-log":
        centers = cfg.get_list("weight.centers", [0.0] * m)
        centers = tuple((float(c),) * n if not isinstance(c, list) else tuple(c) for c in centers)
        inner = weights.DiagonalLogWeight(centers, weights.TargetSpace(m, exponent), n)
        return weights.bmo_block_weight(inner, exponent)
    raise ConfigError(f"unknown weight.kind: {kind}")


def _build_window(cfg: Config):
    n = int(cfg.get("window.n", 1))
    return build_window(
        n,
        int(cfg.get("window.j_min", 0)),
        int(cfg.get("window.j_max", 3)),
        cfg.get("window.lo", 0.0),
        cfg.get("window.hi", 1.0),
    )


def _build_space(cfg: Config) -> seqspace.SpaceParams:
    return seqspace.SpaceParams(
        float(cfg.get("space.s", 0.0)),
        float(cfg.get("space.p", 2.0)),
        float(cfg.get("space.q", 2.0)),
        str(cfg.get("space.kind", "besov")),
    )


def _build_rule(cfg: Config) -> weights.MidpointRule:
    return weights.MidpointRule(int(cfg.get("quad.nodes", 64)))


def _random_sequence(window, m, seed, density=0.7):
    rng = np.random.default_rng(seed)
    vals = {}
    for q in window.cubes():
        if rng.random() < density:
            vals[q] = rng.standard_normal(m)
    return seqspace.DyadicSequence(window, vals, m)


# ---------------------------------------------------------------------------
# Experiment runners: each returns (rows, header, summary_rows)
# ---------------------------------------------------------------------------


def _run_ap(cfg, seed):
    weight = _build_weight(cfg)
    window = _build_window(cfg)
    rule = _build_rule(cfg)
    p = float(cfg.get("ap.p", 2.0))
    value = weights.ap_constant(weight, p, window, rule, seed)
    rows = [(p, value)]
    return rows, ["p", "ap_constant"], [("ap_constant", value)]


def _run_rhi(cfg, seed):
    weight = _build_weight(cfg)
    window = _build_window(cfg)
    rule = _build_rule(cfg)
    p = float(cfg.get("rhi.p", 2.0))
    grid = [float(v) for v in cfg.get_list("rhi.eps_grid", [0.125, 0.25, 0.5, 1.0, 2.0])]
    thr = float(cfg.get("rhi.threshold", 4.0))
    est = weights.reverse_holder_index(weight, p, window, grid, thr, rule, seed)
    rows = [(p, est.eps, est.eta, est.worst_ratio_eps, est.worst_ratio_eta)]
    header = ["p", "eps", "eta", "worst_ratio_eps", "worst_ratio_eta"]
    summary = [("eps", est.eps), ("eta", est.eta), ("eps_degenerate", est.eps_degenerate)]
    return rows, header, summary


def _run_doubling(cfg, seed):
    weight = _build_weight(cfg)
    window = _build_window(cfg)
    rule = _build_rule(cfg)
    p = float(cfg.get("doubling.p", 2.0))
    est = weights.doubling_dimension(weight, p, window, rule, seed)
    return (
        [(p, est.beta, est.residual)],
        ["p", "beta", "residual"],
        [("beta", est.beta), ("residual", est.residual)],
    )


def _run_seq_norm(cfg, seed):
    weight = _build_weight(cfg)
    window = _build_window(cfg)
    params = _build_space(cfg)
    r = float(cfg.get("seq.r", params.p))
    family = seqspace.NormFamily.from_weight(weight, r, rule=_build_rule(cfg))
    t = _random_sequence(window, weight.m, seed, float(cfg.get("seq.density", 0.7)))
    value = seqspace.seq_norm(t, params, family)
    rows = [(q.j, ",".join(map(str, q.k)), family.value(q, v)) for q, v in sorted(
        t.values.items(), key=lambda kv: (kv[0].j, kv[0].k))]
    return rows, ["j", "k", "cube_norm"], [("seq_norm", value)]


def _run_ad_opnorm(cfg, seed):
    weight = _build_weight(cfg)
    window = _build_window(cfg)
    params = _build_space(cfg)
    dep = almostdiag.ADParams(
        float(cfg.require("ad.D")), float(cfg.require("ad.E")), float(cfg.require("ad.F"))
    )
    family = seqspace.NormFamily.from_weight(
        weight, float(cfg.get("seq.r", params.p)), rule=_build_rule(cfg)
    )
    B = almostdiag.canonical_ad_matrix(dep, window)
    probe_rows: list = []
    best, label = almostdiag.ad_opnorm_estimate(B, params, family, seed, collect=probe_rows)
    return (
        probe_rows,
        ["probe", "ratio"],
        [("opnorm_estimate", best), ("achieving_probe", label)],
    )


def _run_ad_compose(cfg, seed):
    window = _build_window(cfg)
    p1 = almostdiag.ADParams(
        float(cfg.require("ad.D1")), float(cfg.require("ad.E1")), float(cfg.require("ad.F1"))
    )
    p2 = almostdiag.ADParams(
        float(cfg.require("ad.D2")), float(cfg.require("ad.E2")), float(cfg.require("ad.F2"))
    )
    ratio, (q, r) = almostdiag.ad_compose_check(p1, p2, window)
    rows = [(window.j_min, window.j_max, ratio)]
    return rows, ["j_min", "j_max", "worst_ratio"], [("worst_ratio", ratio)]


def _run_sharp_ad(cfg, seed):
    res = almostdiag.sharp_ad_experiment(
        float(cfg.get("sharpad.p", 2.0)),
        float(cfg.get("sharpad.beta", 1.8)),
        cfg.int_range("sharpad.m_range", list(range(3, 10))),
        int(cfg.get("sharpad.x_nodes_per_center", 16)),
    )
    rows = [
        (m, l, c, res.seq_norm_full, pn, math.log2(l), math.log2(c))
        for m, l, c, pn in zip(
            res.m_values, res.lhs, res.lhs_level_corrected, res.seq_norm_partial
        )
    ]
    header = ["M", "lhs", "lhs_corrected", "t_norm", "t_norm_upto_M", "log2_lhs",
              "log2_lhs_corrected"]
    summary = [
        ("slope_raw", res.slope_raw),
        ("slope_corrected", res.slope_corrected),
        ("t_norm", res.seq_norm_full),
    ]
    return rows, header, summary


def _run_p22(cfg, seed):
    res = operators.p22_experiment(
        float(cfg.get("p22.p", 2.0)),
        float(cfg.get("p22.eps", 0.05)),
        cfg.int_range("p22.n_range", list(range(4, 12))),
        int(cfg.get("p22.grid", 4096)),
    )
    rows = [
        (n, l, r, math.log2(l), math.log2(r))
        for n, l, r in zip(res.n_values, res.lhs, res.rhs)
    ]
    header = ["N", "lhs", "rhs", "log2_lhs", "log2_rhs"]
    summary = [
        ("slope_lhs", res.slope_lhs),
        ("slope_rhs", res.slope_rhs),
        ("slope_lhs_rooted", res.slope_lhs_rooted),
        ("slope_rhs_rooted", res.slope_rhs_rooted),
    ]
    return rows, header, summary


def _run_normal_sup(cfg, seed):
    res = operators.normal_sup_experiment(
        float(cfg.get("normalsup.p", 2.0)),
        cfg.int_range("normalsup.j_range", [4, 16, 64, 256, 1024]),
        int(cfg.get("normalsup.samples", 100_000)),
        seed,
    )
    rows = list(zip(res.j_values, res.s_values, res.std_errors))
    summary = [
        ("growth_ratio", res.s_values[-1] / res.s_values[0]),
        ("monotone", all(b >= a for a, b in zip(res.s_values, res.s_values[1:]))),
        ("samples", res.samples),
    ]
    return rows, ["J", "S", "stderr"], summary


def _run_avg_norm(cfg, seed):
    weight = _build_weight(cfg)
    if weight.m != 1:
        raise ValueError("avg-norm runs on scalar weights")
    p = float(cfg.get("avg.p", 2.0))
    cube = Cube(1, int(cfg.get("avg.cube_j", 0)), (int(cfg.get("avg.cube_k", 0)),))
    rhs = operators.averaging_norm_rhs(weight, p, cube, _build_rule(cfg), seed)
    oracle, converged = operators.averaging_norm_oracle(
        weight, p, cube, int(cfg.get("avg.partition_cells", 256)), seed=seed
    )
    if not converged:
        raise FloatingPointError("averaging oracle ascent did not converge")
    rel = abs(rhs - oracle) / rhs if rhs else math.nan
    rows = [(p, rhs, oracle, rel)]
    return (
        rows,
        ["p", "closed_form", "oracle", "rel_diff"],
        [("closed_form", rhs), ("oracle", oracle), ("rel_diff", rel)],
    )


def _run_sparse(cfg, seed):
    weight = _build_weight(cfg)
    p = float(cfg.get("sparse.p", 2.0))
    grid = int(cfg.get("sparse.grid", 1024))
    trials = int(cfg.get("sparse.trials", 20))
    depths = cfg.int_range("sparse.depths", [1, 2, 3])
    top = Cube(1, 0, (0,))
    rng = np.random.default_rng(seed)
    rows = []
    worst = 0.0
    for depth in depths:
        family = operators.cantor_sparse_family(top, depth)
        ratios = []
        for _ in range(trials):
            f = operators.SampledFunction(0.0, 1.0, rng.standard_normal((grid, weight.m)))
            tf = operators.sparse_apply(family, f)
            den = operators.lp_weight_norm(f, weight, p)
            num = operators.lp_weight_norm(tf, weight, p)
            if den > 0:
                ratios.append(num / den)
        rows.append((depth, len(family.entries), max(ratios)))
        worst = max(worst, max(ratios))
    return rows, ["depth", "cubes", "max_ratio"], [("max_ratio", worst)]


def _run_trace_check(cfg, seed):
    n = int(cfg.get("window.n", 2))
    if n < 2:
        raise ValueError("trace check needs window.n >= 2")
    base_window = build_window(
        n - 1,
        int(cfg.get("window.j_min", 0)),
        int(cfg.get("window.j_max", 4 if n == 2 else 2)),
        cfg.get("window.lo", 0.0),
        cfg.get("window.hi", 1.0),
    )
    params = _build_space(cfg)
    m = int(cfg.get("weight.m", 1))
    u = _random_sequence(base_window, m, seed, float(cfg.get("seq.density", 0.7)))
    rows = []
    for k in cfg.int_range("trace.k_values", [-2, -1, 0, 1, 2]):
        chk = traceext.trace_norm_check(u, k, params)
        rows.append((k, chk.lifted_norm, chk.base_norm, chk.ratio))
    ratios = [r[3] for r in rows]
    summary = [("min_ratio", min(ratios)), ("max_ratio", max(ratios))]
    return rows, ["k", "lifted_norm", "base_norm", "ratio"], summary


def _run_lp_filters(cfg, seed):
    alpha = float(cfg.get("lp.alpha", 5.0 / 3.0))
    beta = float(cfg.get("lp.beta", 2.0))
    pair = lpfilters.build_lp_pair(
        alpha, beta, int(cfg.get("lp.grid_points", 2**14)), float(cfg.get("lp.cutoff", 2.0**6))
    )
    deviation = lpfilters.partition_check(pair)
    order = int(cfg.get("lp.decay_order", 5))
    wide = pair
    if cfg.get("lp.wide_alpha") is not None:
        wide = lpfilters.build_lp_pair(
            float(cfg.get("lp.wide_alpha")), float(cfg.get("lp.wide_beta", 3.1))
        )
    prof = lpfilters.conv_decay_profile(wide, order)
    rows = list(zip(pair.grid, pair.phat, pair.psihat))
    summary = [("partition_deviation", deviation), ("decay_slope", prof.slope)]
    summary += [(f"decay_constant_{d}", c) for d, c in zip(prof.level_gaps, prof.constants)]
    return rows, ["xi", "phat", "psihat"], summary


RUNNERS = {
    "ap-estimate": _run_ap,
    "rhi-estimate": _run_rhi,
    "doubling": _run_doubling,
    "seq-norm": _run_seq_norm,
    "ad-opnorm": _run_ad_opnorm,
    "ad-compose": _run_ad_compose,
    "sharp-ad": _run_sharp_ad,
    "p22": _run_p22,
    "normal-sup": _run_normal_sup,
    "avg-norm": _run_avg_norm,
    "sparse": _run_sparse,
    "trace-check": _run_trace_check,
    "lp-filters": _run_lp_filters,
}


def run_experiment(name: str, cfg: Config, out_dir: Path, seed: int) -> int:
    if name not in RUNNERS:
        print(f"unknown experiment: {name}", file=sys.stderr)
        return 1
    try:
        rows, header, summary = RUNNERS[name](cfg, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return 2
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    emit_csv(rows, header, out_dir / f"{name}.csv")
    emit_csv(
        [(k, v) for k, v in summary] + [("seed", seed)],
        ["key", "value"],
        out_dir / f"{name}_summary.csv",
    )
    for k, v in summary:
        print(f"{k},{_fmt(v)}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="owlab", description=__doc__)
    parser.add_argument("experiment", help="|".join(RUNNERS))
    parser.add_argument("--config", type=Path, default=None)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", type=Path, default=Path("."))
    parser.add_argument("--threads", type=int, default=1,
                        help="accepted for compatibility; runs are single-threaded")
    args = parser.parse_args(argv)
    data = {}
    if args.config is not None:
        try:
            data = parse_config(args.config.read_text(encoding="utf-8"))
        except (OSError, ConfigError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
    cfg = Config(data)
    seed = args.seed if args.seed is not None else int(cfg.get("run.seed", DEFAULT_SEED))
    return run_experiment(args.experiment, cfg, args.out, seed)


if __name__ == "__main__":
    sys.exit(main())
