"""Monte Carlo harness: sample a window, group it, percolate, extract and
check a witness, and summarise many trials with Wilson intervals."""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np
from scipy import stats

from . import __version__
from .hiergen import HierarchySpec, tilde_zeta_window, zeta_window
from .percgrid import PercWindow, PermittedPath, check_path, extract_witness, find_permitted_path
from .renorm import (
    NOT_DETERMINED,
    build_forest,
    chi,
    kept_positions,
    preceq_M,
    psi_from_xi,
    thin_xi,
    thinning_steps,
)
from .runword import WeightedWord, decode, encode, is_M_spaced, translate_witness, ww_replay_agrees
from .seqcore import (
    BinaryWindow,
    InvalidOperand,
    WitnessSchedule,
    prefix_compatible_oracle,
    replay_agrees,
    sample_uniforms,
    threshold,
)

SPOT_CHECK_CELLS = 4_000_000


@dataclass
class ExperimentConfig:
    L: int = 2
    p: float = 1e-4
    window_length: int = 10**6
    depth: int | None = None
    trials: int = 200
    seed: int = 0
    output_path: str | None = None
    M: int | None = None  # grouping parameter; defaults to 3(L+1)
    workers: int = 1

    def __post_init__(self):
        if self.L < 2:
            raise InvalidOperand("L must be at least 2")
        if not 0.0 <= self.p <= 1.0:
            raise InvalidOperand("p must lie in [0, 1]")
        if self.window_length < 1 or self.trials < 0:
            raise InvalidOperand("window_length must be positive and trials nonnegative")
        if self.depth is not None and self.depth < 0:
            raise InvalidOperand("depth must be nonnegative")
        if self.M is None:
            self.M = 3 * (self.L + 1)
        if self.M < 3:
            raise InvalidOperand("M must be at least 3")

    @property
    def in_regime(self) -> bool:
        """Whether ``p < 1/(576 (L+1)^2)``."""
        return Fraction(self.p) < HierarchySpec(self.L).p_threshold

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("output_path")  # where results go does not change them
        d["in_regime"] = self.in_regime
        return d


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidOperand(f"config line {n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


_CONFIG_TYPES = {
    "L": int,
    "p": float,
    "window_length": int,
    "window": int,
    "depth": int,
    "trials": int,
    "seed": int,
    "output_path": str,
    "out": str,
    "M": int,
    "workers": int,
}


def config_from_mapping(d: dict) -> ExperimentConfig:
    kw = {}
    for k, v in d.items():
        if k not in _CONFIG_TYPES:
            raise InvalidOperand(f"unknown config key {k!r}")
        if v is None:
            continue
        name = {"window": "window_length", "out": "output_path"}.get(k, k)
        kw[name] = _CONFIG_TYPES[k](v)
    return ExperimentConfig(**kw)


def wilson_interval(successes: int, n: int, level: float = 0.95) -> tuple[float, float]:
    if n == 0:
        return (0.0, 1.0)
    ci = stats.binomtest(successes, n).proportion_ci(confidence_level=level, method="wilson")
    return (float(ci.low), float(ci.high))


def trial_seed(seed: int, i: int) -> int:
    return seed ^ i


# -- one pipeline trial ------------------------------------------------------


@dataclass
class TrialRecord:
    trial: int
    seed: int
    n_points: int = 0
    chi_status: int | str = NOT_DETERMINED
    m_spaced_ok: bool = False
    preceq_ok: bool = False
    depth: int = 0
    path_reached_depth: bool = False
    witness_ok: bool = False
    oracle_ok: bool | None = None
    success: bool = False
    failure: str | None = None
    witness: dict | None = None
    spot_check: dict | None = None
    timings: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("timings")
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "TrialRecord":
        return cls(**obj)


def _heavy_prefix(path: PermittedPath, count: int) -> PermittedPath:
    """The path cut at its ``count``-th heavy vertex after the origin."""
    idx = [i for i, h in enumerate(path.heavy) if h][count]
    return PermittedPath(path.waypoints[: idx + 1], path.heavy[: idx + 1])


def _binary_len(weights) -> int:
    return sum(w if w else 1 for w in weights)


def spot_check(
    xi: BinaryWindow,
    forest,
    path: PermittedPath,
    zeta_t: WeightedWord,
    psi_t: WeightedWord,
    cells: int = SPOT_CHECK_CELLS,
) -> dict:
    """Check the binary witness on the longest path prefix whose windows fit
    ``len(eta) * len(xi) <= cells``.

    The schedule on the raw ``xi`` is the thinning deletions followed by the
    translated weighted witness.  It is replayed, and the DP oracle must
    independently certify the same common-prefix length.
    """
    heavy = path.heavy_vertices()
    kept = kept_positions(forest)
    thin = thinning_steps(forest)
    zw_all, pw_all = zeta_t.weights, psi_t.weights
    best = None
    b_eta = b_xit = 0
    x0 = l0 = 0
    for K, (x, l) in enumerate(heavy):
        b_eta += _binary_len(zw_all[x0:x])
        b_xit += _binary_len(pw_all[l0:l])
        x0, l0 = x, l
        b_xi = int(kept[b_xit - 1]) if b_xit else 0
        if b_eta * max(b_xi, 1) > cells:
            break
        best = (K, x, l, b_xit, b_xi)
    if best is None:
        return {"blocks": None, "replay_ok": False, "oracle_ok": None}
    K, x, l, b_xit, b_xi = best
    zw, pw = zeta_t.prefix(x), psi_t.prefix(l)
    sub = _heavy_prefix(path, K)
    ws = extract_witness(sub, PercWindow(zw, pw))
    bs = translate_witness(ws, zw, pw)
    eta_p = decode(zw)
    xi_p = BinaryWindow(xi.bits[:b_xi])
    pre = [s for s in thin if s.index <= b_xi]
    full = WitnessSchedule(tuple(pre) + bs.steps, bs.target_length)
    ok = replay_agrees(eta_p, xi_p, full)
    oracle = prefix_compatible_oracle(eta_p, xi_p, bs.target_length)
    return {
        "blocks": K,
        "eta_length": len(eta_p),
        "xi_length": len(xi_p),
        "target": bs.target_length,
        "steps": len(full),
        "replay_ok": bool(ok),
        "oracle_ok": oracle is not None and replay_agrees(eta_p, xi_p, oracle),
    }


def run_trial(cfg: ExperimentConfig, i: int) -> TrialRecord:
    seed = trial_seed(cfg.seed, i)
    rec = TrialRecord(trial=i, seed=seed)
    clock = time.perf_counter
    t0 = clock()
    xi = threshold(sample_uniforms(cfg.window_length, seed), cfg.p)
    forest = build_forest(xi, cfg.M)
    rec.n_points = int(forest.gamma_points.size)
    rec.chi_status = chi(forest)
    rec.timings["group"] = clock() - t0
    if rec.chi_status != 0:
        rec.failure = "chi"
        return rec
    psi = psi_from_xi(forest)
    rec.m_spaced_ok = bool(is_M_spaced(psi, cfg.M))
    psi_t = encode(thin_xi(xi, forest))
    rec.preceq_ok = preceq_M(psi, psi_t, cfg.M)
    depth = len(psi) if cfg.depth is None else min(cfg.depth, len(psi))
    rec.depth = depth
    if not (rec.m_spaced_ok and rec.preceq_ok):
        rec.failure = "spacing" if not rec.m_spaced_ok else "preceq"
        return rec
    if len(psi_t) < depth:
        depth = rec.depth = len(psi_t)
    psi, psi_t = psi.prefix(depth), psi_t.prefix(depth)
    t1 = clock()
    zeta = zeta_window(cfg.L, depth)
    pw = PercWindow(zeta, psi)
    path = find_permitted_path(pw, depth)
    rec.timings["percolate"] = clock() - t1
    rec.path_reached_depth = path is not None
    if path is None:
        rec.failure = "path"
        return rec
    t2 = clock()
    ws = extract_witness(path, pw)
    zeta_t = tilde_zeta_window(cfg.L, depth)
    pw_t = PercWindow(zeta_t, psi_t)
    check_path(pw_t, path)
    ws_t = extract_witness(path, pw_t)
    rec.witness_ok = ww_replay_agrees(zeta, psi, ws) and ww_replay_agrees(zeta_t, psi_t, ws_t)
    rec.witness = ws.to_json()
    rec.timings["witness"] = clock() - t2
    if not rec.witness_ok:
        rec.failure = "witness"
        return rec
    t3 = clock()
    sc = spot_check(xi, forest, path, zeta_t, psi_t)
    rec.timings["oracle"] = clock() - t3
    rec.spot_check = sc
    rec.oracle_ok = bool(sc["oracle_ok"]) if sc["oracle_ok"] is not None else None
    if not (sc["replay_ok"] and rec.oracle_ok):
        rec.failure = "oracle"
        return rec
    rec.success = True
    return rec


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(workers) as ex:
        return list(ex.map(fn, items))


class _Trial:
    def __init__(self, cfg):
        self.cfg = cfg

    def __call__(self, i):
        return run_trial(self.cfg, i)


def summarise(cfg: ExperimentConfig, records: list[TrialRecord]) -> dict:
    n = len(records)
    k = sum(r.success for r in records)
    lo, hi = wilson_interval(k, n)
    failures: dict[str, int] = {}
    for r in records:
        if r.failure:
            failures[r.failure] = failures.get(r.failure, 0) + 1
    return {
        "trials": n,
        "successes": k,
        "fraction": k / n if n else None,
        "wilson95": [lo, hi],
        "regime": "in-theorem" if cfg.in_regime else "out-of-regime",
        "positivity_supported": (lo > 0) if cfg.in_regime and n else None,
        "failures": dict(sorted(failures.items())),
    }


def run_pipeline(cfg: ExperimentConfig) -> tuple[list[TrialRecord], dict]:
    records = _map(_Trial(cfg), range(cfg.trials), cfg.workers)
    return records, summarise(cfg, records)


# -- chi Monte Carlo ---------------------------------------------------------


def _chi_of(args) -> int | str:
    M, p, N, seed = args
    return chi(build_forest(threshold(sample_uniforms(N, seed), p), M))


def estimate_chi_zero(cfg: ExperimentConfig) -> dict:
    """Fraction of trials whose grouping certifies ``chi = 0``."""
    vals = _map(_chi_of, [(cfg.M, cfg.p, cfg.window_length, trial_seed(cfg.seed, i)) for i in range(cfg.trials)], cfg.workers)
    hist: dict[str, int] = {}
    for v in vals:
        hist[str(v)] = hist.get(str(v), 0) + 1
    zero = sum(v == 0 for v in vals)
    nd = sum(v == NOT_DETERMINED for v in vals)
    n = len(vals)
    lo, hi = wilson_interval(zero, n)
    return {
        "trials": n,
        "chi_zero": zero,
        "estimate": zero / n if n else None,
        "wilson95": [lo, hi],
        "not_determined_rate": nd / n if n else None,
        "histogram": dict(sorted(hist.items())),
        "regime": "in-theorem" if Fraction(cfg.p) < Fraction(1, 64 * cfg.M**2) else "out-of-regime",
    }


def chi_zero_sweep(cfg: ExperimentConfig, ps: Iterable[float]) -> list[dict]:
    """``chi = 0`` frequencies at several ``p`` from one shared uniform array per
    trial, so the windows are pointwise ordered in ``p``."""
    ps = list(ps)
    zero = [0] * len(ps)
    for i in range(cfg.trials):
        u = sample_uniforms(cfg.window_length, trial_seed(cfg.seed, i))
        for t, p in enumerate(ps):
            zero[t] += chi(build_forest(threshold(u, p), cfg.M)) == 0
    return [{"p": p, "chi_zero": z, "estimate": z / cfg.trials if cfg.trials else None} for p, z in zip(ps, zero)]


def mass_start_profile(M: int, p: float, window_length: int, trials: int, seed: int = 0, max_mass: int = 6) -> dict:
    """Per-site frequency of stable clusters (any level) starting at a site,
    by mass, and a least-squares fit of its logarithm against the mass."""
    counts = np.zeros(max_mass + 1, dtype=np.int64)
    sites = 0
    for i in range(trials):
        f = build_forest(threshold(sample_uniforms(window_length, trial_seed(seed, i)), p), M)
        sites += f.stable_length()
        for n in f.nodes:
            if not n.provisional and n.mass <= max_mass:
                counts[n.mass] += 1
    masses = np.flatnonzero(counts[1:]) + 1
    freq = counts / max(sites, 1)
    out = {"sites": sites, "counts": counts.tolist(), "frequency": freq.tolist(), "slope": None, "slope_ci": None}
    if masses.size >= 3:
        fit = stats.linregress(masses, np.log(freq[masses]))
        half = stats.t.ppf(0.975, masses.size - 2) * fit.stderr
        out["slope"] = float(fit.slope)
        out["slope_ci"] = [float(fit.slope - half), float(fit.slope + half)]
    return out


# -- persistence ---------------------------------------------------------------

CSV_FIELDS = (
    "trial",
    "seed",
    "n_points",
    "chi_status",
    "m_spaced_ok",
    "preceq_ok",
    "depth",
    "path_reached_depth",
    "witness_ok",
    "oracle_ok",
    "success",
    "failure",
)


def results_document(cfg: ExperimentConfig | None, records: list[TrialRecord], summary: dict | None) -> dict:
    return {
        "version": __version__,
        "config": cfg.to_json() if cfg else None,
        "summary": summary if summary is not None else {"trials": 0},
        "records": [r.to_json() for r in records],
    }


def emit_results(
    records: list[TrialRecord],
    fmt: str = "json",
    path: str | None = None,
    cfg: ExperimentConfig | None = None,
    summary: dict | None = None,
) -> str:
    """Serialise records; writes to ``path`` when given and returns the text."""
    if fmt == "json":
        text = json.dumps(results_document(cfg, records, summary), indent=2) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in records:
            d = r.to_json()
            w.writerow({k: d[k] for k in CSV_FIELDS})
        text = buf.getvalue()
    else:
        raise InvalidOperand(f"unknown format {fmt!r}")
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def load_results(text: str) -> tuple[dict | None, dict, list[TrialRecord]]:
    doc = json.loads(text)
    return doc["config"], doc["summary"], [TrialRecord.from_json(r) for r in doc["records"]]


__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "parse_config_text",
    "config_from_mapping",
    "wilson_interval",
    "run_trial",
    "run_pipeline",
    "summarise",
    "spot_check",
    "estimate_chi_zero",
    "chi_zero_sweep",
    "mass_start_profile",
    "emit_results",
    "load_results",
]
