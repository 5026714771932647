"""Command-line front end.

Exit status: 0 on success, 1 for usage or input errors, 2 when an internal
consistency check fails.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .fracdim import entropy_index, hausdorff_dim_estimate, mass_dim_estimate
from .hiergen import HierarchySpec, eta_window, smallest_L_for, zero_set, zeta_window
from .lab import (
    ExperimentConfig,
    config_from_mapping,
    emit_results,
    estimate_chi_zero,
    parse_config_text,
    run_pipeline,
)
from .percgrid import PercWindow, check_c1_bounds, extract_witness, find_permitted_path, reach_rows
from .renorm import build_forest, chi, preceq_M, psi_from_xi, thin_xi
from .runword import StructureError, WeightedWord, encode, translate_witness, ww_replay_agrees
from .seqcore import (
    BinaryWindow,
    InvalidOperand,
    ReplayError,
    WitnessSchedule,
    prefix_compatible_oracle,
    replay_agrees,
    sample_bernoulli,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser, *names: str) -> None:
    opts = {
        "L": dict(type=int, default=None, help="hierarchy base (default 2)"),
        "p": dict(type=float, default=None, help="Bernoulli parameter"),
        "window": dict(type=int, default=None, help="window length"),
        "depth": dict(type=int, default=None, help="percolation depth"),
        "trials": dict(type=int, default=None),
        "seed": dict(type=int, default=None),
    }
    for n in names:
        p.add_argument(f"--{n}", **opts[n])


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="compatlab", description=__doc__.splitlines()[0])
    io_opts = _Parser(add_help=False)
    io_opts.add_argument("--config", help="flat key=value file; flags override it")
    io_opts.add_argument("--out", help="write output here instead of stdout")
    io_opts.add_argument("--format", choices=("json", "csv"), default="json")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def command(name: str, help: str) -> argparse.ArgumentParser:
        return sub.add_parser(name, parents=[io_opts], help=help)

    g = command("generate", "sample a Bernoulli window or emit the hierarchical sequence")
    g.add_argument("--kind", choices=("bernoulli", "eta"), default="bernoulli")
    _common(g, "L", "p", "window", "seed")

    e = command("encode", "run-length encode a binary window into a weighted word")
    e.add_argument("bits", help="0/1 string, or @file")

    gr = command("group", "multiscale grouping of a binary window")
    gr.add_argument("--bits", help="0/1 string, or @file; sampled when absent")
    gr.add_argument("--M", type=int, default=None)
    _common(gr, "L", "p", "window", "seed")

    pc = command("percolate", "permitted-path reachability for the hierarchical word")
    pc.add_argument("--psi", help="comma-separated weighted word, or @file; sampled when absent")
    pc.add_argument("--svg", help="write a picture of the reached set and path")
    _common(pc, "L", "p", "window", "depth", "seed")

    w = command("witness", "schedule for a weighted-word pair")
    w.add_argument("--zeta", help="weighted word; default hierarchical window")
    w.add_argument("--psi", required=True)
    w.add_argument("--binary", action="store_true", help="also emit the binary schedule")
    _common(w, "L")

    v = command("verify", "replay a schedule and consult the DP oracle")
    v.add_argument("--eta", required=True)
    v.add_argument("--xi", required=True)
    v.add_argument("--schedule", required=True, help="schedule JSON, or @file")

    d = command("dimension", "dimension estimates for the zero set")
    d.add_argument("--levels", type=int, default=7, help="n_max = M**levels")
    d.add_argument("--eps", type=float, default=None, help="print the least L with dimension > 1 - eps")
    _common(d, "L")

    mc = command("montecarlo", "estimate P(chi = 0)")
    mc.add_argument("--M", type=int, default=None)
    _common(mc, "L", "p", "window", "trials", "seed")

    pl = command("pipeline", "end-to-end compatibility trials")
    pl.add_argument("--workers", type=int, default=None)
    _common(pl, "L", "p", "window", "depth", "trials", "seed")
    return ap


def _text_arg(value: str) -> str:
    if value.startswith("@"):
        return Path(value[1:]).read_text()
    return value


def _bits(value: str) -> BinaryWindow:
    text = _text_arg(value).strip()
    if text.startswith("{"):
        return BinaryWindow.from_json(json.loads(text))
    return BinaryWindow.from_string(text)


def _word(value: str) -> WeightedWord:
    text = _text_arg(value).strip()
    if text.startswith("{"):
        return WeightedWord.from_json(json.loads(text))
    return WeightedWord.parse(text)


def _config(args) -> ExperimentConfig:
    base = parse_config_text(Path(args.config).read_text()) if args.config else {}
    for k in ("L", "p", "window", "depth", "trials", "seed", "M", "workers", "out"):
        v = getattr(args, k, None)
        if v is not None:
            base[k] = v
    return config_from_mapping(base)


def _sampled(cfg: ExperimentConfig) -> BinaryWindow:
    return sample_bernoulli(cfg.p, cfg.window_length, cfg.seed)


def _percolate_svg(pw: PercWindow, path, depth: int) -> str:
    cell = 8
    W = min(pw.width, depth)
    rows = reach_rows(pw)
    reached = {(x, r.row) for r in rows for a, b in r.intervals for x in range(a, b + 1)}
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{(W + 2) * cell}" height="{(depth + 2) * cell}">']
    for y in range(depth + 1):
        for x in range(W + 1):
            if (x == 0 and y == 0) or (x and y and pw.zeta.weights[x - 1] >= pw.psi.weights[y - 1]):
                fill = "black" if (x, y) in reached else "#bbb"
                cy = (depth - y + 1) * cell
                out.append(f'<circle cx="{(x + 1) * cell}" cy="{cy}" r="1.5" fill="{fill}"/>')
    if path is not None:
        pts = " ".join(f"{(x + 1) * cell},{(depth - y + 1) * cell}" for x, y in path.vertices())
        out.append(f'<polyline points="{pts}" fill="none" stroke="red" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_generate(args, cfg):
    if args.kind == "eta":
        return eta_window(cfg.L, cfg.window_length).to_json()
    return _sampled(cfg).to_json()


def cmd_encode(args, cfg):
    return encode(_bits(args.bits)).to_json()


def cmd_group(args, cfg):
    xi = _bits(args.bits) if args.bits else _sampled(cfg)
    M = args.M or cfg.M
    f = build_forest(xi, M)
    c = chi(f)
    out = {"forest": f.to_json(), "chi": c}
    if c == 0:
        psi = psi_from_xi(f)
        out["psi"] = {str(i + 1): w for i, w in enumerate(psi.weights) if w}
        out["psi_length"] = len(psi)
        out["preceq"] = preceq_M(psi, encode(thin_xi(xi, f)), M)
    return out


def cmd_percolate(args, cfg):
    if args.psi:
        psi = _word(args.psi)
    else:
        f = build_forest(_sampled(cfg), cfg.M)
        if chi(f) != 0:
            raise UsageError(f"sampled window has chi = {chi(f)}; try another seed")
        psi = psi_from_xi(f)
    depth = len(psi) if cfg.depth is None else min(cfg.depth, len(psi))
    psi = psi.prefix(depth)
    pw = PercWindow(zeta_window(cfg.L, depth), psi)
    path = find_permitted_path(pw, depth)
    margins = {}
    k = 1
    while True:
        rep = check_c1_bounds(pw, k, cfg.L)
        if rep.reason.startswith("no weight"):
            break
        margins[str(k)] = rep.to_json()
        k += 1
    if args.svg:
        Path(args.svg).write_text(_percolate_svg(pw, path, depth))
    return {
        "depth": depth,
        "reached": path is not None,
        "path": path.to_json() if path else None,
        "segments": [r.to_json() for r in reach_rows(pw)],
        "c1": margins,
    }


def cmd_witness(args, cfg):
    psi = _word(args.psi)
    zeta = _word(args.zeta) if args.zeta else zeta_window(cfg.L, len(psi))
    pw = PercWindow(zeta, psi)
    path = find_permitted_path(pw)
    if path is None:
        return {"reached": False}
    s = extract_witness(path, pw)
    out = {"reached": True, "path": path.to_json(), "schedule": s.to_json(), "replay_ok": ww_replay_agrees(zeta, psi, s)}
    if args.binary:
        out["binary_schedule"] = translate_witness(s, zeta, psi).to_json()
    return out


def cmd_verify(args, cfg):
    eta, xi = _bits(args.eta), _bits(args.xi)
    s = WitnessSchedule.from_json(json.loads(_text_arg(args.schedule)))
    ok = replay_agrees(eta, xi, s)
    oracle = prefix_compatible_oracle(eta, xi, min(s.target_length, len(eta), len(xi)))
    return {"replay_ok": ok, "oracle_ok": oracle is not None, "target_length": s.target_length}


def cmd_dimension(args, cfg):
    if args.eps is not None:
        return {"eps": args.eps, "L": smallest_L_for(args.eps)}
    spec = HierarchySpec(cfg.L)
    n_max = spec.M**args.levels
    A = zero_set(spec, n_max)
    m = mass_dim_estimate(A, n_max, spec.M)
    h = hausdorff_dim_estimate(A, spec.M, n_max)
    e = entropy_index(A, spec.M, n_max)
    return {
        "L": cfg.L,
        "M": spec.M,
        "n_max": n_max,
        "exact": spec.dimension,
        "mass_lower": m.lower,
        "mass_upper": m.upper,
        "hausdorff": h.estimate,
        "entropy": e.estimate,
    }


def cmd_montecarlo(args, cfg):
    if args.M:
        cfg.M = args.M
    return {"config": cfg.to_json(), "result": estimate_chi_zero(cfg)}


def cmd_pipeline(args, cfg):
    records, summary = run_pipeline(cfg)
    return emit_results(records, args.format, None, cfg, summary)


COMMANDS = {
    "generate": cmd_generate,
    "encode": cmd_encode,
    "group": cmd_group,
    "percolate": cmd_percolate,
    "witness": cmd_witness,
    "verify": cmd_verify,
    "dimension": cmd_dimension,
    "montecarlo": cmd_montecarlo,
    "pipeline": cmd_pipeline,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = _config(args)
        result = COMMANDS[args.cmd](args, cfg)
    except (UsageError, InvalidOperand, StructureError, ReplayError, ValueError, OSError) as exc:
        print(f"compatlab: error: {exc}", file=sys.stderr)
        return 1
    except AssertionError as exc:
        print(f"compatlab: internal check failed: {exc}", file=sys.stderr)
        return 2
    text = result if isinstance(result, str) else json.dumps(result, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
