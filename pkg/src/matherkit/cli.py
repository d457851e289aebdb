"""Command line entry point: ``matherkit <subcommand> --config spec.json ...``.

Numeric defaults live in :data:`DEFAULTS`. Each value can be overridden by
the JSON config and then by a command-line flag; flags win.

Exit codes: 0 success, 1 usage or config error, 2 convergence failure
(outputs are still written, with flags).
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import experiments as E
from . import sets as S
from .critical import ConvergenceWarning, alpha_lax_oleinik, alpha_lp, beta_fenchel
from .grids import PhaseGrid, build_kernel
from .model import LagrangianSpec, spec_from_json
from .potential import mane_potential, peierls_barrier

DEFAULTS = {
    "grid": {"nx": 256, "nv": 129, "vmax": 4.0, "tau": 0.2, "lift_window": 1},
    "tolerances": {"eps_pot": 5e-2, "alpha_tol": 1e-3, "lp_feas": 1e-9},
    "sets": {"mass_fraction": 0.99, "mane_horizon": 20.0, "mane_dt": 0.02, "mane_v_refine": 5},
    "beta": {"c_range": "-4:4:161"},
    "flat": {"probe_radius": 2.0, "n_probes": 41},
    "semicont": {"sequence": "perturb", "length": 4},
    "output": "matherkit-out",
    "seed": 0,
}

SUBCOMMANDS = ("alpha", "beta", "potential", "sets", "scan", "perturb", "flat", "semicont")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


@dataclass
class RunConfig:
    spec: LagrangianSpec
    grid: PhaseGrid
    tolerances: dict
    sets: dict
    output: Path
    seed: int
    resolved: dict = field(default_factory=dict)

    @property
    def options(self) -> E.PipelineOptions:
        t, s = self.tolerances, self.sets
        return E.PipelineOptions(eps_pot=t["eps_pot"], alpha_tol=t["alpha_tol"],
                                 lp_tol=t["lp_feas"], mass_fraction=s["mass_fraction"],
                                 mane_horizon=s["mane_horizon"], mane_dt=s["mane_dt"],
                                 mane_v_refine=int(s["mane_v_refine"]))


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(args) -> RunConfig:
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("config must be a JSON object")
    lag = doc.get("lagrangian", {k: doc[k] for k in ("mass", "potential", "perturbation") if k in doc})
    resolved = _merge(DEFAULTS, {k: v for k, v in doc.items()
                                 if k in ("grid", "tolerances", "sets", "output", "seed")})
    flags = {"nx": args.nx, "nv": args.nv, "vmax": args.vmax, "tau": args.tau,
             "lift_window": args.lift_window}
    resolved["grid"].update({k: v for k, v in flags.items() if v is not None})
    tol_flags = {"eps_pot": args.eps_pot, "alpha_tol": args.alpha_tol, "lp_feas": args.lp_feas}
    resolved["tolerances"].update({k: v for k, v in tol_flags.items() if v is not None})
    if args.seed is not None:
        resolved["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        resolved["output"] = args.out
    try:
        spec = spec_from_json(lag)
        grid = PhaseGrid.from_json(resolved["grid"])
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid config: {exc}") from None
    for k, v in resolved["tolerances"].items():
        if not (isinstance(v, (int, float)) and v > 0):
            raise UsageError(f"tolerance {k} must be positive")
    resolved["lagrangian"] = spec.to_json()
    resolved["grid"] = grid.to_json()
    return RunConfig(spec, grid, resolved["tolerances"], resolved["sets"],
                     Path(resolved["output"]), int(resolved["seed"]), resolved)


def _parse_range(text: str):
    try:
        lo, hi, n = text.split(":")
        return float(lo), float(hi), int(n)
    except ValueError:
        raise UsageError(f"range must look like lo:hi:n, got {text!r}") from None


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _clean(o):
    # JSON has no nan/inf
    if isinstance(o, float) and not math.isfinite(o):
        return None
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    return o


def _emit_json(payload: dict, cfg: RunConfig, path: str | Path | None):
    payload = dict(payload)
    payload["config"] = cfg.resolved
    text = json.dumps(_clean(json.loads(json.dumps(payload, default=_json_default))),
                      indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        p = Path(path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)


def _write_csv(path: Path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([E.fmt(v) for v in r])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())


def _capture(fn, *a, **kw):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        out = fn(*a, **kw)
    return out, [str(w.message) for w in caught if issubclass(w.category, ConvergenceWarning)]


# Subcommands

def cmd_alpha(args, cfg: RunConfig) -> int:
    reports, flags = {}, []
    if args.method in ("lax", "both"):
        kernel = build_kernel(cfg.spec, cfg.grid, args.c)
        rep, fl = _capture(alpha_lax_oleinik, kernel, cfg.grid, tol=cfg.tolerances["alpha_tol"])
        reports["lax_oleinik"] = rep
        flags += fl
    if args.method in ("lp", "both"):
        rep, fl = _capture(alpha_lp, cfg.spec, cfg.grid, args.c, tol=cfg.tolerances["lp_feas"])
        reports["lp"] = rep
        flags += fl
        if args.measure_csv:
            m = rep.measure
            i, j = np.nonzero(m.weights > 0)
            _write_csv(Path(args.measure_csv), ("x", "v", "weight"),
                       zip(m.positions[i], m.velocities[j], m.weights[i, j]))
    payload = {"c": args.c, "method": args.method, "flags": flags,
               "reports": {k: r.to_json() for k, r in reports.items()}}
    first = next(iter(reports.values()))
    payload.update({"alpha": first.alpha, "residual": first.residual})
    _emit_json(payload, cfg, args.json_out)
    return 2 if flags or not all(r.converged for r in reports.values()) else 0


def cmd_beta(args, cfg: RunConfig) -> int:
    lo, hi, n = _parse_range(args.c_range or DEFAULTS["beta"]["c_range"])
    cs = E.class_grid(lo, hi, n)
    flags, samples = [], []
    for c in cs:
        rep, fl = _capture(alpha_lax_oleinik, build_kernel(cfg.spec, cfg.grid, c), cfg.grid,
                           tol=cfg.tolerances["alpha_tol"])
        flags += fl
        samples.append((c, rep.alpha))
    est, fl = _capture(beta_fenchel, samples, args.h)
    flags += fl
    _emit_json({"h": args.h, "beta": est.value, "argmax_c": est.argmax_c,
                "at_boundary": est.at_boundary, "c_range": [lo, hi, n], "flags": flags},
               cfg, args.json_out)
    return 2 if flags else 0


def cmd_potential(args, cfg: RunConfig) -> int:
    kernel = build_kernel(cfg.spec, cfg.grid, args.c)
    rep, flags = _capture(alpha_lax_oleinik, kernel, cfg.grid, tol=cfg.tolerances["alpha_tol"])
    eps = cfg.tolerances["eps_pot"]
    if args.kind == "phi":
        table = mane_potential(kernel, cfg.grid, rep.alpha, eps_pot=eps)
    else:
        table = peierls_barrier(kernel, cfg.grid, rep.alpha, eps_pot=eps)
    x = cfg.grid.positions
    i, j = np.meshgrid(np.arange(x.size), np.arange(x.size), indexing="ij")
    rows = zip(i.ravel(), j.ravel(), x[i.ravel()], x[j.ravel()], table.values.ravel())
    out = Path(args.table_out) if args.table_out else cfg.output / f"{args.kind}.csv"
    _write_csv(out, ("i", "j", "x_i", "x_j", "value"), rows)
    _emit_json({"c": args.c, "kind": args.kind, "alpha": rep.alpha, "table": str(out),
                "flags": flags}, cfg, out.with_suffix(".json"))
    return 2 if flags else 0


def cmd_sets(args, cfg: RunConfig) -> int:
    res = E.run_pipeline(cfg.spec, cfg.grid, args.c, cfg.options)
    out = cfg.output
    for name, cloud in (("mather", res.mather), ("aubry", res.aubry.cloud), ("mane", res.mane.cloud)):
        _write_csv(out / f"{name}.csv", ("x", "v"), cloud.to_rows())
    graph = S.graph_check(res.aubry.cloud).to_json() if len(res.aubry.cloud) else None
    summary = {
        "c": args.c, "alpha": res.alpha, "alpha_lp": res.lp.alpha,
        "d_H_MA": E._safe_hausdorff(res.mather, res.aubry.cloud),
        "d_H_AN": E._safe_hausdorff(res.aubry.cloud, res.mane.cloud),
        "graph_report": graph,
        "tolerances": {"eps_pot": cfg.options.eps_pot, "aubry_epsilon": cfg.options.aubry_eps,
                       "mane_epsilon": cfg.options.mane_eps,
                       "mass_fraction": cfg.options.mass_fraction},
        "mane_diagnostics": res.mane.diagnostics(),
        "sizes": {"mather": len(res.mather), "aubry": len(res.aubry.cloud),
                  "mane": len(res.mane.cloud)},
        "flags": res.flags,
    }
    _emit_json(summary, cfg, out / "summary.json")
    return 2 if any(f.startswith("convergence") for f in res.flags) else 0


def cmd_scan(args, cfg: RunConfig) -> int:
    lo, hi, n = _parse_range(args.c_range)
    rows = E.scan_c(cfg.spec, cfg.grid, lo, hi, n, cfg.options, workers=args.workers)
    out = Path(args.csv_out) if args.csv_out else cfg.output / "scan.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(E.scan_csv(rows))
    failed = any(f.startswith(("convergence", "failed")) for r in rows for f in r.flags)
    _emit_json({"c_range": [lo, hi, n], "rows": len(rows), "csv": str(out)}, cfg,
               out.with_suffix(".json"))
    return 2 if failed else 0


def cmd_perturb(args, cfg: RunConfig) -> int:
    _, rep = E.step1_perturbation(cfg.spec, cfg.grid, args.c, args.eps, options=cfg.options)
    summary = rep.summary()
    _emit_json(summary, cfg, args.json_out or cfg.output / "perturb.json")
    return 2 if any(f.startswith("convergence") for f in summary["flags"]) else 0


def cmd_flat(args, cfg: RunConfig) -> int:
    rep, flags = _capture(E.flat_detector, cfg.spec, cfg.grid, args.c,
                          probe_radius=args.probe_radius, n_probes=args.n_probes)
    payload = rep.to_json()
    payload["flags"] = flags
    _emit_json(payload, cfg, args.json_out)
    return 0


def cmd_semicont(args, cfg: RunConfig) -> int:
    if args.sequence == "perturb":
        rep = E.semicontinuity_probe(cfg.spec, cfg.grid, args.c,
                                     perturbations=E.vanishing_perturbations(args.length),
                                     options=cfg.options)
    else:
        rep = E.semicontinuity_probe(cfg.spec, cfg.grid, args.c,
                                     classes=E.approach_from_below(args.c, args.length),
                                     options=cfg.options)
    payload = rep.to_json()
    payload["sequence"] = args.sequence
    _emit_json(payload, cfg, args.json_out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="matherkit", description="Mather, Aubry and Mane sets on the circle.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, metavar="{" + ",".join(SUBCOMMANDS) + "}")

    def common(sp, out_help="output directory (overrides config 'output')"):
        sp.add_argument("--config", required=True, help="JSON config with the Lagrangian")
        g = sp.add_argument_group("grid")
        g.add_argument("--nx", type=int)
        g.add_argument("--nv", type=int)
        g.add_argument("--vmax", type=float)
        g.add_argument("--tau", type=float)
        g.add_argument("--lift-window", type=int, dest="lift_window")
        t = sp.add_argument_group("tolerances")
        t.add_argument("--eps-pot", type=float, dest="eps_pot")
        t.add_argument("--alpha-tol", type=float, dest="alpha_tol")
        t.add_argument("--lp-feas", type=float, dest="lp_feas")
        sp.add_argument("--seed", type=int)
        return sp

    a = common(sub.add_parser("alpha", help="critical value at one class"))
    a.add_argument("--c", type=float, required=True)
    a.add_argument("--method", choices=("lp", "lax", "both"), default="both")
    a.add_argument("--out", dest="json_out", help="JSON report path (default stdout)")
    a.add_argument("--measure-csv", dest="measure_csv", help="write the LP measure as x,v,weight")
    a.set_defaults(func=cmd_alpha)

    b = common(sub.add_parser("beta", help="Fenchel dual at a rotation number"))
    b.add_argument("--h", type=float, required=True)
    b.add_argument("--c-range", dest="c_range", help="lo:hi:n sample classes")
    b.add_argument("--out", dest="json_out")
    b.set_defaults(func=cmd_beta)

    pt = common(sub.add_parser("potential", help="Mane potential or barrier table"))
    pt.add_argument("--c", type=float, required=True)
    pt.add_argument("--kind", choices=("phi", "barrier"), default="phi")
    pt.add_argument("--out", dest="table_out", help="CSV path for the table")
    pt.set_defaults(func=cmd_potential)

    s = common(sub.add_parser("sets", help="Mather, Aubry and Mane clouds"))
    s.add_argument("--c", type=float, required=True)
    s.add_argument("--out", help="output directory")
    s.set_defaults(func=cmd_sets)

    sc = common(sub.add_parser("scan", help="pipeline over a range of classes"))
    sc.add_argument("--c-range", dest="c_range", required=True)
    sc.add_argument("--out", dest="csv_out", help="CSV path")
    sc.add_argument("--workers", type=int, default=1)
    sc.set_defaults(func=cmd_scan)

    pe = common(sub.add_parser("perturb", help="bump vanishing on the Mather set"))
    pe.add_argument("--c", type=float, required=True)
    pe.add_argument("--eps", type=float, required=True)
    pe.add_argument("--out", dest="json_out")
    pe.set_defaults(func=cmd_perturb)

    f = common(sub.add_parser("flat", help="detect the flat of alpha through c"))
    f.add_argument("--c", type=float, required=True)
    f.add_argument("--probe-radius", type=float, dest="probe_radius",
                   default=DEFAULTS["flat"]["probe_radius"])
    f.add_argument("--n-probes", type=int, dest="n_probes", default=DEFAULTS["flat"]["n_probes"])
    f.add_argument("--out", dest="json_out")
    f.set_defaults(func=cmd_flat)

    se = common(sub.add_parser("semicont", help="semicontinuity probe of the Mane set"))
    se.add_argument("--c", type=float, required=True)
    se.add_argument("--sequence", choices=("perturb", "approach"),
                    default=DEFAULTS["semicont"]["sequence"])
    se.add_argument("--length", type=int, default=DEFAULTS["semicont"]["length"])
    se.add_argument("--out", dest="json_out")
    se.set_defaults(func=cmd_semicont)
    return p


def _glue_ranges(argv):
    # "--c-range -2:2:41" would otherwise read the range as an option
    out, it = [], iter(argv)
    for tok in it:
        if tok == "--c-range":
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def run(argv=None) -> int:
    parser = build_parser()
    argv = _glue_ranges(sys.argv[1:] if argv is None else list(argv))
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "matherkit: error: a subcommand is required")
        cfg = load_config(args)
        return args.func(args, cfg)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ValueError, NotImplementedError) as exc:
        print(f"matherkit: error: {exc}", file=sys.stderr)
        return 1


def main():  # pragma: no cover - console script
    sys.exit(run())


if __name__ == "__main__":  # pragma: no cover
    sys.exit(run())
