"""Command-line front end.

Exit codes: 0 success, 1 numerical failure (or a failed ``verify``
check), 2 usage error.  Every record carries the resolved model and
parameters so that a run can be replayed from its own output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import acceptance, goe, kacrice, simulate
from .errors import DomainError, RegimeError, ResourceError, ToleranceError
from .intervals import IntervalSet
from .model import (MixedModel, annealed_rate, classify, classify_and_maximize,
                    threshold_hc, trivial_predictions)

SCHEMA_LINE = "# schema=1"


class UsageError(Exception):
    pass


def _model(text: str) -> MixedModel:
    try:
        return MixedModel.parse(text)
    except DomainError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _intervals(text: str) -> IntervalSet:
    try:
        return IntervalSet.parse(text)
    except DomainError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _grid(text: str) -> list[float]:
    try:
        a, b, n = text.split(":")
        n = int(n)
        if n < 1:
            raise ValueError
        return [float(v) for v in np.linspace(float(a), float(b), n)]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; expected start:stop:count") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def _fmt_value(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.9g}"
    if v is None:
        return ""
    return str(v)


def _clean(v):
    """Make a value JSON-safe (non-finite floats become strings)."""
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, np.generic):
        return _clean(v.item())
    return v


def emit(records: list[dict], fmt: str, out, fields=None):
    if fmt == "csv":
        fields = list(fields or records[0].keys())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        buf.write(SCHEMA_LINE + "\n")
        w.writerow(fields)
        for r in records:
            w.writerow([_fmt_value(r.get(f)) for f in fields])
        out.write(buf.getvalue())
    else:
        doc = records[0] if len(records) == 1 else records
        out.write(json.dumps(_clean(doc), indent=2) + "\n")


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------

def cmd_hc(args):
    hc = threshold_hc(args.xi)
    if args.format is None:
        return None, ("none" if hc is None else f"{hc:.8g}") + "\n"
    return [{"model": str(args.xi), "h_c": "none" if hc is None else hc}], None


def cmd_rate(args):
    hs = args.h_grid if args.h_grid is not None else [args.h]
    return [{"model": str(args.xi), "h": h, "regime": classify(args.xi, h).value,
             "rate": annealed_rate(args.xi, h)} for h in hs], None


def cmd_predict(args):
    p = trivial_predictions(args.xi, args.h)
    return [{"model": str(args.xi), "h": args.h, "gs_energy": p.gs_energy, "overlap": p.overlap,
             "radial": p.radial_h, "radial_noh": p.radial_noh, "lambda_max": p.lambda_max}], None


def cmd_maximize(args):
    r = classify_and_maximize(args.xi, args.h)
    return [{"model": str(args.xi), "h": args.h, "regime": r.regime.value, "x": r.maximizer_x,
             "gamma": r.maximizer_gamma, "eta": r.maximizer_eta, "f_max": r.f_max,
             "unique": r.unique}], None


def cmd_kacrice(args):
    restriction = kacrice.RestrictionSet(
        gamma_set=args.gamma_set or IntervalSet(((-1.0, 1.0),)),
        radial_set=args.radial_set or IntervalSet.real_line(),
        energy_set=args.energy_set or IntervalSet.real_line(),
    )
    quad = kacrice.QuadratureSpec(tol=args.tol)
    Ns = args.N_list if args.N_list is not None else [args.N]
    records = []
    for n in Ns:
        res = kacrice.expected_count(args.xi, args.h, n, restriction, quad, args.rho_mode)
        records.append(kacrice.count_record(args.xi, args.h, restriction, res))
    return records, None


def cmd_goe_rho(args):
    xs = args.x_grid if args.x_grid is not None else [args.x]
    mode = goe.DensityMode(args.rho_mode if args.rho_mode != "auto" else "exact")
    lr = goe.log_rho(args.N, np.array(xs), mode)
    return [{"N": args.N, "x": x, "rho_mode": mode.value, "log_rho": float(v), "rho": math.exp(v)}
            for x, v in zip(xs, lr)], None


def cmd_goe_det(args):
    xs = args.x_grid if args.x_grid is not None else [args.x]
    records = []
    for x in xs:
        lv = float(goe.log_shifted_det_mean(args.N, x))
        rec = {"N": args.N, "x": x, "log_mean_abs_det": lv, "mean_abs_det": math.exp(lv)}
        if args.samples:
            mean, se = goe.mc_shifted_det(args.N, x, args.samples, args.seed)
            rec.update({"seed": args.seed, "samples": args.samples, "mc_mean": mean, "mc_se": se})
        records.append(rec)
    return records, None


def cmd_simulate(args):
    opts = simulate.FinderOptions(starts=args.starts)
    seeds = [args.seed + k for k in range(args.samples)]

    def one(s):
        return simulate.find_critical_points(simulate.sample_field(args.xi, args.N, s), args.h, opts, seed=s)

    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        cens = list(pool.map(one, seeds))
    if args.format == "csv":
        rows = []
        for c in cens:
            for p in c.points:
                rows.append(dict(zip(simulate.POINT_FIELDS, simulate.point_row(p))))
        return rows or [{}], None
    rep = simulate.landscape_report(cens, args.xi, args.h)
    d = dict(rep.__dict__)
    d["count_distribution"] = {str(k): v for k, v in rep.count_distribution.items()}
    d.update({"seed": args.seed, "starts": args.starts})
    return [d], None


def cmd_verify(args):
    numbers = sorted(acceptance.ALL_CHECKS) if args.all else acceptance.VERIFY_SUITE
    results = acceptance.run_checks(numbers)
    text = "".join(r.line() + "\n" for r in results)
    failed = [r.number for r in results if not r.passed]
    text += ("all checks passed\n" if not failed else f"failed: {failed}\n")
    return None, text, (1 if failed else 0)


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------

def _add_common(p, xi=True, h=True):
    if xi:
        p.add_argument("--xi", type=_model, default=MixedModel.parse("3:1"),
                       help="mixture literal p:a_p[,p:a_p...] (default 3:1)")
    if h:
        p.add_argument("--h", type=float, default=0.0, help="field strength (default 0)")
    p.add_argument("--format", choices=("json", "csv"), default=None)
    p.add_argument("--output", default=None, help="write records here instead of stdout")
    p.add_argument("--describe", action="store_true", help="print resolved parameters and exit")
    p.add_argument("--config", default=None, help="key=value file; flags override it")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    parser = argparse.ArgumentParser(prog="pspin-landscape",
                                     description="Critical points of spherical mixed p-spin models")
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("hc", help="triviality threshold")
    _add_common(p, h=False)
    p.set_defaults(func=cmd_hc)
    subs["hc"] = p

    p = sub.add_parser("rate", help="annealed complexity rate")
    _add_common(p)
    p.add_argument("--h-grid", type=_grid, default=None, help="start:stop:count")
    p.set_defaults(func=cmd_rate)
    subs["rate"] = p

    p = sub.add_parser("predict", help="large-N predictions at the global maximum")
    _add_common(p)
    p.set_defaults(func=cmd_predict)
    subs["predict"] = p

    p = sub.add_parser("maximize", help="regime and maximizer of the variational function")
    _add_common(p)
    p.set_defaults(func=cmd_maximize)
    subs["maximize"] = p

    p = sub.add_parser("kacrice", help="exact expected number of critical points")
    _add_common(p)
    p.add_argument("--N", type=int, default=40)
    p.add_argument("--N-list", type=_int_list, default=None)
    p.add_argument("--gamma-set", type=_intervals, default=None)
    p.add_argument("--radial-set", type=_intervals, default=None)
    p.add_argument("--energy-set", type=_intervals, default=None)
    p.add_argument("--rho-mode", choices=("exact", "asymptotic", "auto"), default="auto")
    p.add_argument("--tol", type=float, default=1e-7)
    p.set_defaults(func=cmd_kacrice)
    subs["kacrice"] = p

    for name, func in (("goe-rho", cmd_goe_rho), ("goe-det", cmd_goe_det)):
        p = sub.add_parser(name, help="GOE density" if name == "goe-rho" else "mean |det| of shifted GOE")
        _add_common(p, xi=False, h=False)
        p.add_argument("--N", type=int, default=10)
        p.add_argument("--x", type=float, default=0.0)
        p.add_argument("--x-grid", type=_grid, default=None)
        p.add_argument("--rho-mode", choices=("exact", "asymptotic", "auto"), default="exact")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--samples", type=int, default=0)
        p.set_defaults(func=func)
        subs[name] = p

    p = sub.add_parser("simulate", help="Monte Carlo census of critical points")
    _add_common(p)
    p.add_argument("--N", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--starts", type=int, default=64)
    p.set_defaults(func=cmd_simulate)
    subs["simulate"] = p

    p = sub.add_parser("verify", help="run the fast acceptance checks")
    p.add_argument("--all", action="store_true", help="run every acceptance check (slow)")
    p.add_argument("--describe", action="store_true")
    p.add_argument("--config", default=None)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.set_defaults(func=cmd_verify)
    subs["verify"] = p
    return parser, subs


def _read_config(path: str) -> dict[str, str]:
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip().replace("-", "_")] = v.strip()
    return out


def _apply_config(parser, subparser, argv, cfg):
    """Use config values as defaults so explicit flags still win."""
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for k, v in cfg.items():
        if k not in actions or k in ("config", "describe"):
            raise UsageError(f"unknown config key {k!r}")
        a = actions[k]
        try:
            defaults[k] = a.type(v) if a.type else v
        except (argparse.ArgumentTypeError, ValueError) as exc:
            raise UsageError(f"config key {k}: {exc}") from exc
        if a.choices and defaults[k] not in a.choices:
            raise UsageError(f"config key {k}: {v!r} not in {a.choices}")
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


def _describe(args) -> str:
    d = {k: v for k, v in vars(args).items() if k not in ("func", "describe")}
    d = {k: (str(v) if isinstance(v, (MixedModel, IntervalSet)) else v) for k, v in d.items()}
    return json.dumps(_clean(d), indent=2, sort_keys=True) + "\n"


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser, subs = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "config", None):
            args = _apply_config(parser, subs[args.command], argv, _read_config(args.config))
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code in (0, None) else 2
    except (UsageError, OSError) as exc:
        print(f"usage error: {exc}", file=stderr)
        return 2
    if args.describe:
        stdout.write(_describe(args))
        return 0
    try:
        result = args.func(args)
    except (DomainError, RegimeError, ResourceError, ToleranceError) as exc:
        print(f"error: {exc}", file=stderr)
        return 1
    code = 0
    if len(result) == 3:
        records, text, code = result
    else:
        records, text = result
    out_path = getattr(args, "output", None)
    fh = open(out_path, "w", newline="") if out_path else stdout
    try:
        if text is not None:
            fh.write(text)
        else:
            fmt = args.format or "json"
            fields = simulate.POINT_FIELDS if args.command == "simulate" and fmt == "csv" else None
            emit(records, fmt, fh, fields)
    finally:
        if out_path:
            fh.close()
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
