"""Command-line entry point: ``lpeuler {norms,verify,simulate,iterate,weights}``.

Exit codes: 0 success, 1 a checked inequality or bound failed, 2 bad configuration.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from contextlib import nullcontext
from dataclasses import fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from . import calculus, euler, iteration
from .fieldio import read_field
from .lp import build_partition
from .spaces import embedding_exponent, norm, parse_space, verify_embedding
from .weights import admissibility_integral, evaluate, is_admissible, parse_weight

log = logging.getLogger("lpeuler")

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


# config files -----------------------------------------------------------------

def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple:
    return tuple(math.inf if v.strip() == "inf" else float(v) for v in text.split(",") if v.strip())


SIMULATE_KEYS = {
    "grid_n": int, "domain_l": float, "dt": float, "t_end": float, "cfl": float, "dealias": _bool,
    "init": str, "space": str, "weight": str, "lp_exponents": _floats, "sample_every": int, "seed": int,
    "out": str, "log_level": str, "fit_fraction": float, "track_flow": _bool,
}
ITERATE_KEYS = {**SIMULATE_KEYS, "n_max": int, "enforce_t0": _bool, "c_empirical": float}


def read_config(path, schema: dict) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment; unknown or repeated keys are errors."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = (s.strip() for s in line.partition("="))
        if not eq:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        if key not in schema:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: key {key!r} given twice")
        try:
            out[key] = schema[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return out


def _with_seed(init: str, seed: int) -> str:
    """Random presets without an explicit seed take the config seed."""
    if init.startswith("random") and "seed=" not in init:
        sep = "," if ":" in init else ":"
        return f"{init}{sep}seed={seed}"
    return init


# output -----------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, tuple):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def write_table(out, command: str, config: dict, columns, rows, notes=()) -> None:
    """Timestamp line, resolved config and notes as ``#`` comments, then the CSV body."""
    ctx = open(out, "w", newline="") if out else nullcontext(sys.stdout)
    with ctx as fh:
        fh.write(f"# lpeuler {command} {datetime.now(timezone.utc).isoformat(timespec='seconds')}\n")
        for key in sorted(config):
            fh.write(f"# {key} = {_fmt(config[key])}\n")
        for note in notes:
            fh.write(f"# {note}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            if isinstance(row, str):
                fh.write(f"# {row}\n")
            else:
                writer.writerow([_fmt(v) for v in row])


def _figure(args, fn, *payload) -> None:
    if args.out and not args.no_figure:
        from .plotting import figure_path

        path = fn(*payload, figure_path(args.out))
        log.info("figure written to %s", path)


# subcommands ------------------------------------------------------------------

def cmd_norms(args) -> int:
    f = read_field(args.input)
    spec = parse_space(args.space, parse_weight(args.weight))
    partition = build_partition(f.grid)
    value = norm(f, spec, partition)
    print(f"{value:.17g}")
    if args.embedding:
        lhs, rhs, ratio = verify_embedding(f, spec, partition)
        print(f"embedding lhs={lhs:.17g} rhs={rhs:.17g} ratio={ratio:.17g}")
        if ratio > 1 + 1e-12:
            return EXIT_VIOLATION
    return EXIT_OK


def cmd_verify(args) -> int:
    weight = parse_weight(args.weight)
    spec = parse_space(args.space, weight)
    cfg = calculus.SuiteConfig(samples=args.samples, grid_n=args.grid, seed=args.seed, spec=spec, slope=args.slope)
    sweep = calculus.SWEEP_GRIDS if args.sweep else None
    reports = calculus.run_suite(args.suite, cfg, sweep=sweep)
    failed = False
    rows, notes = [], []
    for rep in reports:
        rows.append(f"estimate = {rep.estimate_id}")
        rows.extend(rep.rows())
        rows.append(("max_ratio", "", "", rep.empirical_constant))
        if rep.violations:
            failed = True
            log.error("%s: violations at samples %s", rep.estimate_id, rep.violations)
        if sweep and not rep.extra.get("identity"):
            sweep_txt = ", ".join(f"n={n}: {c!r}" for n, c in sorted(rep.resolution_sweep.items()))
            notes.append(f"sweep {rep.estimate_id}: {sweep_txt}; spread = {rep.sweep_spread!r}")
            if not rep.sweep_spread < 2:
                failed = True
                log.error("%s: constant varies by %.3g across %s", rep.estimate_id, rep.sweep_spread, sweep)
            if rep.extra.get("sweep_violations"):
                failed = True
    config = {"suite": args.suite, "samples": args.samples, "grid": args.grid, "seed": args.seed,
              "space": spec.label(), "weight": weight.describe(), "sweep": bool(args.sweep),
              "slope": "default" if args.slope is None else args.slope}
    write_table(args.out, "verify", config, ["sample_id", "lhs", "rhs", "ratio"], rows, notes)
    from .plotting import plot_reports

    _figure(args, plot_reports, reports)
    return EXIT_VIOLATION if failed else EXIT_OK


def _run_config(values: dict) -> euler.RunConfig:
    known = {f.name for f in fields(euler.RunConfig)}
    kw = {k: v for k, v in values.items() if k in known}
    if "lp_exponents" in kw:
        kw["lp_exponents"] = tuple(kw["lp_exponents"])
    cfg = euler.RunConfig(**kw)
    cfg.init = _with_seed(cfg.init, cfg.seed)
    cfg.space_spec()  # validate early
    return cfg


def cmd_simulate(args) -> int:
    values = read_config(args.config, SIMULATE_KEYS)
    _set_level(values.get("log_level"))
    cfg = _run_config(values)
    out = args.out or cfg.out
    result = euler.run(cfg)
    notes = [f"constant {k} = {v!r}" for k, v in sorted(result.constants.items())]
    notes += [f"check {k} = {_fmt(v)}" for k, v in sorted(result.checks.items())]
    resolved = {f.name: getattr(cfg, f.name) for f in fields(cfg) if f.name != "out"}
    write_table(out, "simulate", resolved, result.columns(), result.rows(), notes)
    args.out = out
    from .plotting import plot_run

    _figure(args, plot_run, result)
    failed = [k for k, ok in result.checks.items() if not ok and k != "bkm_chain_window"]
    for k in failed:
        log.error("check %s failed", k)
    return EXIT_VIOLATION if failed else EXIT_OK


def cmd_iterate(args) -> int:
    values = read_config(args.config, ITERATE_KEYS)
    _set_level(values.get("log_level"))
    cfg = iteration.IterationConfig(
        n_max=values.get("n_max", 8), T=values.get("t_end"), dt=values.get("dt", 1e-3),
        grid_n=values.get("grid_n", 64), domain_l=values.get("domain_l", 2 * math.pi),
        space=values.get("space", "B:s=2,p=2,q=2"), weight=values.get("weight", "log:alpha=1"),
        C_empirical=values.get("c_empirical"), enforce_t0=values.get("enforce_t0", True),
        init=_with_seed(values.get("init", "taylor"), values.get("seed", 0)), seed=values.get("seed", 0))
    cfg.space_spec()
    out = args.out or values.get("out")
    result = iteration.iterate(None, cfg)
    rows = [(r.n, r.sup_norm, r.delta_n, r.rho_n, r.uniform_ok) for r in result.records]
    resolved = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    resolved["T"] = result.T
    resolved["C_empirical"] = result.C
    notes = [f"u0_norm = {result.u0_norm!r}", f"t0_applicable = {_fmt(result.t0_applicable)}",
             f"rho = {result.rho!r}", f"uniform_bound = {_fmt(result.uniform_bound)}",
             "divergence_residual = " + ",".join(repr(r.divergence_residual) for r in result.records)]
    write_table(out, "iterate", {k: v for k, v in resolved.items() if v is not None},
                ["n", "sup_norm", "delta_n", "rho_n", "uniform_ok"], rows, notes)
    args.out = out
    from .plotting import plot_iterates

    _figure(args, plot_iterates, result)
    return EXIT_OK if result.uniform_bound and result.rho < 1 else EXIT_VIOLATION


def cmd_weights(args) -> int:
    w = parse_weight(args.weight)
    verdict = is_admissible(w, args.r)
    integral = admissibility_integral(w, args.r, args.t_max)
    js = np.arange(-1, args.j_max + 1)
    psi = np.asarray(evaluate(w, 2.0 ** js.astype(float)))
    with np.errstate(divide="ignore"):
        terms = np.where(psi > 0, psi ** (-args.r), np.inf)
    rows = [(int(j), 2.0 ** float(j), float(p), float(t), float(c))
            for j, p, t, c in zip(js, psi, terms, np.cumsum(terms))]
    notes = [f"admissible = {_fmt(verdict.admissible)}", f"empirical = {_fmt(verdict.empirical)}",
             f"reason = {verdict.reason}", f"partial_integral = {integral.partial_integral!r}",
             f"dyadic_sum = {integral.dyadic_sum!r}", f"divergent = {_fmt(integral.divergent)}"]
    config = {"weight": w.describe(), "r": args.r, "t_max": args.t_max, "j_max": args.j_max}
    write_table(args.out, "weights", config, ["j", "t", "psi", "psi_pow_neg_r", "partial_sum"], rows, notes)
    from .plotting import plot_weight

    _figure(args, plot_weight, js, psi)
    if args.check and not verdict:
        return EXIT_VIOLATION
    return EXIT_OK


# parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-level", default="WARNING", help="logging level (default WARNING)")
    common.add_argument("--no-figure", action="store_true", help="do not write the PNG next to --out")

    parser = argparse.ArgumentParser(prog="lpeuler", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("norms", parents=[common], help="norm of a field file")
    p.add_argument("--input", required=True)
    p.add_argument("--space", default="B:s=2,p=2,q=2")
    p.add_argument("--weight", default="log:alpha=1")
    p.add_argument("--embedding", action="store_true", help="also check the embedding into B^{s-2/p}_{inf,1}")
    p.set_defaults(func=cmd_norms, out=None)

    p = sub.add_parser("verify", parents=[common], help="run an estimate suite over a random ensemble")
    p.add_argument("--suite", required=True, choices=sorted(calculus.SUITES))
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--grid", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--space", default="B:s=2,p=2,q=2")
    p.add_argument("--weight", default="log:alpha=1")
    p.add_argument("--slope", type=float, default=None, help="spectral slope of the ensemble")
    p.add_argument("--sweep", action="store_true", help="also run at n = 64, 128, 256 and compare constants")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    for name, func, text in (("simulate", cmd_simulate, "run the Euler solver"),
                             ("iterate", cmd_iterate, "run the approximating sequence")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", help="overrides the config's out key")
        p.set_defaults(func=func)

    p = sub.add_parser("weights", parents=[common], help="tabulate a weight and test admissibility")
    p.add_argument("--weight", default="log:alpha=1")
    p.add_argument("--r", type=float, default=2.0)
    p.add_argument("--t-max", type=float, default=1e8)
    p.add_argument("--j-max", type=int, default=20)
    p.add_argument("--check", action="store_true", help="exit 1 if the weight is not admissible")
    p.add_argument("--out")
    p.set_defaults(func=cmd_weights)
    return parser


def _set_level(level) -> None:
    if level:
        logging.getLogger().setLevel(level.upper())


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        with sfft.set_workers(calculus.thread_count()):
            return args.func(args)
    except (ArithmeticError, euler.BlowupError) as exc:
        log.error("%s", exc)
        return EXIT_VIOLATION
    except (ValueError, OSError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
