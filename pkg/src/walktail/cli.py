"""``walktail`` command line.

Exit status: 0 success, 1 usage or input error, 2 a validation gate failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunSpec, load_config, resolve, save_config
from .expansion import (
    OrderError, build_operator, expand, substitute_mean, value_stderr,
)
from .ladder import MomentSet, NonConvergence, estimate_moments, estimate_p_direct, estimate_p_spitzer
from .ladder import lemma1_diagnostic
from .lattice import (
    ConvergenceError, discretize, grid_tail_model, ladder_laws, maximum_tail, wiener_hopf_residual,
)
from .ruin import make_scenario, psi_expansion, scenario_step, simulate_ruin
from .scalars import NotInvertible
from .steps import make_two_point, parse_step_spec
from .tails import DomainError

SCHEMA = "# walktail-schema v1"
RANDOMIZED = {"moments", "ruin", "validate"}

log = logging.getLogger("walktail")


class UsageError(Exception):
    pass


class GateFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML run file; flags override its values")
    p.add_argument("--emit-config", help="write the resolved run file here")
    p.add_argument("--strict", action="store_true", help="require --seed for randomized commands")
    p.add_argument("--out", help="write output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="walktail", description="Tail expansions for maxima of heavy-tailed random walks.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("expand", help="expansion operator, symbolic or from a moment file")
    _common(p)
    p.add_argument("--order", type=int)
    p.add_argument("--symbolic", action="store_true", default=None)
    p.add_argument("--all-terms", action="store_true", default=None,
                   help="list all m coefficients instead of the m-1 leading ones")
    p.add_argument("--no-substitute", dest="substitute", action="store_false", default=None,
                   help="keep mu[Fm,1] instead of writing it as mu[F,1]/(1-p)")
    p.add_argument("--moments")

    p = sub.add_parser("moments", help="Monte Carlo ladder moments as JSON")
    _common(p)
    p.add_argument("--step")
    p.add_argument("--order", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--barrier", type=float)
    p.add_argument("--cap", type=int)

    p = sub.add_parser("evaluate", help="expansion values on an x grid")
    _common(p)
    p.add_argument("--step")
    p.add_argument("--order", type=int)
    p.add_argument("--xgrid")
    p.add_argument("--moments")

    p = sub.add_parser("oracle", help="certified lattice tail of the maximum")
    _common(p)
    p.add_argument("--step")
    p.add_argument("--h", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--kmax", type=int)

    p = sub.add_parser("ruin", help="ruin probability: expansion and simulation")
    _common(p)
    p.add_argument("--claims")
    p.add_argument("--interarrival")
    p.add_argument("--premium", type=float)
    p.add_argument("--order", type=int)
    p.add_argument("--xgrid")
    p.add_argument("--reps", type=int)
    p.add_argument("--moment-reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--barrier", type=float)

    p = sub.add_parser("validate", help="closed-form and cross-method checks")
    _common(p)
    p.add_argument("--case", choices=["twopoint", "paretoshift"])
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("lemma1", help="renewal-sum ratio diagnostic")
    _common(p)
    p.add_argument("--beta", type=float)
    p.add_argument("--y", choices=["deterministic", "exponential"])
    p.add_argument("--y-mean", type=float)
    p.add_argument("--xgrid")
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    return parser


def parse_grid(text: str) -> np.ndarray:
    """``a:b:n`` (linear) or ``log:a:b:n``."""
    parts = text.split(":")
    try:
        if parts[0] == "log" and len(parts) == 4:
            a, b, n = float(parts[1]), float(parts[2]), int(parts[3])
            if a <= 0 or b <= 0:
                raise ValueError
            return np.geomspace(a, b, n)
        if len(parts) == 3:
            return np.linspace(float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError:
        pass
    raise UsageError(f"bad grid {text!r}; expected a:b:n or log:a:b:n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(columns: list[str], rows, out) -> None:
    buf = io.StringIO()
    buf.write(SCHEMA + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    _emit(buf.getvalue(), out)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _need(spec: RunSpec, *names):
    missing = [n for n in names if getattr(spec, n) is None]
    if missing:
        raise UsageError("missing " + ", ".join("--" + n.replace("_", "-") for n in missing))


# ---------------------------------------------------------------- commands


def cmd_expand(spec: RunSpec):
    m = spec.order
    if m < 1:
        raise UsageError("--order must be >= 1")
    if spec.symbolic:
        op = build_operator(MomentSet.symbolic(m), m)
        note = "with independent ladder moments"
        if spec.substitute:
            op, note = substitute_mean(op), "after mu[Fm,1] = mu[F,1]/(1-p)"
        n = m if spec.all_terms or m == 1 else m - 1
        lines = [SCHEMA, f"# order {m}: coefficients of D^(k-1) Fbar {note}"]
        for k in range(n):
            lines.append(f"{_slot(k)}: {op.coeffs[k]}")
        _emit("\n".join(lines) + "\n", spec.out)
        return
    _need(spec, "moments")
    ms = MomentSet.from_json(Path(spec.moments).read_text())
    op = build_operator(ms, m)
    _emit(json.dumps({"schema": "walktail-schema v1", "order": m, "coefficients": [float(c) for c in op.coeffs],
                      "text": op.to_text()}, indent=2) + "\n", spec.out)


def _slot(k: int) -> str:
    return {0: "D^-1 Fbar", 1: "Fbar", 2: "Fbar'"}.get(k, f"Fbar^({k - 1})")


def cmd_moments(spec: RunSpec):
    _need(spec, "step")
    step = parse_step_spec(spec.step)
    ms = estimate_moments(step, spec.order, spec.reps, spec.seed or 0, spec.barrier, spec.cap)
    _emit(ms.to_json() + "\n", spec.out)
    problems = ms.check()
    for p in problems:
        log.warning("moment check: %s", p)
    if ms.diagnostics["censoring"] > 1e-4:
        log.warning("censoring indicator %.2e exceeds 1e-4; raise --barrier", ms.diagnostics["censoring"])


def cmd_evaluate(spec: RunSpec):
    _need(spec, "step", "xgrid", "moments")
    step = parse_step_spec(spec.step)
    ms = MomentSet.from_json(Path(spec.moments).read_text())
    res = expand(ms, spec.order, alpha=step.alpha, kappa=step.kappa)
    xs = parse_grid(spec.xgrid)
    terms = res.terms(step.upper_tail, xs)
    se = value_stderr(ms, spec.order, step.upper_tail, xs)
    cols = ["x"] + [f"term_{k}" for k in range(spec.order)] + ["value", "value_se"]
    write_csv(cols, ([x, *t, t.sum(), s] for x, t, s in zip(xs, terms, se)), spec.out)


def cmd_oracle(spec: RunSpec):
    _need(spec, "step")
    step = parse_step_spec(spec.step)
    lat, leak = discretize(step, spec.h, leak_budget=max(spec.eps, 1e-12) * 1e4)
    laws = ladder_laws(lat, eps=spec.eps)
    kmax = spec.kmax if spec.kmax is not None else min(lat.hi, 4096)
    mt = maximum_tail(laws, kmax, spec.eps)
    log.info("p=%.15g in [%.15g, %.15g], binning leak %.2e", laws.p, laws.p, laws.p_upper, leak)
    write_csv(["x", "Wbar_lower", "Wbar_upper"], zip(mt.x, mt.lower, mt.upper), spec.out)


def cmd_ruin(spec: RunSpec):
    _need(spec, "claims", "interarrival", "premium", "xgrid")
    sc = make_scenario(spec.claims, spec.interarrival, spec.premium)
    step = scenario_step(sc)
    seed = spec.seed or 0
    ms = estimate_moments(step, spec.order, spec.moment_reps or spec.reps, seed, spec.barrier, spec.cap)
    xs = parse_grid(spec.xgrid)
    table = psi_expansion(sc, spec.order, ms, xs)
    se = value_stderr(ms, spec.order, step.upper_tail, xs)
    mc = simulate_ruin(sc, xs, spec.reps, seed, spec.barrier, cap=spec.cap)
    if mc.frac_cap > 0:
        log.warning("%.2e of ruin paths hit the step cap", mc.frac_cap)
    cols = ["x", "psi_expansion", "psi_expansion_se"] + [f"term_{k}" for k in range(spec.order)] + ["psi_mc", "mc_se"]
    rows = ([x, v, s, *t, pm, pe] for x, v, s, t, pm, pe in zip(xs, table.value, se, table.terms, mc.tail, mc.tail_se))
    write_csv(cols, rows, spec.out)


def cmd_lemma1(spec: RunSpec):
    _need(spec, "xgrid")
    rows = lemma1_diagnostic(spec.beta, parse_grid(spec.xgrid), spec.y_mean, spec.y, spec.reps, spec.seed or 0)
    write_csv(["x", "ratio", "se", "target"], ((r.x, r.ratio, r.se, r.target) for r in rows), spec.out)


def cmd_validate(spec: RunSpec):
    _need(spec, "case")
    checks = {"twopoint": validate_twopoint, "paretoshift": validate_paretoshift}[spec.case](spec)
    lines = [f"{'PASS' if ok else 'FAIL'} {name}: {detail}" for name, ok, detail in checks]
    _emit("\n".join(lines) + "\n", spec.out)
    if not all(ok for _, ok, _ in checks):
        raise GateFailure(f"{sum(not ok for _, ok, _ in checks)} check(s) failed")


def validate_twopoint(spec: RunSpec):
    step = make_two_point(0.25)
    laws = ladder_laws(step)
    out = []
    out.append(("lattice p", abs(laws.p - 1 / 3) < 1e-10, f"{laws.p:.15g}"))
    out.append(("lattice F-", abs(laws.fminus.mass_at(0) - 0.25) < 1e-10 and abs(laws.fminus.mass_at(-1) - 0.75) < 1e-10,
                f"{laws.fminus.to_dict()['masses']}"))
    mt = maximum_tail(laws, 10)
    err = max(abs(mt.at_least(k)[0] - 3.0**-k) for k in range(1, 11))
    out.append(("P{M>=k} = 3^-k", err < 1e-10, f"max error {err:.2e}"))
    res = wiener_hopf_residual(step, laws)
    out.append(("Wiener-Hopf residual", res < 1e-10, f"{res:.2e}"))
    seed = spec.seed or 0
    ms = estimate_moments(step, 2, spec.reps, seed)
    sp, sm = ms.stderr["p"], ms.stderr["mu_minus"][0]
    out.append(("MC p", abs(ms.p - 1 / 3) <= 3 * sp, f"{ms.p:.6f} +- {sp:.1e}"))
    out.append(("MC mu_minus[1]", abs(ms.mu_minus[0] + 0.75) <= 3 * sm, f"{ms.mu_minus[0]:.6f} +- {sm:.1e}"))
    gap, gse = ms.identity_gap(), ms.identity_se()
    out.append(("mean identity", abs(gap) <= 3 * gse, f"gap {gap:.2e}, se {gse:.1e}"))
    c0 = float(build_operator(MomentSet.from_lattice(laws, 2, -0.5), 2).coeffs[0])
    out.append(("operator constant", abs(c0 + 2) < 1e-9, f"{c0:.12g}"))
    return out


def validate_paretoshift(spec: RunSpec):
    step = parse_step_spec("paretoshift:alpha=3,scale=1,shift=3")
    out = []
    lat, _ = discretize(step, 0.5, hi=8000.0)
    laws = ladder_laws(lat)
    res = wiener_hopf_residual(lat, laws)
    out.append(("Wiener-Hopf residual", res < 1e-10, f"{res:.2e}"))
    ms = MomentSet.from_lattice(laws, 2, lat.mean())
    model = grid_tail_model(step, lat)
    ks = np.arange(400, 4001, 400)
    mt = maximum_tail(laws, int(ks[-1]))
    w = mt.mid[ks]
    x = ks * lat.h
    errs = {m: np.abs(w - expand(ms.restrict(m), m, alpha=3).value(model, x)) for m in (1, 2)}
    out.append(("m=2 beats m=1 on oracle", bool(np.all(errs[2] <= errs[1])), f"at x={x[-1]:g}: {errs[2][-1]:.2e} vs {errs[1][-1]:.2e}"))
    seed = spec.seed or 0
    d, dc = estimate_p_direct(step, spec.reps, seed, barrier=400.0)
    sp = estimate_p_spitzer(step, 200, spec.reps, seed)
    comb = math.hypot(d.se, sp.se)
    out.append(("Spitzer vs direct p", abs(d.value - sp.p) <= 3 * comb + dc + sp.remainder,
                f"{sp.p:.5f} vs {d.value:.5f} (se {comb:.1e})"))
    mc = estimate_moments(step, 2, spec.reps, seed, barrier=400.0)
    gap, gse = mc.identity_gap(), mc.identity_se()
    out.append(("mean identity", abs(gap) <= 3 * gse, f"gap {gap:.2e}, se {gse:.1e}"))
    return out


COMMANDS = {
    "expand": cmd_expand, "moments": cmd_moments, "evaluate": cmd_evaluate, "oracle": cmd_oracle,
    "ruin": cmd_ruin, "validate": cmd_validate, "lemma1": cmd_lemma1,
}


def run(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="walktail: %(levelname)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        flags = {k: v for k, v in vars(args).items() if k not in {"command", "config", "emit_config", "strict"}}
        spec = resolve(load_config(args.config) if args.config else None, flags)
        randomized = args.command in RANDOMIZED or (args.command == "lemma1" and spec.y == "exponential")
        if args.strict and randomized and spec.seed is None:
            raise UsageError(f"--strict: {args.command} needs an explicit --seed")
        if args.emit_config:
            save_config(spec, args.emit_config)
        COMMANDS[args.command](spec)
        return 0
    except GateFailure as exc:
        log.error("%s", exc)
        return 2
    except (UsageError, ConfigError, OrderError, DomainError, NotInvertible, ValueError, OSError,
            ConvergenceError, NonConvergence) as exc:
        log.error("%s", exc)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
