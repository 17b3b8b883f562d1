"""Command-line runner: ``hypowave <subcommand> [flags]``.

Exit status: 0 when every check passes, 1 on a violated check or a module
error, 2 on a usage or configuration error.
"""
from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import gevrey, heisenberg as heis, su2, wave
from .coefficient import SpeedError, make_speed
from .fields import FieldSchemaError, load_field, save_field
from .io import write_csv, write_json
from .mode_ode import (
    EnvelopeError,
    ModeProblem,
    case_roots,
    integrate_mode,
    kchoice,
    transformed_energy,
    verify_envelope,
    w_monotone,
)
from .report import Check, check_le, summarize

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------- parsing helpers

def float_list(text) -> List[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


def word_list(text) -> List[str]:
    if isinstance(text, (list, tuple)):
        return [str(w) for w in text]
    return [w.strip() for w in str(text).split(",") if w.strip()]


def half_int(text) -> su2.HalfInt:
    try:
        return su2.HalfInt.of(Fraction(str(text)))
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"{text!r} is not a half-integer") from exc


def load_config(path) -> dict:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        if p.suffix.lower() == ".json":
            cfg = json.loads(raw.decode("utf-8"))
        else:
            cfg = tomllib.loads(raw.decode("utf-8"))
    except (json.JSONDecodeError, tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise UsageError(f"malformed config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a table/object")
    return cfg


# ---------------------------------------------------------------- subcommands

def _emit(args, checks: List[Check]) -> int:
    text, machine = summarize(checks)
    print(text)
    if getattr(args, "summary_json", None):
        write_json(args.summary_json, machine)
    return EXIT_FAIL if not machine["all_pass"] else EXIT_OK


def _speed(args, T):
    try:
        return make_speed(args.speed, horizon=T)
    except SpeedError as exc:
        raise UsageError(str(exc)) from exc


def cmd_ode_energy(args) -> int:
    T = float(args.T)
    sp = _speed(args, T)
    grid = float_list(args.beta_grid)
    case = int(args.case)
    if case not in (1, 2, 3, 4):
        raise UsageError("--case must be 1..4")
    if sp.cls.case != case:
        raise UsageError(f"speed class {sp.cls.tag} does not match case {case}")
    if not grid or min(grid) < 1.0:
        raise UsageError("beta grid must be nonempty with beta >= 1")
    s = float(args.s)
    try:
        rep = verify_envelope(case, sp, grid, s, T, float(args.rel_tol))
    except EnvelopeError as exc:
        raise UsageError(str(exc)) from exc
    if args.out:
        rep.to_csv(args.out)
    checks: List[Check] = []
    if case == 1:
        checks.append(check_le("sup-ratio spread across beta", "case 1 uniform bound", rep.spread, 2.0))
        checks.append(check_le("max sup-ratio", "Gronwall exp(c' T)", float(rep.sup_ratios.max()),
                               rep.extra["gronwall_bound"] * (1 + 100 * float(args.rel_tol))))
    else:
        local = np.array(rep.extra["local_K"])
        tail = local[len(local) // 2:]
        rise = float(np.max(np.diff(tail))) if tail.size > 1 else 0.0
        checks.append(check_le("local K tail increase", f"case {case} beta-uniform K", rise, 0.05))
        if not rep.passed:
            checks.append(Check("envelope verdict", f"case {case} beta-uniform K", math.nan, math.nan, "FAIL"))
        checks.append(Check("fitted K", f"case {case} envelope", rep.fitted_K, math.nan, "INFO"))
    if case in (2, 4) and not args.no_wcheck:
        K = kchoice(case, sp, s, grid)
        worst = 0.0
        ok = True
        for b in grid:
            roots = case_roots(case, sp, b)
            for v0, v1 in ((1.0 / b, 0.0), (0.0, 1.0)):
                tr = integrate_mode(ModeProblem(b, sp, v0, v1, T), float(args.rel_tol), n_samples=401)
                W = transformed_energy(tr, roots, 0.0, K, s, b)
                ok &= w_monotone(W, float(args.rel_tol))
                worst = max(worst, float(np.max(np.diff(W)) / W[0]))
        checks.append(check_le("W step increase / W(0)", "K choice monotonicity", worst, 10 * float(args.rel_tol)))
    if args.dat_dir:
        d = Path(args.dat_dir)
        for b in grid:
            tr = integrate_mode(ModeProblem(b, sp, 1.0 / b, 0.0, T), float(args.rel_tol), n_samples=401)
            tr.to_dat(d / f"mode_beta{b:g}.dat")
    return _emit(args, checks)


def cmd_su2_riesz(args) -> int:
    lmax = half_int(args.lmax)
    if lmax.twice < 1:
        raise UsageError("--lmax must be at least 1/2")
    if args.word:
        wl = word_list(args.word)
        for w in wl:
            if set(w) - {"X", "Y"}:
                raise UsageError(f"word {w!r} must use X and Y")
    else:
        wl = ["".join(w) for w in su2.words("XY", int(args.max_len))]
    c = float(args.c)
    rows = su2.riesz_sweep(wl, lmax, use_svd=not args.no_svd)
    if args.out:
        su2.write_sweep_csv(args.out, rows)
    checks = []
    for w in wl:
        ops = [r[2] for r in rows if r[1] == w]
        ls = [float(Fraction(r[0])) for r in rows if r[1] == w]
        checks.append(check_le(f"op_norm {w}", "uniform Riesz bound c^|w|", max(ops), c ** len(w)))
        checks.append(Check(f"l-exponent {w}", "l-uniformity", su2.fitted_exponent(ls, ops), math.nan, "INFO"))
    return _emit(args, checks)


def cmd_heis_riesz(args) -> int:
    lams = float_list(args.lambdas)
    if not lams or any(l == 0 for l in lams):
        raise UsageError("lambda list must be nonempty and exclude 0")
    N = int(args.N)
    if args.word:
        wl = [heis._letters(w) for w in word_list(args.word)]
    else:
        wl = list(itertools.chain.from_iterable(
            itertools.product(("Z", "Zbar"), repeat=q) for q in range(1, int(args.max_len) + 1)))
    if any(len(w) >= N / 2 for w in wl):
        raise UsageError("word too long for N")
    rows = heis.riesz_sweep(wl, lams, N)
    if args.out:
        heis.write_sweep_csv(args.out, rows)
    pos = [l for l in lams if l > 0]
    neg = [l for l in lams if l < 0]
    same = 0.0
    cross = 0.0
    for w in wl:
        for branch in (pos, neg):
            if len(branch) > 1:
                same = max(same, heis.lambda_invariance(w, branch, N))
        if pos and neg:
            cross = max(cross, heis.lambda_invariance(w, [pos[0], neg[0]], N))
    checks = [check_le("lambda-invariance within sign", "Riesz diagonal cancellation", same, 1e-12)]
    if pos and neg:
        checks.append(Check("lambda-invariance across signs", "Riesz diagonal cancellation", cross, 1e-12, "INFO"))
    comm = max(heis.commutator_check(l, N) for l in lams)
    checks.append(check_le("[X,Y] - i lambda I", "commutation relation", comm, 1e-12))
    slope = heis.growth_slope(wl, lams[0], N)
    checks.append(check_le("log op-norm slope in |w|", "bound c^|w|", slope, math.log(4)))
    return _emit(args, checks)


def _wave_data(args):
    if args.f0:
        f0 = load_field(args.f0)
        f1 = load_field(args.f1) if args.f1 else f0.scale(0)
        return f0, f1
    seed = int(args.seed)
    if args.group == "su2":
        lm = half_int(args.lmax)
        return (su2.weighted_field(lm, float(args.decay), seed),
                su2.weighted_field(lm, float(args.decay), seed + 1))
    lams = np.array(sorted(float_list(args.lambdas)))
    N = int(args.N)
    return (heis.random_field(lams, N, seed, float(args.decay)),
            heis.random_field(lams, N, seed + 1, float(args.decay)))


def cmd_wave(args) -> int:
    T = float(args.T)
    sp = _speed(args, T)
    f0, f1 = _wave_data(args)
    sol = wave.solve_cauchy(f0, f1, sp, T, int(args.n_samples), float(args.rel_tol))
    if args.mode == "sobolev":
        if not sp.cls.positive:
            raise UsageError("Sobolev mode needs a positive speed")
        rep = wave.verify_sobolev_wellposedness(sol, float(args.s), homogeneous=not args.inhomogeneous)
        anchor = "case 1 Sobolev inequality"
    else:
        case = int(args.case) if args.case else sp.cls.case
        K = None if args.K_fit is None else float(args.K_fit)
        rep = wave.verify_gevrey_wellposedness(sol, case, float(args.s), float(args.A), T, K_fit=K)
        anchor = f"case {case} Gevrey inequality"
    if args.out:
        rep.to_csv(args.out)
    if args.summary:
        rep.to_json(args.summary)
    if args.save_final:
        save_field(args.save_final, sol.u(len(sol) - 1))
    checks = []
    if rep.verdict == "inconclusive":
        checks.append(Check("C_meas", anchor, math.nan, math.nan, "INFO"))
    else:
        ok = rep.verdict == "pass"
        checks.append(Check("C_meas", anchor, rep.C_meas, math.inf, "PASS" if ok else "FAIL"))
        if rep.C_refined is not None:
            ratio = rep.C_refined / rep.C_meas if rep.C_meas else 1.0
            checks.append(check_le("C_meas drift under truncation doubling", "truncation stability",
                                   abs(math.log(ratio)), math.log(2)))
    return _emit(args, checks)


def cmd_gevrey(args) -> int:
    if args.field:
        f = load_field(args.field)
    elif args.single:
        l, m, n = (Fraction(x) for x in str(args.single).split(","))
        f = su2.single_mode_field(l, m, n)
    else:
        f = su2.weighted_field(half_int(args.lmax), float(args.c), int(args.seed))
    checks = []
    rows = []
    for s in float_list(args.s):
        rep = gevrey.forward_constant_check(f, None, float(args.D), s, int(args.k_max))
        checks.append(Check(f"min log-margin s={s:g}", "forward constant A = s^s/D^s",
                            float(np.min(rep.margins)), 0.0, "PASS" if rep.verdicts["forward"] else "FAIL"))
        rows.extend((s,) + r for r in rep.rows())
        if args.json:
            p = Path(args.json)
            rep.to_json(p.with_name(f"{p.stem}_s{s:g}{p.suffix}") if len(float_list(args.s)) > 1 else p)
    if args.out:
        write_csv(args.out, ("s", "k", "lk_norm", "bound", "margin"), rows)
    val, _ = gevrey.sup_multiplier(1, 1.0, 1.0)
    checks.append(check_le("|sup multiplier - 4e^-2| at k=D=s=1", "maximiser (2ks/D)^(2s)",
                           abs(val - 4 * math.exp(-2)), 1e-12))
    return _emit(args, checks)


def cmd_bessel(args) -> int:
    s = float(args.s)
    if s <= 0:
        raise UsageError("--s must be positive")
    lmax = half_int(args.lmax)
    d = su2.bessel_doubling(s, lmax, float(args.start))
    label = su2.classify_bessel(s, lmax, float(args.start))
    if args.out:
        inc = [math.nan] + d["increments"]
        write_csv(args.out, ("lmax", "partial_sum", "increment"),
                  list(zip(d["lmax_points"], d["partial_sums"], inc)))
    if args.json:
        write_json(args.json, {"s": s, "lmax": lmax.value, "classification": label, **d})
    print(f"classification: {label}")
    worst = max(d["ratios"]) if d["ratios"] else math.nan
    checks = [Check(f"increment ratio per doubling ({label})", "trace-class threshold", worst, 2 / 3, "INFO"),
              Check("partial sum", "Bessel trace sum", su2.bessel_partial_sum(s, lmax), math.nan, "INFO")]
    return _emit(args, checks)


# ---------------------------------------------------------------- parser

COMMANDS: Dict[str, Callable] = {
    "ode-energy": cmd_ode_energy,
    "su2-riesz": cmd_su2_riesz,
    "heis-riesz": cmd_heis_riesz,
    "wave": cmd_wave,
    "gevrey": cmd_gevrey,
    "bessel": cmd_bessel,
}


def build_parser():
    p = argparse.ArgumentParser(prog="hypowave", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="TOML or JSON file with a 'subcommand' key and parameters")
    sub = p.add_subparsers(dest="command")
    subs = {}

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="TOML or JSON parameter file; flags override it")
        sp.add_argument("--summary-json", help="write the check table as JSON")
        subs[name] = sp
        return sp

    sp = add("ode-energy", "mode energy envelopes over a beta grid")
    sp.add_argument("--case", type=int, default=1)
    sp.add_argument("--speed", default="const:1")
    sp.add_argument("--beta-grid", default="1,10,100")
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--s", type=float, default=1.0)
    sp.add_argument("--rel-tol", type=float, default=1e-8)
    sp.add_argument("--out")
    sp.add_argument("--dat-dir")
    sp.add_argument("--no-wcheck", action="store_true")

    sp = add("su2-riesz", "SU(2) Riesz symbol norms")
    sp.add_argument("--word")
    sp.add_argument("--max-len", type=int, default=2)
    sp.add_argument("--lmax", default="10")
    sp.add_argument("--c", type=float, default=2.0)
    sp.add_argument("--no-svd", action="store_true")
    sp.add_argument("--out")

    sp = add("heis-riesz", "Heisenberg Riesz symbols")
    sp.add_argument("--word")
    sp.add_argument("--max-len", type=int, default=2)
    sp.add_argument("--lambdas", default="-10,-1,-0.1,0.1,1,10")
    sp.add_argument("--N", type=int, default=128)
    sp.add_argument("--out")

    sp = add("wave", "decoupled Cauchy solve plus well-posedness check")
    sp.add_argument("--group", choices=("su2", "heis"), default="su2")
    sp.add_argument("--f0")
    sp.add_argument("--f1")
    sp.add_argument("--lmax", default="6")
    sp.add_argument("--N", type=int, default=32)
    sp.add_argument("--lambdas", default="-10,-3,-1,-0.3,0.3,1,3,10")
    sp.add_argument("--decay", type=float, default=0.5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--speed", default="const:1")
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--s", type=float, default=1.0)
    sp.add_argument("--mode", choices=("sobolev", "gevrey"), default="sobolev")
    sp.add_argument("--inhomogeneous", action="store_true")
    sp.add_argument("--case", type=int)
    sp.add_argument("--A", type=float, default=1.0)
    sp.add_argument("--K-fit", type=float, dest="K_fit")
    sp.add_argument("--n-samples", type=int, default=wave.N_SAMPLES)
    sp.add_argument("--rel-tol", type=float, default=1e-10)
    sp.add_argument("--out")
    sp.add_argument("--summary")
    sp.add_argument("--save-final")

    sp = add("gevrey", "forward Gevrey constant check on SU(2) fields")
    sp.add_argument("--field")
    sp.add_argument("--single", help="l,m,n of a unit single-mode field")
    sp.add_argument("--lmax", default="10")
    sp.add_argument("--c", type=float, default=2.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--D", type=float, default=1.0)
    sp.add_argument("--s", default="1,1.5,2")
    sp.add_argument("--k-max", type=int, default=20)
    sp.add_argument("--out")
    sp.add_argument("--json")

    sp = add("bessel", "Bessel trace partial sums")
    sp.add_argument("--s", type=float, default=1.0)
    sp.add_argument("--lmax", default="200")
    sp.add_argument("--start", type=float, default=25)
    sp.add_argument("--out")
    sp.add_argument("--json")
    return p, subs


def _apply_config(sp: argparse.ArgumentParser, cfg: dict, name: str):
    known = {a.dest for a in sp._actions}
    defaults = {}
    for k, v in cfg.items():
        if k in ("subcommand", "command"):
            continue
        dest = k.replace("-", "_")
        if dest not in known:
            raise UsageError(f"unknown config key {k!r} for {name}")
        defaults[dest] = ",".join(map(str, v)) if isinstance(v, list) else v
    sp.set_defaults(**defaults)


def run(config: dict) -> int:
    """Run one experiment from a parameter record with a 'subcommand' key."""
    name = config.get("subcommand") or config.get("command")
    if name not in COMMANDS:
        print(f"error: unknown subcommand {name!r}", file=sys.stderr)
        return EXIT_USAGE
    return _run_record(name, config)


def _run_record(name: str, cfg: dict, argv: Sequence[str] = ()) -> int:
    parser, subs = build_parser()
    try:
        _apply_config(subs[name], cfg, name)
        args = parser.parse_args([name, *argv])
        return COMMANDS[name](args)
    except (UsageError, FieldSchemaError, EnvelopeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    except Exception as exc:  # module failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config) if args.config else {}
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    name = args.command or cfg.get("subcommand") or cfg.get("command")
    if name not in COMMANDS:
        parser.print_usage(sys.stderr)
        print("error: a subcommand is required", file=sys.stderr)
        return EXIT_USAGE
    rest = argv
    if args.command is None:
        rest = [name] + [a for a in argv if a != "--config" and a != args.config]
    return _run_record(name, cfg, [a for a in rest[rest.index(name) + 1:]])


if __name__ == "__main__":
    sys.exit(main())
