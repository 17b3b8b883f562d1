"""Acceptance suite: ten criteria at their stated tolerances and time budgets.

Each test records one ``CRITERION n: PASS|FAIL`` line; the lines are echoed
in the pytest terminal summary and when this file runs as a script.
Criteria 1, 2, 3 and 9 fail as stated; the measured values are printed.
"""
import itertools
import math
import time
from fractions import Fraction

import numpy as np

from hypowave import gevrey, heisenberg as heis, su2, wave
from hypowave.coefficient import make_speed
from hypowave.mode_ode import (
    ModeProblem,
    case_roots,
    integrate_mode,
    kchoice,
    transformed_energy,
    verify_envelope,
    w_monotone,
)

RESULTS = {}


def record(n, ok, budget, elapsed, detail):
    ok = bool(ok) and elapsed < budget
    line = f"CRITERION {n:>2}: {'PASS' if ok else 'FAIL'}  ({elapsed:.2f}s / {budget:g}s)  {detail}"
    RESULTS[n] = line
    print(line)
    return ok


def test_criterion_01_su2_anticommutator():
    t0 = time.perf_counter()
    dev = 0.0
    for tw in range(21):
        X, Y = su2.ladder_symbol("X", su2.HalfInt(tw)).matrix, su2.ladder_symbol("Y", su2.HalfInt(tw)).matrix
        D = -0.5 * (X @ Y + Y @ X) - su2.sublaplacian_symbol(su2.HalfInt(tw)).matrix
        dev = max(dev, float(np.max(np.abs(D))))
    assert record(1, dev <= 1e-12, 1, time.perf_counter() - t0, f"max deviation {dev:.3g} (bound 1e-12)")


def test_criterion_02_su2_riesz_uniformity():
    t0 = time.perf_counter()
    ws = ["".join(w) for w in su2.words("XY", 6)]
    rows = su2.riesz_sweep(ws, 50)
    worst = max(((r[2] / 2 ** len(r[1])), r) for r in rows)
    single = [r[2] for r in rows if len(r[1]) == 1]
    single_dev = max(abs(x - math.sqrt(2)) for x in single)
    ok = worst[0] <= 1 and single_dev <= 1e-10 and max(single) <= 2
    r = worst[1]
    assert record(2, ok, 10, time.perf_counter() - t0,
                  f"worst op_norm/2^|w| = {worst[0]:.4g} (word {r[1]}, l = {r[0]}, norm {r[2]:.4g}); "
                  f"single-letter |norm - sqrt2| <= {single_dev:.2g}")


def test_criterion_03_heis_lambda_invariance():
    t0 = time.perf_counter()
    lams = [-10, -1, -0.1, 0.1, 1, 10]
    ws = [w for q in range(1, 7) for w in itertools.product(("Z", "Zbar"), repeat=q)]
    dev = max(heis.lambda_invariance(w, lams, 128) for w in ws)
    elapsed = time.perf_counter() - t0
    same = max(heis.lambda_invariance(w, [x for x in lams if x * sgn > 0], 128) for w in ws for sgn in (1, -1))
    assert record(3, dev <= 1e-12, 10, elapsed,
                  f"max deviation {dev:.4g} over both signs (bound 1e-12); within one sign {same:.2g}")


def test_criterion_04_heis_commutation():
    t0 = time.perf_counter()
    c = max(heis.commutator_check(l, 64) for l in (1, -1, 4, -4))
    s = max(heis.sublaplacian_check(l, 64) for l in (1, -1, 4, -4))
    assert record(4, c <= 1e-12 and s <= 1e-12, 1, time.perf_counter() - t0,
                  f"commutator {c:.3g}, sub-Laplacian {s:.3g} (bound 1e-12)")


def test_criterion_05_case1_energy():
    t0 = time.perf_counter()
    rep = verify_envelope(1, make_speed("sine:2,1,4"), [1, 10, 100, 1000], T=1.0, rel_tol=1e-10)
    bound = rep.extra["gronwall_bound"]
    ctrl = verify_envelope(1, make_speed("constant"), [1, 10, 100, 1000], T=1.0, rel_tol=1e-10)
    cdev = float(np.max(np.abs(ctrl.sup_ratios - 1)))
    ok = rep.spread <= 2 and rep.sup_ratios.max() <= bound and cdev <= 1e-8
    assert record(5, ok, 30, time.perf_counter() - t0,
                  f"ratios {np.array2string(rep.sup_ratios, precision=3)}, spread {rep.spread:.3g} <= 2, "
                  f"max <= exp(c') = {bound:.4g}; control |ratio-1| {cdev:.2g}")


def _w_ok(case, sp, s, grid, rel):
    K = kchoice(case, sp, s, grid)
    for b in grid:
        roots = case_roots(case, sp, b)
        for v0, v1 in ((1.0 / b, 0.0), (0.0, 1.0)):
            tr = integrate_mode(ModeProblem(b, sp, v0, v1), rel, n_samples=401)
            if not w_monotone(transformed_energy(tr, roots, 0.0, K, s, b), rel):
                return False, K
    return True, K


def test_criterion_06_cases_2_to_4():
    t0 = time.perf_counter()
    grid = [4, 16, 64, 256]
    rel = 1e-9
    parts, ok = [], True
    for case, spec, s in ((2, "shifted_power:1,0.5", 1.5), (4, "power:0.5", 1.1),
                          (3, "square", None), (3, "sine_squared", None)):
        sp = make_speed(spec)
        rep = verify_envelope(case, sp, grid, s if s else 1.0, rel_tol=rel)
        good = rep.passed
        note = f"case {case} {spec}: K={rep.fitted_K:.3g} {'ok' if rep.passed else 'BAD'}"
        if case in (2, 4):
            wok, K = _w_ok(case, sp, s, grid, rel)
            good &= wok
            note += f", W monotone with K={K:.3g}: {wok}"
        ok &= good
        parts.append(note)
    assert record(6, ok, 300, time.perf_counter() - t0, "; ".join(parts))


def test_criterion_07_wave_solver():
    t0 = time.perf_counter()
    rel = 1e-10
    f0, f1 = su2.weighted_field(6, 0.5, 0), su2.weighted_field(6, 0.5, 1)
    one = make_speed("constant")
    d_su2 = wave.max_deviation(wave.solve_cauchy(f0, f1, one, 1.0, 51, rel),
                               wave.exact_const_solution(f0, f1, 1.0, 1.0, 51))
    lams = np.array([-10, -3, -1, -0.3, 0.3, 1, 3, 10, 30.0])
    h0, h1 = heis.random_field(lams, 32, 0), heis.random_field(lams, 32, 1)
    d_heis = wave.max_deviation(wave.solve_cauchy(h0, h1, one, 1.0, 21, rel),
                                wave.exact_const_solution(h0, h1, 1.0, 1.0, 21))
    sob = wave.verify_sobolev_wellposedness(wave.solve_cauchy(f0, f1, make_speed("sine:2,1,4"), 1.0), 1.0)
    flat = wave.verify_sobolev_wellposedness(wave.solve_cauchy(f0, f1, one, 1.0), 1.0, refine=False)
    ok = d_su2 <= 10 * rel and d_heis <= 10 * rel and sob.passed and abs(flat.C_meas - 1) <= 1e-8
    assert record(7, ok, 60, time.perf_counter() - t0,
                  f"oracle su2 {d_su2:.2g}, heis {d_heis:.2g} (bound {10 * rel:g}); "
                  f"Sobolev C {sob.C_meas:.4g} -> {sob.C_refined:.4g} on doubling; a=1 C-1 {flat.C_meas - 1:.2g}")


def test_criterion_08_gevrey_constants():
    t0 = time.perf_counter()
    fields = {"single": su2.single_mode_field(1, 0, 0), "weighted": su2.weighted_field(10, 2.0, 0)}
    worst = math.inf
    ok = True
    for f in fields.values():
        for s in (1.0, 1.5, 2.0):
            rep = gevrey.forward_constant_check(f, "su2", 1.0, s, 20)
            ok &= rep.passed
            worst = min(worst, float(np.min(rep.margins)))
    val, _ = gevrey.sup_multiplier(1, 1.0, 1.0)
    spot = abs(val - 4 * math.exp(-2))
    ok &= spot <= 1e-12
    assert record(8, ok, 5, time.perf_counter() - t0,
                  f"min log-margin {worst:.4g} >= 0; |sup - 4e^-2| = {spot:.2g}")


def test_criterion_09_bessel():
    t0 = time.perf_counter()
    d1 = su2.bessel_doubling(1.0, 200)
    c1 = su2.classify_bessel(1.0, 200)
    c05 = su2.classify_bessel(0.5, 200)
    half = su2.bessel_partial_sum(1.0, Fraction(1, 2))
    ok = c1 == "convergent" and c05 == "divergent" and abs(half - 25 / 9) <= 1e-12
    assert record(9, ok, 5, time.perf_counter() - t0,
                  f"s=1 {c1} (ratios {np.array2string(np.array(d1['ratios']), precision=3)}, need <= 2/3); "
                  f"s=0.5 {c05}; lmax=1/2 sum - 25/9 = {half - 25 / 9:.2g}")


def test_criterion_10_order_fit():
    t0 = time.perf_counter()
    _, A, s = gevrey.gevrey_order_fit(gevrey.planted_norms(1.5, 1.2), range(1, 21))
    assert record(10, abs(s - 1.2) <= 0.05, 1, time.perf_counter() - t0, f"recovered s = {s:.6g}, A = {A:.6g}")


if __name__ == "__main__":
    import sys

    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                pass
    sys.exit(0 if all("PASS" in line for line in RESULTS.values()) else 1)
