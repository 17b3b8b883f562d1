import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hypowave.coefficient import make_speed, regularized_roots
from hypowave.mode_ode import (
    EnvelopeError,
    ModeProblem,
    case_epsilon,
    case_roots,
    energy,
    gronwall_pointwise,
    integrate_mode,
    kchoice,
    predict_envelope,
    quasi_symmetriser,
    reduce_to_system,
    symmetriser,
    transformed_energy,
    verify_envelope,
    w_monotone,
)

ONE = make_speed("constant")


def test_initial_vector():
    V0, _ = reduce_to_system(ModeProblem(2.0, ONE, 1.0, 0.0))
    assert np.allclose(V0, [2j, 0])


def test_beta_zero_system():
    V0, A = reduce_to_system(ModeProblem(0.0, ONE, 1.0, 3.0))
    assert np.allclose(V0, [0, 3])


def test_system_matrix():
    _, A = reduce_to_system(ModeProblem(1.0, make_speed("constant:3")))
    assert np.array_equal(A(0.3), [[0, 1], [3, 0]])


def test_harmonic_closed_form():
    tr = integrate_mode(ModeProblem(1.0, ONE, 0.0, 1.0, 1.0), 1e-10, times=[0.0, 1.0])
    assert tr.v[-1].real == pytest.approx(math.sin(1.0), abs=1e-8)


def test_conservation_example():
    tr = integrate_mode(ModeProblem(2.0, ONE, 1.0, 0.0, 1.0), 1e-10)
    assert np.max(np.abs(tr.energy - 4.0)) <= 1e-8


def test_linear_drift():
    sp = make_speed("constant", horizon=3.0)
    tr = integrate_mode(ModeProblem(0.0, sp, 1.0, 2.0, 3.0), times=[0.0, 3.0])
    assert tr.v[-1] == 7.0


@settings(max_examples=15, deadline=None)
@given(st.floats(0.25, 4.0), st.floats(0.0, 60.0))
def test_conservation_property(c, beta):
    rel = 1e-9
    p = ModeProblem(beta, make_speed("constant", {"c": c}), 0.3 - 0.2j, 0.7)
    tr = integrate_mode(p, rel)
    E = c * beta**2 * np.abs(tr.v) ** 2 + np.abs(tr.v_prime) ** 2
    E0 = c * beta**2 * abs(p.v0) ** 2 + abs(p.v1) ** 2
    assert np.max(np.abs(E - E0)) <= 10 * rel * E0


@pytest.mark.parametrize("beta", [4e-157, 1e-9])
def test_tiny_beta_is_free_motion(beta):
    tr = integrate_mode(ModeProblem(beta, ONE, 0.3 - 0.2j, 0.7), 1e-9)
    assert np.allclose(tr.v, 0.3 - 0.2j + 0.7 * tr.times, atol=1e-12)
    assert np.allclose(tr.v_prime, 0.7, atol=1e-12)


def test_integrator_order():
    # above ~1e-11 the oscillation step cap, not rel_tol, sets the error
    p = ModeProblem(5.0, ONE, 0.2, 0.0)
    err = []
    for rel in (1e-12, 5e-13):
        tr = integrate_mode(p, rel)
        err.append(np.max(np.abs(tr.v - 0.2 * np.cos(5 * tr.times))))
    assert err[1] <= err[0] / 2


def test_time_reversal():
    rel = 1e-10
    sp = make_speed("sine:2,1,4")
    p = ModeProblem(7.0, sp, 0.1, 0.5)
    tr = integrate_mode(p, rel, times=[0.0, 1.0])
    # reversed time sees a(1 - t)
    back_speed = replace(sp, fn=lambda t: 2 + np.sin(4 * (1 - t)))
    back = integrate_mode(ModeProblem(7.0, back_speed, tr.v[-1], -tr.v_prime[-1]), rel, times=[0.0, 1.0])
    assert abs(back.v[-1] - p.v0) + abs(back.v_prime[-1] + p.v1) <= 20 * rel * (1 + p.E0)


def test_symmetriser_values():
    assert np.array_equal(symmetriser(3), np.diag([6.0, 2.0]))
    assert np.array_equal(symmetriser(0), np.diag([0.0, 2.0]))


def test_symmetriser_symmetrises():
    S = symmetriser(5)
    A = np.array([[0, 1], [5, 0]])
    assert np.allclose(S @ A - A.conj().T @ S, 0, atol=1e-15)


def test_quasi_symmetriser_values():
    assert np.allclose(quasi_symmetriser(0, 0.5), np.diag([0.5, 2.0]))
    assert np.allclose(quasi_symmetriser(1, 1e-9), symmetriser(1))


def test_quasi_symmetriser_commutator():
    Q = quasi_symmetriser(7, 0.1)
    A = np.array([[0, 1], [7, 0]])
    assert np.allclose(Q @ A - A.T @ Q, 2 * 0.01 * np.array([[0, 1], [-1, 0]]), atol=1e-14)


def test_quasi_symmetriser_eps_range():
    with pytest.raises(ValueError):
        quasi_symmetriser(1, 0.0)


@settings(max_examples=50)
@given(st.floats(0, 5), st.floats(1e-3, 1), st.complex_numbers(max_magnitude=10), st.complex_numbers(max_magnitude=10))
def test_quasi_symmetriser_coercive(a, eps, v1, v2):
    V = np.array([v1, v2])
    c1 = max(2.0, 2 * (a + eps**2))
    e = energy(quasi_symmetriser(a, eps), V)
    n2 = float(np.vdot(V, V).real)
    assert eps**2 * n2 / c1 <= e * (1 + 1e-12) + 1e-300
    assert e <= c1 * n2 * (1 + 1e-12) + 1e-300


def test_energy_examples():
    assert energy(np.diag([2, 2]), [1j, 1]) == pytest.approx(4.0)
    assert energy(quasi_symmetriser(0, 0.3), [1, 0]) == pytest.approx(2 * 0.09)
    beta, v, vp = 1.0, 0.4 + 0.1j, -0.3j
    assert energy(symmetriser(1), [1j * beta * v, vp]) == pytest.approx(2 * (beta**2 * abs(v) ** 2 + abs(vp) ** 2))


def test_energy_rejects_non_hermitian():
    with pytest.raises(ValueError):
        energy([[1, 2], [0, 1]], [1, 1])


def test_case_epsilons():
    assert case_epsilon(3, 16, l=2) == pytest.approx(0.25)
    assert case_epsilon(4, 16, alpha=1) == pytest.approx(0.25)
    assert case_epsilon(2, 8) == pytest.approx(0.125)


def test_envelope_case1_flat():
    p = ModeProblem(3.0, make_speed("sine:2,1,4"))
    b = predict_envelope(1, p, 1.0, 0.0, 5.0)
    assert b.envelope(0.2, 3.0) == b.envelope(0.9, 3.0) == pytest.approx(5.0 * p.E0)


def test_envelope_case2_value():
    p = ModeProblem(16.0, make_speed("shifted_power", {"alpha": 0.75}), 1 / 16, 0.0)
    b = predict_envelope(2, p, 2.0, 0.5, 1.0)
    assert b.envelope(1.0, 16.0) == pytest.approx(math.exp(2.0))


def test_envelope_case3_value():
    p = ModeProblem(16.0, make_speed("square"), 1 / 16, 0.0)
    b = predict_envelope(3, p, 0.0, 1.0, 1.0)
    assert b.envelope(1.0, 16.0) == pytest.approx(17 * math.exp(4))


def test_envelope_rejects_out_of_range_s():
    p = ModeProblem(4.0, make_speed("shifted_power:1,0.5"))
    with pytest.raises(EnvelopeError):
        predict_envelope(2, p, 2.5, 1.0, 1.0)


def test_w_constant_for_sharp_roots():
    r = regularized_roots(ONE, 0.1)
    tr = integrate_mode(ModeProblem(3.0, ONE, 1 / 3, 0.0), 1e-11)
    W = transformed_energy(tr, r, 0.0, 0.0, 1.0, 3.0)
    assert np.ptp(W) <= 1e-9 * W[0]


def test_w_large_k_decays():
    sp = make_speed("shifted_power:1,0.5")
    for beta in (4.0, 100.0):
        tr = integrate_mode(ModeProblem(beta, sp, 1 / beta, 0.0), 1e-9)
        W = transformed_energy(tr, case_roots(2, sp, beta), 0.0, 1e3, 1.5, beta)
        assert W[-1] <= W[0]


def test_transform_needs_positive_beta():
    tr = integrate_mode(ModeProblem(0.0, ONE, 1.0, 0.0), times=[0, 1])
    with pytest.raises(ValueError):
        transformed_energy(tr, regularized_roots(ONE, 0.1), 0, 0, 1, 0.0)


@pytest.mark.parametrize("case,spec,s", [(2, "shifted_power:1,0.5", 1.5), (4, "power:0.5", 1.1)])
def test_w_monotone_with_kchoice(case, spec, s):
    sp = make_speed(spec)
    grid = (4, 16, 64)
    K = kchoice(case, sp, s, grid)
    rel = 1e-9
    for b in grid:
        tr = integrate_mode(ModeProblem(b, sp, 0.0, 1.0), rel, n_samples=301)
        assert w_monotone(transformed_energy(tr, case_roots(case, sp, b), 0.0, K, s, b), rel)


def test_verify_case1_constant_ratio_one():
    rep = verify_envelope(1, ONE, [1, 10, 100, 1000], T=1.0)
    assert np.allclose(rep.sup_ratios, 1.0, atol=1e-7)
    assert rep.fitted_K == 0.0 and rep.passed


def test_verify_case4_abs():
    rep = verify_envelope(4, make_speed("power", {"alpha": 1.0}), [4, 16, 64, 256], s=1.4)
    assert rep.passed


def test_verify_csv(tmp_path):
    rep = verify_envelope(1, ONE, [1, 2])
    text = rep.to_csv(tmp_path / "r.csv").read_text().splitlines()
    assert text[0] == "case,beta,s,sup_ratio,fitted_K,residual"
    assert len(text) == 3


def test_gronwall_pointwise():
    for spec in ("sine:2,1,4", "linear:1,2"):
        tr = integrate_mode(ModeProblem(20.0, make_speed(spec), 0.05, 0.0), 1e-10, n_samples=2001)
        ok, _ = gronwall_pointwise(tr)
        assert ok


def test_trajectory_dat(tmp_path):
    tr = integrate_mode(ModeProblem(1.0, ONE, 1.0, 0.0), n_samples=5)
    rows = tr.to_dat(tmp_path / "t.dat").read_text().splitlines()
    assert rows[0].startswith("#") and len(rows) == 6
    assert len(rows[1].split()) == 6
