import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cipherid import itersolve as it
from cipherid.errors import DepthExhausted, DiagnosticsNotAllowed
from cipherid.leveled_arith import SchemeParams, decrypt, encrypt

EXACT = SchemeParams(backend="exact", max_level=40)


def ct(x, params=EXACT):
    return encrypt(x, params)


def naive_reciprocal(mu, w0, k):
    ws = [w0]
    for _ in range(k):
        ws.append((2 - ws[-1] * mu) * ws[-1])
    return ws


def naive_schulz(M, W0, k):
    Ws = [W0]
    for _ in range(k):
        Ws.append((2 * np.eye(M.shape[1]) - Ws[-1] @ M) @ Ws[-1])
    return Ws


@pytest.mark.parametrize("kernel", [it.reciprocal_iter, it.goldschmidt_reciprocal])
def test_reciprocal_hand_values(kernel):
    assert decrypt(kernel(ct(4.0), ct(0.25), 5)) == 0.25
    trace = it.IterTrace()
    w = kernel(ct(2.0), ct(0.4), 2, trace=trace)
    np.testing.assert_allclose(trace.iterates, [0.4, 0.48, 0.4992], rtol=1e-15)
    np.testing.assert_allclose(trace.scalar_errors(2.0), [0.2, 0.04, 0.0016], atol=1e-15)
    assert decrypt(w) == pytest.approx(0.4992, rel=1e-15)


def test_reciprocal_from_far_side_of_interval():
    trace = it.IterTrace()
    it.goldschmidt_reciprocal(ct(1.0), ct(1.999), 6, trace=trace)
    e = trace.scalar_errors(1.0)
    np.testing.assert_allclose(np.abs(e), 0.999 ** (2.0 ** np.arange(7)), rtol=1e-9)
    assert all(w <= 1.0 for w in trace.iterates[1:])


def test_reciprocal_level_costs():
    mu, w0 = ct(2.0), ct(0.4)
    assert it.reciprocal_iter(mu, w0, 3).level == EXACT.max_level - 6
    assert it.goldschmidt_reciprocal(mu, w0, 3).level == EXACT.max_level - 4


def test_division_stage_levels_from_twenty_two():
    # after preprocessing mu = trace(M^T M) and w0 = c * ct(1/beta^2) sit at 21
    params = SchemeParams(backend="exact", max_level=22)
    mu = encrypt(3.0, params) * 1.0
    w0 = encrypt(0.3, params) * 1.0
    assert it.goldschmidt_reciprocal(mu, w0, 5).level == 15


def test_goldschmidt_reciprocal_fixed_point_of_exact_inverse():
    trace = it.IterTrace()
    it.goldschmidt_reciprocal(ct(0.5), ct(2.0), 4, trace=trace)
    assert trace.iterates == [2.0] * 5


def test_reciprocal_rejects_zero_iterations():
    with pytest.raises(ValueError):
        it.reciprocal_iter(ct(1.0), ct(1.0), 0)


def test_schulz_identity_fixed_point():
    I = ct(np.eye(2))
    W = it.schulz_iter(I, I, 5)
    np.testing.assert_array_equal(decrypt(W), np.eye(2))


def test_schulz_diagonal_hand_values():
    M = np.diag([1.0, 2.0])
    trace = it.IterTrace()
    it.schulz_iter(ct(M), ct(0.3 * M.T), 8, trace=trace)
    np.testing.assert_allclose(trace.iterates[1], np.diag([0.51, 0.48]), atol=1e-15)
    np.testing.assert_allclose(trace.iterates[-1], np.diag([1.0, 0.5]), atol=1e-12)


def test_schulz_gram_shortcut_matches():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(9, 4))
    alpha = 1.0 / np.linalg.norm(M, "fro") ** 2
    ctM, ct_alpha = ct(M), ct(alpha)
    W0 = ct_alpha * ctM.T
    plain = decrypt(it.schulz_iter(ctM, W0, 4))
    shortcut = decrypt(it.schulz_iter(ctM, W0, 4, gram=ctM.T @ ctM, alpha=ct_alpha))
    np.testing.assert_allclose(plain, shortcut, atol=1e-13)


def test_schulz_error_bound_on_case_study_shape():
    rng = np.random.default_rng(1)
    M = rng.normal(size=(17, 6))
    pinv = np.linalg.pinv(M)
    alpha = 1.0 / np.linalg.norm(M, "fro") ** 2
    E0 = np.linalg.norm(np.eye(6) - alpha * M.T @ M, 2)
    W = decrypt(it.schulz_iter(ct(M), ct(alpha * M.T), 12))
    bound = E0 ** (2**12) * np.linalg.norm(pinv, 2)
    assert np.linalg.norm(W - pinv, 2) <= bound + 1e-12


def test_schulz_level_cost():
    M = ct(np.eye(3))
    assert it.schulz_iter(M, M, 3).level == EXACT.max_level - 6


def test_goldschmidt_equals_schulz_on_diagonal():
    M = np.diag([1.0, 2.0])
    W = decrypt(it.schulz_iter(ct(M), ct(0.3 * M), 3))
    F = decrypt(it.goldschmidt_matrix(ct(0.3 * M), ct(0.3 * M.T @ M), 3))
    assert np.max(np.abs(F - W)) <= 1e-12


def test_goldschmidt_converged_start():
    F0 = np.array([[0.2, 0.1, 0.0], [0.3, 0.4, 0.5]])
    F = it.goldschmidt_matrix(ct(F0), ct(np.eye(2)), 4)
    np.testing.assert_array_equal(decrypt(F), F0)


def test_goldschmidt_halves_depth():
    M = np.diag([1.0, 2.0, 0.5])
    W0 = ct(0.3 * M)
    H0 = ct(0.3 * M @ M)
    assert it.goldschmidt_matrix(W0, H0, 12).level == EXACT.max_level - 12
    assert it.schulz_iter(ct(M), W0, 12).level == EXACT.max_level - 24


@pytest.mark.parametrize("seed", range(5))
def test_matrix_error_squaring_and_abs_error_identity(seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(12, 5))
    pinv = np.linalg.pinv(M)
    alpha = 1.0 / np.linalg.norm(M, "fro") ** 2
    trace = it.IterTrace()
    it.goldschmidt_matrix(ct(alpha * M.T), ct(alpha * M.T @ M), 10, trace=trace)
    E = trace.relative_errors(M)
    for a, b in zip(E, E[1:]):
        assert np.max(np.abs(b - a @ a)) <= 1e-10
    for Ek, Fk in zip(E, trace.abs_errors(pinv)):
        np.testing.assert_allclose(Fk, Ek @ pinv, atol=1e-10)


@pytest.mark.parametrize("e, levels", [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3), (7, 3), (8, 3), (9, 4), (15, 4)])
def test_binary_pow_values_and_levels(e, levels):
    x = ct(1.1)
    y = it.binary_pow(x, e)
    assert decrypt(y) == pytest.approx(1.1**e, rel=1e-14)
    assert x.level - y.level == levels == math.floor(math.log2(e)) + (0 if e & (e - 1) == 0 else 1)


def test_binary_pow_depth_exhaustion():
    params = SchemeParams(backend="exact", max_level=2)
    with pytest.raises(DepthExhausted):
        it.binary_pow(encrypt(1.1, params), 7)
    assert decrypt(it.binary_pow(encrypt(2.0, params), 4)) == 16.0


def test_laplace_small_cases():
    assert decrypt(it.laplace_det(ct(np.eye(3)))) == 1.0
    assert decrypt(it.laplace_det(ct(np.array([[1.0, 2.0], [3.0, 4.0]])))) == -2.0
    assert decrypt(it.laplace_det(ct(np.array([[5.0]])))) == 5.0


@pytest.mark.parametrize("nu", range(1, 9))
def test_laplace_matches_lu_and_costs_nu_minus_one(nu):
    A = np.random.default_rng(nu).normal(size=(nu, nu))
    d = it.laplace_det(ct(A))
    assert decrypt(d) == pytest.approx(np.linalg.det(A), rel=1e-9)
    assert d.level == EXACT.max_level - (nu - 1)


def test_laplace_refuses_large():
    with pytest.raises(ValueError):
        it.laplace_det(ct(np.eye(11)))


def test_trace_requires_exact_backend_or_key(monkeypatch):
    monkeypatch.delenv(it.DEBUG_KEY_ENV, raising=False)
    fixed = SchemeParams(backend="fixed_point", max_level=10)
    with pytest.raises(DiagnosticsNotAllowed):
        it.reciprocal_iter(encrypt(2.0, fixed), encrypt(0.4, fixed), 2, trace=it.IterTrace())
    trace = it.IterTrace(debug_key="dev")
    it.reciprocal_iter(encrypt(2.0, fixed), encrypt(0.4, fixed), 2, trace=trace)
    assert len(trace.iterates) == 3
    monkeypatch.setenv(it.DEBUG_KEY_ENV, "dev")
    assert it.IterTrace().debug_key == "dev"


@settings(max_examples=100, derandomize=True, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1.999))
def test_scalar_error_squaring(mu, frac):
    w0 = frac / mu
    trace = it.IterTrace()
    it.goldschmidt_reciprocal(ct(mu), ct(w0), 6, trace=trace)
    np.testing.assert_allclose(trace.iterates, naive_reciprocal(mu, w0, 6), rtol=1e-12)
    e = trace.scalar_errors(mu)
    for a, b in zip(e, e[1:]):
        assert b == pytest.approx(a * a, abs=1e-13)
    for w in trace.iterates[1:]:
        assert 0 < w <= (1 / mu) * (1 + 1e-15)


@settings(max_examples=25, derandomize=True, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 12))
def test_goldschmidt_naive_agreement(seed, k):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(10, 8))
    alpha = 1.0 / np.linalg.norm(M, "fro") ** 2
    F = decrypt(it.goldschmidt_matrix(ct(alpha * M.T), ct(alpha * M.T @ M), k))
    W = naive_schulz(M, alpha * M.T, k)[-1]
    assert np.max(np.abs(F - W)) <= 1e-10
