import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cipherid import reliability as rel
from cipherid.errors import Infeasible, PreconditionViolated
from cipherid.leveled_arith import SchemeParams, decrypt, encrypt

EXACT = SchemeParams(backend="exact", max_level=30)
TRIPLES = [(17, 6, 1), (19, 4, 3), (16, 8, 2)]


def ct(x):
    return encrypt(x, EXACT)


def brute_k_inv(eps, p, q, l, r):
    """Smallest k with p**(2**k) * sqrt((1+p)/(1-p) * l*r/q) <= eps."""
    scale = math.sqrt((1 + p) / (1 - p) * l * r / q)
    for k in range(64):
        if p ** (2**k) * scale <= eps:
            return k
    raise AssertionError("no k below 64")


def brute_select_p(eps, q, l, r, k_inv):
    feasible = [i / 1000 for i in range(1, 1000)
                if eps < (i / 1000) * math.sqrt((1 + i / 1000) / (1 - i / 1000) * l * r / q)
                and brute_k_inv(eps, i / 1000, q, l, r) <= k_inv]
    return max(feasible) if feasible else None


def test_epsilon_condition_examples():
    rhs = 0.997 * math.sqrt(1.997 / 0.003 * 17)
    assert rhs == pytest.approx(106.06, abs=0.01)
    assert rel.check_epsilon_condition(1e-3, 0.997, 1, 17, 1)
    assert not rel.check_epsilon_condition(rhs, 0.997, 1, 17, 1)
    assert not rel.check_epsilon_condition(1e-12, 1e-300, 1, 17, 1)


@pytest.mark.parametrize("l, r, value", [(17, 1, 11.91), (19, 3, 11.99), (16, 2, 11.95)])
def test_k_inv_bound_case_study(l, r, value):
    assert rel.k_inv_bound_value(1e-3, 0.997, 1, l, r) == pytest.approx(value, abs=0.01)
    assert rel.k_inv_bound(1e-3, 0.997, 1, l, r) == 12 == brute_k_inv(1e-3, 0.997, 1, l, r)
    assert rel.k_inv_bound(1e-3, 0.998, 1, l, r) == 13


def test_k_inv_bound_precondition():
    with pytest.raises(PreconditionViolated):
        rel.k_inv_bound(1e3, 0.5, 1, 1, 1)


@pytest.mark.parametrize("l, nu, r", TRIPLES)
def test_select_p_case_study(l, nu, r):
    assert rel.select_p(1e-3, 1, l, r, 12, 1e-3) == 0.997


def test_select_p_infeasible():
    with pytest.raises(Infeasible):
        rel.select_p(1e-12, 1, 17, 1, 1, 1e-3)
    with pytest.raises(ValueError):
        rel.select_p(1e-3, 1, 17, 1, 12, 1.5)


@settings(max_examples=80, derandomize=True, deadline=None)
@given(
    st.floats(1e-8, 1.0),
    st.floats(0.05, 0.999),
    st.floats(0.1, 10.0),
    st.integers(1, 40),
    st.integers(1, 5),
)
def test_k_inv_bound_matches_brute_force(eps, p, q, l, r):
    if not rel.check_epsilon_condition(eps, p, q, l, r):
        return
    assert rel.k_inv_bound(eps, p, q, l, r) == brute_k_inv(eps, p, q, l, r)


@settings(max_examples=25, derandomize=True, deadline=None)
@given(st.floats(1e-6, 1e-1), st.integers(2, 30), st.integers(1, 4), st.integers(1, 14))
def test_select_p_matches_brute_force(eps, l, r, k_inv):
    expected = brute_select_p(eps, 1.0, l, r, k_inv)
    if expected is None:
        with pytest.raises(Infeasible):
            rel.select_p(eps, 1.0, l, r, k_inv)
    else:
        assert rel.select_p(eps, 1.0, l, r, k_inv) == expected


@settings(max_examples=80, derandomize=True, deadline=None)
@given(st.floats(1e-8, 1e-2), st.floats(1.01, 100), st.floats(0.5, 0.999), st.integers(1, 20), st.integers(1, 20))
def test_k_inv_bound_monotone(eps, factor, p, lr, extra):
    assert rel.k_inv_bound(eps * factor, p, 1, lr, 1) <= rel.k_inv_bound(eps, p, 1, lr, 1)
    assert rel.k_inv_bound(eps, p, 1, lr, 1) <= rel.k_inv_bound(eps, p, 1, lr + extra, 1)


def test_depth_plan_examples():
    d = rel.depth_plan(5, 12, 6)
    assert (d.preprocessing, d.division, d.inversion, d.least_squares, d.certificates) == (1, 6, 14, 1, 7)
    assert d.total == 22 == d.computation
    assert rel.depth_plan(1, 1, 30).total == 32
    assert rel.depth_plan(5, 12, 3).certificates == max(4, 4, 7)
    assert rel.depth_plan(1, 1, 3).certificates == 4


@settings(max_examples=100, derandomize=True, deadline=None)
@given(st.integers(1, 10), st.integers(1, 20), st.integers(3, 30))
def test_depth_total_closed_form(k_div, k_inv, nu):
    assert rel.depth_plan(k_div, k_inv, nu).total == max(5 + k_div + k_inv, 2 + nu)


def test_plan_serialization():
    plan = rel.make_plan(1e-3, 17, 6, 1)
    d = plan.to_dict()
    assert d["depth_total"] == 22 and d["p"] == 0.997 and d["k_inv"] == 12
    assert rel.ReliabilityPlan.from_dict(d) == plan
    assert rel.make_plan(1e-3, 17, 6, 1, p=0.997, k_inv=None).k_inv == 12


def test_mu_from_gram():
    assert decrypt(rel.mu_from_gram(ct(np.eye(3)))) == 3.0
    M = ct(np.diag([1.0, 2.0]))
    mu = rel.mu_from_gram(M.T @ M)
    assert decrypt(mu) == 5.0 and mu.level == EXACT.max_level - 1
    A = np.random.default_rng(0).normal(size=(17, 6))
    assert decrypt(rel.mu_from_gram(ct(A).T @ ct(A))) == pytest.approx(np.sum(A**2), abs=1e-9)


def test_init_w0_and_alpha():
    w0 = rel.init_w0(ct(1.0), 1.999, 17, 6)
    assert decrypt(w0) == pytest.approx(0.019598039215686276, rel=1e-15)
    assert w0.level == EXACT.max_level - 1
    alpha = rel.alpha_from_w(ct(0.5), 0.997)
    assert decrypt(alpha) == pytest.approx(0.9985)
    assert alpha.level == EXACT.max_level - 1
    assert np.linalg.norm(np.eye(2) - decrypt(alpha) * np.eye(2), 2) == pytest.approx(0.0015)
    with pytest.raises(ValueError):
        rel.init_w0(ct(1.0), 2.0, 17, 6)


@settings(max_examples=50, derandomize=True, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12), st.integers(1, 6))
def test_w0_inside_convergence_interval(seed, l, nu):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(max(l, nu), nu)) * rng.uniform(0.1, 10)
    beta = np.abs(M).max()
    w0 = decrypt(rel.init_w0(ct(1 / beta**2), 1.999, M.shape[0], nu))
    assert 0 < w0 * np.sum(M**2) < 2


def test_magnitude_certificate():
    pair = rel.certificate_magnitude(ct(3.0), ct(1.0))
    assert pair.kind == rel.MAGNITUDE and pair.rhs is None
    assert rel.accept_magnitude(decrypt(pair.lhs), 1.0)
    assert not rel.accept_magnitude(decrypt(rel.certificate_magnitude(ct(0.5), ct(1.0)).lhs), 1.0)
    assert pair.lhs.level == EXACT.max_level - 1


def test_spectral_certificate_identity_example():
    I = ct(np.eye(2))
    pair = rel.certificate_spectral(I, ct(2.0), ct(1.0), ct(0.4999), 0.997, 2)
    lhs, rhs = decrypt(pair.lhs), decrypt(pair.rhs)
    assert lhs == pytest.approx(0.0030045067601402104, rel=1e-12)
    assert rhs == pytest.approx(0.4999)
    assert rel.accept_spectral(lhs, rhs)


def test_spectral_certificate_near_singular():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(10, 3))
    M[:, 2] = M[:, 1] + 1e-6 * rng.normal(size=10)
    gram = M.T @ M
    mu = np.trace(gram)
    beta = np.abs(M).max()
    pair = rel.certificate_spectral(ct(gram), ct(mu), ct(1 / beta**2), ct(1 / mu), 0.997, 3)
    assert not rel.accept_spectral(decrypt(pair.lhs), decrypt(pair.rhs))


def test_spectral_certificate_depth():
    nu = 6
    A = np.random.default_rng(1).normal(size=(17, nu))
    gram = ct(A).T @ ct(A)
    pair = rel.certificate_spectral(gram, rel.mu_from_gram(gram), ct(0.1), ct(0.01), 0.997, nu)
    # measured from the preprocessed level of gram
    used = gram.level - min(pair.lhs.level, pair.rhs.level)
    assert used <= rel.depth_plan(5, 12, nu).certificates


def _plain_certificate(M, w, p):
    beta = np.abs(M).max()
    gram = M.T @ M
    nu = M.shape[1]
    lhs = (np.trace(gram) / beta**2 * rel.spectral_constant(p, nu)) ** (nu - 1) / beta**2
    rhs = w * np.linalg.det(gram / beta**2)
    return lhs, rhs


@pytest.mark.parametrize("seed", range(20))
def test_spectral_verdict_scale_invariant(seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(12, 3))
    w = 1 / np.sum(M**2)
    c = 10 ** rng.uniform(-2, 2)
    lhs, rhs = _plain_certificate(M, w, 0.997)
    lhs_c, rhs_c = _plain_certificate(c * M, w / c**2, 0.997)
    assert (lhs <= rhs) == (lhs_c <= rhs_c)
    assert lhs_c / rhs_c == pytest.approx(lhs / rhs, rel=1e-9)


def test_encrypted_certificate_matches_plain_formula():
    rng = np.random.default_rng(3)
    M = rng.normal(size=(15, 4))
    beta = np.abs(M).max()
    w = 1 / np.sum(M**2)
    gram = ct(M).T @ ct(M)
    pair = rel.certificate_spectral(gram, rel.mu_from_gram(gram), ct(1 / beta**2), ct(w), 0.997, 4)
    lhs, rhs = _plain_certificate(M, w, 0.997)
    assert decrypt(pair.lhs) == pytest.approx(lhs, rel=1e-10)
    assert decrypt(pair.rhs) == pytest.approx(rhs, rel=1e-10)


@settings(max_examples=100, derandomize=True, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_eigenvalue_lower_bound(seed, nu):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(nu + int(rng.integers(0, 5)), nu))
    gram = A.T @ A
    assert np.linalg.eigvalsh(gram)[0] >= rel.eigenvalue_lower_bound(gram) * (1 - 1e-9)


def test_division_error():
    assert rel.division_error(2.0, 0.4, 2) == pytest.approx(0.0016)


def test_spectral_slack_is_relative():
    # tiny values are common after the beta scaling; an absolute slack would accept these
    assert not rel.accept_spectral(1e-11, 1e-15)
    assert rel.accept_spectral(1e-15 * (1 + 1e-12), 1e-15)
    assert not rel.accept_spectral(0.0, 0.0)
    assert rel.accept_spectral(0.3, 0.3)
