import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_dictionary
from taskdict.elastic_net import (
    ActiveSetLimitError,
    ElasticNetParams,
    SingularGramError,
    active_closed_form,
    as_dictionary,
    batch_solve,
    check_kkt,
    objective,
    solve,
    solve_cd,
)

P = ElasticNetParams(lambda1=0.15, lambda2=0.01)

# small fixed instance; reference solution from a bound-constrained quasi-Newton
# solve of the split (u - v) formulation, independent of both solvers here
D_FIX = np.array(
    [[0.6, -0.2, 0.5, 0.0, 0.3], [0.8, 0.4, -0.5, 0.6, 0.1], [0.0, 0.8, 0.5, -0.8, -0.9]]
)
D_FIX = D_FIX / np.maximum(np.linalg.norm(D_FIX, axis=0), 1.0)
X_FIX = np.array([0.9, -0.3, 0.7])
ALPHA_FIX = np.array([0.2560718057, 0.0, 1.0863252376, 0.0, 0.0])
OBJ_FIX = 0.2412645195


def test_frozen_instance():
    c = solve(X_FIX, D_FIX, P)
    np.testing.assert_allclose(c.alpha, ALPHA_FIX, atol=1e-8)
    assert c.objective == pytest.approx(OBJ_FIX, abs=1e-9)
    assert sorted(c.active) == [0, 2]
    np.testing.assert_array_equal(np.sign(c.alpha[c.active]), c.signs)


def test_zero_signal():
    D = random_dictionary(np.random.default_rng(0), 6, 9)
    c = solve(np.zeros(6), D, P)
    assert np.all(c.alpha == 0) and c.active.size == 0 and c.chol.shape == (0, 0)


@pytest.mark.parametrize("c", [0.1, -0.15, 0.0])
def test_single_atom_below_threshold(c):
    d = np.array([0.6, 0.8])
    x = c * d
    assert np.all(solve(x, d[:, None], P).alpha == 0)


@pytest.mark.parametrize("c", [0.9, -0.4, 2.5])
def test_single_atom_soft_threshold(c):
    d = np.array([0.6, 0.8])
    x = c * d + 0.3 * np.array([0.8, -0.6])  # orthogonal part does not matter
    expect = np.sign(c) * (abs(c) - 0.15) / 1.01
    assert solve(x, d[:, None], P).alpha[0] == pytest.approx(expect, abs=1e-13)


def test_matches_cd_oracle_and_kkt(rng):
    worst = 0.0
    for _ in range(100):
        D = random_dictionary(rng, 10, 20)
        x = rng.standard_normal(10)
        c = solve(x, D, P)
        ref = solve_cd(x, D, 0.15, 0.01)
        worst = max(worst, np.max(np.abs(c.alpha - ref)))
        assert check_kkt(x, D, c.alpha, P).passed
    assert worst < 1e-6


def test_code_invariants(rng):
    for _ in range(50):
        D = random_dictionary(rng, 12, 30)
        x = rng.standard_normal(12)
        c = solve(x, D, P)
        off = np.setdiff1d(np.arange(30), c.active)
        assert np.all(c.alpha[off] == 0)
        np.testing.assert_array_equal(c.signs, np.sign(c.alpha[c.active]))
        DA = D[:, c.active]
        H = DA.T @ DA + 0.01 * np.eye(c.active.size)
        if c.active.size:
            err = np.linalg.norm(c.chol @ c.chol.T - H) / np.linalg.norm(H)
            assert err < 1e-10
            assert np.allclose(c.chol, np.tril(c.chol))
        assert c.objective == pytest.approx(objective(x, D, c.alpha, 0.15, 0.01), rel=1e-12)


def test_objective_beats_perturbations(rng):
    D = random_dictionary(rng, 10, 20)
    x = rng.standard_normal(10)
    c = solve(x, D, P)
    best = objective(x, D, c.alpha, 0.15, 0.01)
    for _ in range(1000):
        a = c.alpha + rng.standard_normal(20) * 10.0 ** rng.uniform(-6, 0)
        assert objective(x, D, a, 0.15, 0.01) >= best - 1e-12


def test_zero_dominance(rng):
    for _ in range(30):
        D = random_dictionary(rng, 8, 15)
        x = rng.standard_normal(8)
        lam = np.max(np.abs(D.T @ x)) * (1 + rng.uniform(0, 0.5))
        assert np.all(solve(x, D, ElasticNetParams(lam, 0.01)).alpha == 0)


def test_kkt_detects_perturbation(rng):
    D = random_dictionary(rng, 10, 20)
    x = rng.standard_normal(10)
    c = solve(x, D, P)
    assert c.active.size > 0
    a = c.alpha.copy()
    a[c.active[0]] += 0.1
    assert not check_kkt(x, D, a, P).passed
    rep = check_kkt(np.zeros(10), D, np.zeros(20), P)
    assert rep.passed and rep.max_violation == 0


def test_kkt_shape_mismatch():
    with pytest.raises(ValueError):
        check_kkt(np.zeros(3), np.eye(3), np.zeros(4), P)


def test_closed_form_consistency(rng):
    for _ in range(30):
        D = random_dictionary(rng, 10, 20)
        x = rng.standard_normal(10)
        c = solve(x, D, P)
        if c.active.size == 0:
            continue
        a = active_closed_form(x, D, c.active, c.signs, P)
        np.testing.assert_allclose(a, c.alpha[c.active], atol=1e-10)


def test_closed_form_single_atom_and_least_squares(rng):
    d = np.array([[0.6], [0.8]])
    x = np.array([1.0, 1.0])
    cval = 1.4
    a = active_closed_form(x, d, [0], [1.0], P)
    assert a[0] == pytest.approx((cval - 0.15) / 1.01)
    D = random_dictionary(rng, 5, 5)
    x = rng.standard_normal(5)
    ls = ElasticNetParams(0.0, 0.0, allow_unregularized=True)
    a = active_closed_form(x, D, np.arange(5), np.ones(5), ls)
    np.testing.assert_allclose(a, np.linalg.solve(D, x), atol=1e-10)


def test_closed_form_singular():
    d = np.array([0.6, 0.8])
    D = np.column_stack([d, d])
    with pytest.raises(SingularGramError, match="lambda2 > 0"):
        active_closed_form(np.ones(2), D, [0, 1], [1.0, 1.0], ElasticNetParams(0.1, 0.0))
    with pytest.raises(ValueError):
        active_closed_form(np.ones(2), D, [], [], P)


def test_lambda2_zero_duplicate_atoms_raise():
    d = np.array([0.6, 0.8, 0.0])
    e = np.array([0.0, 0.6, 0.8])
    D = np.column_stack([d, d, e])
    x = 2 * d + e
    # the path admits one copy of d; the twin then never leaves the bound
    try:
        c = solve(x, D, ElasticNetParams(0.01, 0.0))
    except SingularGramError as exc:
        assert "lambda2" in str(exc)
    else:
        assert check_kkt(x, D, c.alpha, ElasticNetParams(0.01, 0.0)).passed
        assert np.count_nonzero(c.alpha[:2]) == 1


def test_lambda2_zero_matches_oracle(rng):
    p0 = ElasticNetParams(0.2, 0.0)
    for _ in range(30):
        D = random_dictionary(rng, 10, 20)
        x = rng.standard_normal(10)
        c = solve(x, D, p0)
        assert check_kkt(x, D, c.alpha, p0).passed


def test_active_cap():
    rng = np.random.default_rng(3)
    D = random_dictionary(rng, 10, 20)
    x = rng.standard_normal(10)
    with pytest.raises(ActiveSetLimitError, match="2"):
        solve(x, D, ElasticNetParams(0.001, 0.01, max_active=2))
    assert ElasticNetParams().active_cap(10, 20) == 80
    assert ElasticNetParams().active_cap(3, 20) == 30


def test_rejects_bad_input():
    D = np.eye(3)
    with pytest.raises(ValueError):
        solve(np.array([1.0, np.nan, 0.0]), D, P)
    with pytest.raises(ValueError):
        solve(np.ones(4), D, P)
    with pytest.raises(ValueError):
        as_dictionary(2 * np.eye(3))
    with pytest.raises(ValueError):
        ElasticNetParams(0.0, 0.0)
    with pytest.raises(ValueError):
        ElasticNetParams(-1.0, 0.0)
    with pytest.raises(ValueError):
        ElasticNetParams(0.1, 0.0, tol=0)


def test_batch_matches_solve(rng):
    D = random_dictionary(rng, 10, 20)
    X = rng.standard_normal((10, 200))
    X[:, 7] = X[:, 3]
    codes = batch_solve(X, D, P)
    for i in (0, 3, 7, 199):
        np.testing.assert_allclose(codes[i].alpha, solve(X[:, i], D, P).alpha, atol=1e-12, rtol=0)
    np.testing.assert_array_equal(codes[3].alpha, codes[7].alpha)
    one = batch_solve(X[:, :1], D, P)
    np.testing.assert_array_equal(one[0].alpha, solve(X[:, 0], D, P).alpha)


def test_batch_thread_independent(rng):
    D = random_dictionary(rng, 10, 20)
    X = rng.standard_normal((10, 64))
    a = batch_solve(X, D, P, n_jobs=1)
    b = batch_solve(X, D, P, n_jobs=4)
    for u, v in zip(a, b):
        assert u.alpha.tobytes() == v.alpha.tobytes()


def test_code_is_immutable(rng):
    c = solve(rng.standard_normal(4), random_dictionary(rng, 4, 6), P)
    with pytest.raises(ValueError):
        c.alpha[0] = 1.0


def test_lipschitz_in_signal():
    rng = np.random.default_rng(8)
    D = random_dictionary(rng, 10, 20)
    consts = []
    for lam2 in (0.01, 0.1, 1.0):
        par = ElasticNetParams(0.15, lam2)
        worst = 0.0
        for _ in range(1000):
            x = rng.standard_normal(10)
            d = rng.standard_normal(10)
            d *= 1e-4 / np.linalg.norm(d)
            diff = solve(x + d, D, par).alpha - solve(x, D, par).alpha
            worst = max(worst, np.linalg.norm(diff) / 1e-4)
        consts.append(worst)
    # the code map is Lipschitz with constant at most 1/lambda2 in the worst case
    assert consts[0] <= 1 / 0.01
    assert consts[0] >= consts[1] >= consts[2]


def test_speed(rng):
    D = random_dictionary(rng, 10, 20)
    X = rng.standard_normal((10, 1000))
    solve(X[:, 0], D, P)
    t = time.perf_counter()
    batch_solve(X, D, P)
    assert time.perf_counter() - t < 2.0


@given(
    seed=st.integers(0, 2**32 - 1),
    m=st.integers(1, 12),
    p=st.integers(1, 25),
    lam1=st.floats(0.001, 1.0),
    lam2=st.floats(0.0, 1.0),
)
def test_kkt_property(seed, m, p, lam1, lam2):
    rng = np.random.default_rng(seed)
    D = random_dictionary(rng, m, p)
    x = rng.standard_normal(m)
    # with lambda2 > 0 up to p atoms may be active even when m is small
    par = ElasticNetParams(lam1, lam2, max_active=p)
    try:
        c = solve(x, D, par)
    except SingularGramError:
        assert lam2 == 0
        return
    assert check_kkt(x, D, c.alpha, par).passed
    if lam2 >= 0.01:
        # the reference is only unique and fast to converge with real ridge weight
        np.testing.assert_allclose(c.alpha, solve_cd(x, D, lam1, lam2), atol=1e-6)
