import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from taskdict.elastic_net import ElasticNetParams
from taskdict.metrics import mse
from taskdict.model import OneVsAll, TrainedModel
from taskdict.tasks import (
    TaskSpec,
    classify_bilinear,
    classify_binary,
    classify_multiclass,
    cs_reconstruct,
    make_baseline_z,
    overcomplete_dct,
    predict,
    predict_regression,
)

P = ElasticNetParams(0.05, 0.01)


def unit_dict(rng, m, p):
    D = rng.standard_normal((m, p))
    return D / np.linalg.norm(D, axis=0)


def test_taskspec_shapes_and_validation():
    assert TaskSpec("regression", m=5, p=7, q=3).w_shape == (3, 7)
    assert TaskSpec("binary_linear", m=5, p=7).w_shape == (7,)
    assert TaskSpec("binary_bilinear", m=5, p=7).w_shape == (5, 7)
    cs = TaskSpec("compressed_sensing", m=5, p=7, r=2)
    assert cs.q == 5 and cs.w_shape == (5, 7) and cs.code_dim == 2 and cs.has_transform
    with pytest.raises(ValueError):
        TaskSpec("compressed_sensing", m=5, p=7)
    with pytest.raises(ValueError):
        TaskSpec("nope", m=5, p=7)
    np.testing.assert_array_equal(TaskSpec("multiclass_regression", m=2, p=2, q=3).target(2), [0, 1, 0])
    with pytest.raises(ValueError):
        TaskSpec("multiclass_regression", m=2, p=2, q=3).target(4)


def test_regression_head():
    rng = np.random.default_rng(0)
    task = TaskSpec("regression", m=4, p=6, q=2)
    D = unit_dict(rng, 4, 6)
    W = rng.standard_normal((2, 6))
    model = TrainedModel(task, D, W, P)
    assert np.all(predict_regression(model, np.zeros(4)) == 0)
    x = rng.standard_normal(4)
    a = model.encode(x).alpha
    np.testing.assert_allclose(predict_regression(model, x), W @ a)
    # linear in W for a fixed code
    m2 = model.copy(w=2 * W + 1)
    np.testing.assert_allclose(predict_regression(m2, x), 2 * W @ a + np.sum(a))


def test_regression_single_atom_fixture():
    task = TaskSpec("regression", m=3, p=3, q=3)
    T = np.diag([2.0, 3.0, 4.0])
    model = TrainedModel(task, np.eye(3), T, P)
    x = np.array([0.0, 1.0, 0.0])
    c = (1.0 - 0.05) / 1.01
    np.testing.assert_allclose(predict_regression(model, x), T[:, 1] * c)


def test_binary_heads():
    rng = np.random.default_rng(1)
    task = TaskSpec("binary_linear", m=4, p=6)
    D = unit_dict(rng, 4, 6)
    model = TrainedModel(task, D, np.zeros(6), P)
    assert classify_binary(model, rng.standard_normal(4)) == (1, 0.0)
    model.w = rng.standard_normal(6)
    neg = model.copy(w=-model.w)
    for _ in range(20):
        x = rng.standard_normal(4)
        lab, s = classify_binary(model, x)
        lab2, s2 = classify_binary(neg, x)
        assert s2 == -s
        if s != 0:
            assert lab2 == -lab


def test_bilinear_head():
    rng = np.random.default_rng(2)
    m, p = 4, 6
    D = unit_dict(rng, m, p)
    w = rng.standard_normal(p)
    bil = TrainedModel(TaskSpec("binary_bilinear", m=m, p=p), D, np.zeros((m, p)), P)
    assert classify_bilinear(bil, rng.standard_normal(m))[0] == 1
    # with x = all ones and W rows w/m the bilinear score equals the linear one
    lin = TrainedModel(TaskSpec("binary_linear", m=m, p=p), D, w, P)
    bil.w = np.tile(w / m, (m, 1))
    x = np.ones(m)
    assert classify_bilinear(bil, x)[1] == pytest.approx(classify_binary(lin, x)[1], rel=1e-12)
    neg = bil.copy(w=-bil.w)
    y = rng.standard_normal(m)
    assert classify_bilinear(neg, y)[1] == -classify_bilinear(bil, y)[1]


def test_multiclass_heads():
    rng = np.random.default_rng(3)
    D = unit_dict(rng, 4, 6)
    soft = TrainedModel(TaskSpec("multiclass_softmax", m=4, p=6, q=1), D, rng.standard_normal((1, 6)), P)
    assert classify_multiclass(soft, rng.standard_normal(4))[0] == 1
    task = TaskSpec("multiclass_softmax", m=4, p=6, q=3)
    W = rng.standard_normal((3, 6))
    model = TrainedModel(task, D, W, P)
    x = rng.standard_normal(4)
    lab, scores = classify_multiclass(model, x)
    assert lab == int(np.argmax(scores)) + 1
    # adding the same row to every class shifts all scores equally
    shifted = model.copy(w=W + rng.standard_normal(6))
    assert classify_multiclass(shifted, x)[0] == lab
    tie = model.copy(w=np.zeros((3, 6)))
    assert classify_multiclass(tie, x)[0] == 1
    with pytest.raises(ValueError):
        classify_multiclass(OneVsAll([]), x)
    with pytest.raises(ValueError):
        classify_multiclass(TrainedModel(TaskSpec("regression", m=4, p=6), D, np.zeros((1, 6)), P), x)


def test_one_vs_all_monotone_invariance():
    rng = np.random.default_rng(4)
    members = [
        TrainedModel(TaskSpec("binary_linear", m=4, p=5), unit_dict(rng, 4, 5), rng.standard_normal(5), P)
        for _ in range(3)
    ]
    ova = OneVsAll(members)
    assert ova.q == 3
    for _ in range(20):
        x = rng.standard_normal(4)
        lab, scores = predict(ova, x)
        assert lab == int(np.argmax(np.exp(3 * scores) + 1)) + 1


def test_multiclass_regression_uses_argmax():
    task = TaskSpec("multiclass_regression", m=3, p=3, q=3)
    model = TrainedModel(task, np.eye(3), np.eye(3)[[2, 0, 1]], P)
    assert predict(model, np.array([1.0, 0.0, 0.0]))[0] == 2


def test_cs_reconstruct():
    rng = np.random.default_rng(5)
    task = TaskSpec("compressed_sensing", m=6, p=8, r=3)
    D = unit_dict(rng, 3, 8)
    W = rng.standard_normal((6, 8))
    model = TrainedModel(task, D, W, P, z=np.zeros((3, 6)))
    assert np.all(cs_reconstruct(model, rng.standard_normal(6)) == 0)
    Z = rng.standard_normal((3, 6))
    model.z = Z
    perm = rng.permutation(8)
    model2 = model.copy(dictionary=D[:, perm], w=W[:, perm])
    X = rng.standard_normal((6, 30))
    e1 = mse(np.column_stack([cs_reconstruct(model, X[:, i]) for i in range(30)]), X)
    e2 = mse(np.column_stack([cs_reconstruct(model2, X[:, i]) for i in range(30)]), X)
    assert e1 == pytest.approx(e2, rel=1e-10)
    with pytest.raises(ValueError):
        cs_reconstruct(TrainedModel(TaskSpec("regression", m=3, p=8, q=6), D, W, P), np.zeros(3))


def test_cs_identity_pipeline_matches_coder():
    rng = np.random.default_rng(6)
    m, p = 6, 10
    D = unit_dict(rng, m, p)
    task = TaskSpec("compressed_sensing", m=m, p=p, r=m)
    small = ElasticNetParams(1e-3, 1e-3)
    model = TrainedModel(task, D, D, small, z=np.eye(m))
    for _ in range(10):
        x = rng.standard_normal(m)
        code = model.encode(x)
        est = cs_reconstruct(model, x)
        assert mse(est, x) <= mse(D @ code.alpha, x) + 1e-15


def test_baseline_sensing_matrices():
    np.testing.assert_array_equal(make_baseline_z("identity", 4, 4), np.eye(4))
    with pytest.raises(ValueError):
        make_baseline_z("identity", 3, 4)
    rng = np.random.default_rng(7)
    data = rng.standard_normal((8, 500)) * np.arange(1, 9)[:, None]
    Zp = make_baseline_z("pca", 3, 8, data=data)
    np.testing.assert_allclose(Zp @ Zp.T, np.eye(3), atol=1e-10)
    # the leading direction follows the highest-variance coordinate
    assert np.argmax(np.abs(Zp[0])) == 7
    with pytest.raises(ValueError):
        make_baseline_z("pca", 9, 8, data=data)
    with pytest.raises(ValueError):
        make_baseline_z("pca", 3, 8)
    with pytest.raises(ValueError):
        make_baseline_z("dct", 3, 8)


def test_gaussian_sensing_statistics():
    m = 64
    Z = make_baseline_z("random_gaussian", 15625, m, rng=0)  # 10^6 entries
    assert abs(Z.mean()) < 0.01 / np.sqrt(m)
    assert Z.var() == pytest.approx(1.0 / m, rel=0.01)


def test_overcomplete_dct():
    B = overcomplete_dct(8, 100)
    assert B.shape == (64, 100)
    np.testing.assert_allclose(np.linalg.norm(B, axis=0), 1.0)
    # constant atom first, all others orthogonal to constants
    np.testing.assert_allclose(B[:, 0], 1 / 8)
    np.testing.assert_allclose(B[:, 1:].sum(axis=0), 0.0, atol=1e-12)
    assert np.linalg.matrix_rank(B) == 64


@given(seed=st.integers(0, 2**31))
def test_prediction_deterministic(seed):
    rng = np.random.default_rng(seed)
    task = TaskSpec("multiclass_softmax", m=4, p=6, q=3)
    model = TrainedModel(task, unit_dict(rng, 4, 6), rng.standard_normal((3, 6)), P)
    x = rng.standard_normal(4)
    a, b = predict(model, x), predict(model, x.copy())
    assert a[0] == b[0] and np.array_equal(a[1], b[1])
