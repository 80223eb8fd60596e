import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlproj.data import gen_linear
from rlproj.errors import BatchSizeMismatch, ShapeError
from rlproj.loss import (
    cross_entropy,
    mixup_pairs,
    mse,
    probe_index,
    rlp_batch,
    rlp_metric,
    rlp_mixup_batch,
)
from rlproj.model import Layer, ModelParams, forward
from rlproj.rng import stream

from oracles import central_diff_matrix


def test_mse_zero_at_truth():
    Y = np.random.default_rng(0).random((4, 2))
    out = mse(Y.copy(), Y)
    assert out.value == 0.0
    assert np.array_equal(out.dL_dH, np.zeros_like(Y))


def test_mse_single_cell():
    out = mse(np.array([[0.0]]), np.array([[2.0]]))
    assert out.value == 4.0
    assert out.dL_dH.tolist() == [[-4.0]]


def test_mse_matches_scalar_loop():
    rng = np.random.default_rng(1)
    H = rng.standard_normal((5, 2))
    Y = rng.standard_normal((5, 2))
    want = 0.0
    for i in range(5):
        row = 0.0
        for j in range(2):
            row += (H[i, j] - Y[i, j]) ** 2
        want += row
    want /= 5
    assert abs(mse(H, Y).value - want) < 1e-12


def test_mse_shape_error():
    with pytest.raises(ShapeError):
        mse(np.zeros((2, 1)), np.zeros((3, 1)))


def test_rlp_zero_at_truth_exactly():
    rng = np.random.default_rng(2)
    Xb = rng.standard_normal((6, 3))
    Yb = rng.standard_normal((6, 1))
    out = rlp_batch(Xb, Yb, Yb.copy(), rng.standard_normal(3))
    assert out.value == 0.0
    assert np.array_equal(out.dL_dH, np.zeros((6, 1)))


def test_rlp_hand_computed_case():
    out = rlp_batch(
        np.array([[1.0], [2.0]]),
        np.array([[1.0], [2.0]]),
        np.array([[0.0], [0.0]]),
        np.array([3.0]),
    )
    assert abs(out.value - 9.0) < 1e-10
    assert np.allclose(out.dL_dH, [[-3.6], [-7.2]], atol=1e-10)


def test_rlp_sensitivity_matches_finite_differences():
    rng = np.random.default_rng(3)
    for c in (1, 3):
        Xb = rng.standard_normal((7, 4))
        Yb = rng.standard_normal((7, c))
        Hb = rng.standard_normal((7, c))
        probe = rng.standard_normal(4)
        analytic = rlp_batch(Xb, Yb, Hb, probe).dL_dH
        numeric = central_diff_matrix(lambda m: rlp_batch(Xb, Yb, m, probe).value, Hb)
        rel = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
        assert rel.max() < 1e-6


def test_rlp_multi_output_is_columnwise_sum():
    rng = np.random.default_rng(4)
    Xb = rng.standard_normal((6, 3))
    Yb = rng.standard_normal((6, 2))
    Hb = rng.standard_normal((6, 2))
    probe = rng.standard_normal(3)
    whole = rlp_batch(Xb, Yb, Hb, probe).value
    cols = sum(
        rlp_batch(Xb, Yb[:, [j]], Hb[:, [j]], probe).value for j in range(2)
    )
    assert abs(whole - cols) < 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), s=st.floats(-3.0, 3.0))
def test_rlp_probe_scaling_quadratic(seed, s):
    rng = np.random.default_rng(seed)
    Xb = rng.standard_normal((6, 3))
    Yb = rng.standard_normal((6, 1))
    Hb = rng.standard_normal((6, 1))
    probe = rng.standard_normal(3)
    base = rlp_batch(Xb, Yb, Hb, probe).value
    scaled = rlp_batch(Xb, Yb, Hb, s * probe).value
    assert abs(scaled - s * s * base) <= 1e-8 * max(1.0, abs(base))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_rlp_nonnegative_and_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    Xb = rng.standard_normal((7, 3))
    Yb = rng.standard_normal((7, 1))
    Hb = rng.standard_normal((7, 1))
    probe = rng.standard_normal(3)
    v = rlp_batch(Xb, Yb, Hb, probe).value
    assert v >= 0.0
    perm = rng.permutation(7)
    v2 = rlp_batch(Xb[perm], Yb[perm], Hb[perm], probe).value
    assert abs(v - v2) <= 1e-10 * max(1.0, abs(v))


def test_rlp_nonfinite_rejected():
    Xb = np.array([[1.0], [2.0]])
    with pytest.raises(Exception):
        rlp_batch(Xb, np.array([[np.inf], [0.0]]), np.zeros((2, 1)), np.array([1.0]))


def test_mixup_pairs_contract():
    rng = np.random.default_rng(5)
    Xa, Xb = rng.random((4, 3)), rng.random((4, 3))
    Ya, Yb = rng.random((4, 1)), rng.random((4, 1))
    x1, y1 = mixup_pairs(Xa, Ya, Xb, Yb, 1.0)
    assert np.array_equal(x1, Xa) and np.array_equal(y1, Ya)
    x0, y0 = mixup_pairs(Xa, Ya, Xb, Yb, 0.0)
    assert np.array_equal(x0, Xb) and np.array_equal(y0, Yb)
    xm, ym = mixup_pairs(Xa, Ya, Xb, Yb, 0.5)
    assert np.allclose(xm, (Xa + Xb) / 2)
    lo = np.minimum(Xa, Xb) - 1e-12
    hi = np.maximum(Xa, Xb) + 1e-12
    for lam in (0.25, 0.75):
        xm, _ = mixup_pairs(Xa, Ya, Xb, Yb, lam)
        assert np.all(xm >= lo) and np.all(xm <= hi)


def _tiny_net(d, c, seed=0):
    rng = np.random.default_rng(seed)
    return ModelParams([Layer(rng.standard_normal((c, d)) * 0.3, np.zeros(c), "none")])


def test_rlp_mixup_endpoints_match_sum_form():
    rng = np.random.default_rng(6)
    net = _tiny_net(3, 1)
    Xa, Xb = rng.random((5, 3)), rng.random((5, 3))
    Ya, Yb = rng.random((5, 1)), rng.random((5, 1))
    out1, _ = rlp_mixup_batch(net, Xa, Ya, Xb, Yb, 1.0)
    H, _ = forward(net, Xa)
    direct = rlp_batch(Xa, Ya, H, Xa.sum(axis=0)).value
    assert abs(out1.value - direct) < 1e-10
    out0, _ = rlp_mixup_batch(net, Xa, Ya, Xb, Yb, 0.0)
    H0, _ = forward(net, Xb)
    direct0 = rlp_batch(Xb, Yb, H0, Xb.sum(axis=0)).value
    assert abs(out0.value - direct0) < 1e-10


def test_rlp_mixup_zero_when_outputs_equal_mixed_labels():
    rng = np.random.default_rng(7)
    net = _tiny_net(3, 1, seed=1)
    Xa, Xb = rng.random((5, 3)), rng.random((5, 3))
    lam = 0.3
    Xm = lam * Xa + (1 - lam) * Xb
    Hm, _ = forward(net, Xm)
    # choose labels so the mixed labels equal the model outputs exactly
    Ya = Hm.copy()
    Yb = Hm.copy()
    out, _ = rlp_mixup_batch(net, Xa, Ya, Xb, Yb, lam)
    assert out.value < 1e-24


def test_rlp_mixup_size_mismatch_is_skip_signal():
    net = _tiny_net(2, 1)
    with pytest.raises(BatchSizeMismatch):
        rlp_mixup_batch(net, np.zeros((3, 2)), np.zeros((3, 1)), np.zeros((4, 2)), np.zeros((4, 1)), 0.5)


def test_rlp_mixup_sensitivity_matches_finite_differences():
    # sensitivity is with respect to the outputs on the mixed batch
    rng = np.random.default_rng(8)
    Xm = rng.random((6, 3))
    Ym = rng.random((6, 1))
    Hm = rng.random((6, 1))
    probe = Xm.sum(axis=0)
    analytic = rlp_batch(Xm, Ym, Hm, probe).dL_dH
    numeric = central_diff_matrix(lambda m: rlp_batch(Xm, Ym, m, probe).value, Hm)
    rel = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(numeric))
    assert rel.max() < 1e-6


def test_probe_index_distinct_when_possible():
    prng = stream("probe", 0)
    batch = np.array([0, 1, 2])
    for _ in range(50):
        assert probe_index(prng, 10, batch) not in {0, 1, 2}
    # overlap allowed when the batch exhausts the dataset
    assert probe_index(prng, 3, batch) in {0, 1, 2}


def test_rlp_metric_perfect_model():
    ds = gen_linear(300, seed=0)
    net = ModelParams([Layer(np.array([[0.5, 1.5, 2.5, 3.5, 4.5]]), np.zeros(1), "none")])
    assert rlp_metric(net, ds, M=7, K=50, seed=1) < 1e-12


def test_rlp_metric_deterministic():
    ds = gen_linear(200, seed=1)
    net = _tiny_net(5, 1, seed=2)
    a = rlp_metric(net, ds, M=7, K=20, seed=3)
    b = rlp_metric(net, ds, M=7, K=20, seed=3)
    assert a == b


def test_rlp_metric_quadratic_in_coefficient_error():
    # 1-d data, linear model off by delta: metric should scale as delta^2
    rng = np.random.default_rng(9)
    x = rng.random((400, 1)) + 0.5
    from rlproj.data import Dataset

    ds = Dataset(x, 2.0 * x, source="t")
    vals = []
    for delta in (0.01, 0.02, 0.04):
        net = ModelParams([Layer(np.array([[2.0 + delta]]), np.zeros(1), "none")])
        vals.append(rlp_metric(net, ds, M=3, K=40, seed=5))
    assert vals[1] / vals[0] == pytest.approx(4.0, rel=1e-6)
    assert vals[2] / vals[1] == pytest.approx(4.0, rel=1e-6)


def test_cross_entropy_against_manual():
    H = np.array([[2.0, -1.0], [0.5, 0.5]])
    Y = np.array([[1.0, 0.0], [0.0, 1.0]])
    out = cross_entropy(H, Y)
    p1 = np.exp(2.0) / (np.exp(2.0) + np.exp(-1.0))
    want = (-np.log(p1) - np.log(0.5)) / 2
    assert abs(out.value - want) < 1e-12
    numeric = central_diff_matrix(lambda m: cross_entropy(m, Y).value, H)
    assert np.max(np.abs(out.dL_dH - numeric)) < 1e-8
