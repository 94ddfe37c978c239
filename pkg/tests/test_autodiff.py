import numpy as np
import pytest

from topnets import autodiff as ad


def _grads(fn, *vals):
    ts = [ad.Tensor(np.asarray(v, dtype=float), requires_grad=True) for v in vals]
    with ad.Tape() as tape:
        out = fn(*ts)
        tape.backward(out)
    return out, [t.grad for t in ts]


def test_product_and_relu():
    out, (ga, gb) = _grads(lambda a, b: a * b, 2.0, 3.0)
    assert float(out.data) == 6.0 and float(ga) == 3.0 and float(gb) == 2.0
    out, (gx,) = _grads(ad.relu, -1.0)
    assert float(out.data) == 0.0 and float(gx) == 0.0


@pytest.mark.parametrize("op", ["tanh", "sigmoid", "softplus", "square", "tabs"])
def test_unary_ops_match_finite_differences(op, rng):
    f = getattr(ad, op)
    x = rng.standard_normal(6) + 0.1
    _, (g,) = _grads(lambda t: ad.tsum(f(t)), x)
    h = 1e-6
    num = np.array([(np.sum(f(ad.Tensor(x + h * e)).data) - np.sum(f(ad.Tensor(x - h * e)).data)) / (2 * h)
                    for e in np.eye(6)])
    assert np.allclose(g, num, atol=1e-6)


def test_segment_ops(rng):
    a = rng.standard_normal((5, 2))
    seg = np.array([0, 0, 2, 2, 2])
    s = ad.segment_sum(ad.Tensor(a), seg, 3).data
    assert np.allclose(s[1], 0) and np.allclose(s[0], a[:2].sum(0))
    mx = ad.segment_max(ad.Tensor(a), seg, 3).data
    assert np.allclose(mx[2], a[2:].max(0))
    m = ad.segment_mean(ad.Tensor(a), seg, 3).data
    assert np.allclose(m[2], a[2:].mean(0))


def test_mlp_grad_check():
    store = ad.ParamStore(0)
    mlp = ad.MLP(store, "m", [3, 8, 2], act="tanh")
    x = np.random.default_rng(1).standard_normal((10, 3))
    rep = ad.grad_check(lambda: ad.tsum(ad.square(mlp(x))), store, h=1e-5, tol=1e-4)
    assert rep.passed and not rep["skipped"]


def test_deepset_empty_and_grad_check():
    store = ad.ParamStore(2)
    ds = ad.DeepSet(store, "d", [2, 6], [6, 3], act="tanh")
    empty = ds(np.zeros((0, 2)), np.zeros(0, dtype=np.int64), 1).data
    outer_zero = ds.outer(ad.Tensor(np.zeros((1, 6)))).data
    assert np.allclose(empty, outer_zero)
    pts = np.array([[0.1, 0.5], [0.2, 0.9], [0.4, 0.6]])
    rep = ad.grad_check(lambda: ad.tsum(ad.square(ds(pts, np.zeros(3, dtype=np.int64), 1))), store)
    assert rep.passed


def test_grad_check_skips_ties():
    store = ad.ParamStore(0)
    w = store.param("w", (1,))
    rep = ad.grad_check(lambda: ad.tsum(w), store, tie_margin=lambda: 0.0)
    assert rep["skipped"] and rep.passed


def test_sgd_step():
    store = ad.ParamStore(0)
    w = store.param("w", (1,), init="zeros")
    w.data[:] = 1.0
    w.grad = np.array([2.0])
    ad.sgd_step(store, 0.1)
    assert w.data[0] == pytest.approx(0.8)
    ad.sgd_step(store, 0.1)
    assert w.data[0] == pytest.approx(0.8)


def test_adam_first_step():
    store = ad.ParamStore(0)
    w = store.param("w", (2,), init="zeros")
    w.grad = np.array([0.5, -3.0])
    ad.adam_step(store, 0.01)
    # bias-corrected first step is lr * g / (|g| + eps)
    assert np.allclose(w.data, -0.01 * np.array([0.5, -3.0]) / (np.abs([0.5, -3.0]) + 1e-8))


def test_cross_entropy_gradient(rng):
    logits = rng.standard_normal((4, 3))
    y = np.array([0, 2, 1, 2])
    _, (g,) = _grads(lambda t: ad.cross_entropy(t, y), logits)
    p = np.exp(logits) / np.exp(logits).sum(1, keepdims=True)
    p[np.arange(4), y] -= 1
    assert np.allclose(g, p / 4)


def test_checkpoint_round_trip(tmp_path):
    store = ad.ParamStore(5)
    ad.MLP(store, "m", [3, 4, 2])
    ad.save_checkpoint(store, tmp_path / "c.txt", meta='{"a": 1}')
    params, meta = ad.load_checkpoint(tmp_path / "c.txt")
    assert meta == '{"a": 1}'
    for k, p in store:
        assert np.array_equal(params[k], p.data)
    (tmp_path / "bad.txt").write_text("nope\n")
    with pytest.raises(ValueError, match="header"):
        ad.load_checkpoint(tmp_path / "bad.txt")


def test_param_shape_conflict():
    store = ad.ParamStore(0)
    store.param("w", (2, 2))
    with pytest.raises(ValueError):
        store.param("w", (3, 2))
