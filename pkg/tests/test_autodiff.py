import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overlap_lab import autodiff as ad
from overlap_lab.exceptions import NumericError, ShapeError

from oracles import fd_grad

RNG = np.random.default_rng(20240811)


def scalar_through(op, x, **kw):
    """Run op on x inside a tape, reduce to a scalar, return (value, grad)."""
    t = ad.Tensor(x, requires_grad=True)
    with ad.Tape() as tape:
        y = op(t, **kw)
        out = ad.tensor_sum(ad.mul(y, y))  # sum of squares, exercises chain
    grads = tape.backward(out)
    return out.item(), grads[id(t)]


UNARY_OPS = [
    (ad.neg, 0.0),
    (ad.square, 0.0),
    (ad.exp, 0.0),
    (ad.sigmoid, 0.0),
    (ad.silu, 0.0),
    (ad.softplus, 0.0),
    (ad.sqrt, 2.5),   # shift into positive domain
    (ad.log, 2.5),
]


@pytest.mark.parametrize("op,shift", UNARY_OPS, ids=lambda o: getattr(o, "__name__", str(o)))
def test_unary_ops_match_finite_differences(op, shift):
    x = RNG.uniform(-2, 2, size=(3, 4)) + shift

    def f(a):
        y = op(ad.Tensor(a)).array
        return float((y * y).sum())

    _, got = scalar_through(op, x)
    want = fd_grad(f, x)
    assert np.max(np.abs(got - want)) < 1e-5


@pytest.mark.parametrize("op", [ad.add, ad.sub, ad.mul, ad.div])
def test_binary_ops_match_finite_differences(op):
    a = RNG.uniform(-2, 2, size=(2, 3))
    b = RNG.uniform(-2, 2, size=(2, 3)) + 3.0  # keep div denominators away from 0

    ta = ad.Tensor(a, requires_grad=True)
    tb = ad.Tensor(b, requires_grad=True)
    with ad.Tape() as tape:
        out = ad.tensor_sum(ad.square(op(ta, tb)))
    grads = tape.backward(out)

    fa = fd_grad(lambda x: float((op(ad.Tensor(x), ad.Tensor(b)).array ** 2).sum()), a)
    fb = fd_grad(lambda x: float((op(ad.Tensor(a), ad.Tensor(x)).array ** 2).sum()), b)
    assert np.max(np.abs(grads[id(ta)] - fa)) < 1e-5
    assert np.max(np.abs(grads[id(tb)] - fb)) < 1e-5


def test_broadcast_backward_shapes_and_values():
    a = RNG.uniform(-2, 2, size=(4, 3))
    b = RNG.uniform(-2, 2, size=(3,))
    ta = ad.Tensor(a, requires_grad=True)
    tb = ad.Tensor(b, requires_grad=True)
    with ad.Tape() as tape:
        out = ad.tensor_sum(ad.square(ta + tb))
    grads = tape.backward(out)
    assert grads[id(ta)].shape == (4, 3)
    assert grads[id(tb)].shape == (3,)
    fb = fd_grad(lambda x: float(((a + x) ** 2).sum()), b.copy())
    assert np.max(np.abs(grads[id(tb)] - fb)) < 1e-5


def test_shared_subexpression_accumulates():
    # d(x + x)/dx = 2
    x = ad.Tensor(3.0, requires_grad=True)
    with ad.Tape() as tape:
        y = x + x
    grads = tape.backward(y)
    assert grads[id(x)] == pytest.approx(2.0)
    assert x.grad[0] == pytest.approx(2.0)


def test_backward_writes_and_accumulates_leaf_grad():
    x = ad.Tensor([1.0, 2.0], requires_grad=True)
    with ad.Tape() as tape:
        out = ad.tensor_sum(ad.square(x))
    tape.backward(out)
    first = x.grad.copy()
    with ad.Tape() as tape2:
        out2 = ad.tensor_sum(ad.square(x))
    tape2.backward(out2)
    assert np.allclose(x.grad, 2 * first)
    x.zero_grad()
    assert x.grad is None


def test_two_backward_passes_same_tape():
    # gradient of an intermediate and of the final output, one tape
    x = ad.Tensor([1.0, -2.0, 0.5], requires_grad=True)
    with ad.Tape() as tape:
        mid = ad.tensor_sum(ad.square(x))
        out = ad.mul(mid, 3.0)
    g_mid = tape.backward(mid, write_grad=False)
    g_out = tape.backward(out, write_grad=False)
    assert np.allclose(g_mid[id(x)], 2 * x.array)
    assert np.allclose(g_out[id(x)], 6 * x.array)


def test_sum_axis_and_mean():
    x = RNG.uniform(-1, 1, size=(3, 5))
    t = ad.Tensor(x, requires_grad=True)
    with ad.Tape() as tape:
        out = ad.tensor_sum(ad.square(ad.mean(t, axis=1)))
    grads = tape.backward(out)
    want = fd_grad(lambda a: float((a.mean(axis=1) ** 2).sum()), x.copy())
    assert np.max(np.abs(grads[id(t)] - want)) < 1e-5


def test_concat_reshape_transpose_roundtrip_grads():
    a = RNG.uniform(-1, 1, size=(2, 3))
    b = RNG.uniform(-1, 1, size=(1, 3))
    ta = ad.Tensor(a, requires_grad=True)
    tb = ad.Tensor(b, requires_grad=True)
    with ad.Tape() as tape:
        cat = ad.concat([ta, tb], axis=0)            # (3, 3)
        flat = ad.reshape(cat, (9,))
        back = ad.reshape(flat, (3, 3))
        out = ad.tensor_sum(ad.square(ad.transpose(back)))
    grads = tape.backward(out)
    assert np.allclose(grads[id(ta)], 2 * a)
    assert np.allclose(grads[id(tb)], 2 * b)


# -- matmul ------------------------------------------------------------

def test_matmul_identity():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    out = ad.matmul(ad.Tensor(np.eye(2)), ad.Tensor(a))
    assert np.allclose(out.array, a)


def test_matmul_example():
    out = ad.matmul(ad.Tensor([[1.0, 2.0], [3.0, 4.0]]), ad.Tensor([[1.0], [1.0]]))
    assert np.allclose(out.array, [[3.0], [7.0]])


def test_matmul_gradient_vs_fd():
    a = RNG.uniform(-2, 2, size=(3, 4))
    b = RNG.uniform(-2, 2, size=(4, 2))
    ta = ad.Tensor(a, requires_grad=True)
    tb = ad.Tensor(b, requires_grad=True)
    with ad.Tape() as tape:
        out = ad.tensor_sum(ad.square(ad.matmul(ta, tb)))
    grads = tape.backward(out)
    fa = fd_grad(lambda x: float(((x @ b) ** 2).sum()), a.copy())
    fb = fd_grad(lambda x: float(((a @ x) ** 2).sum()), b.copy())
    assert np.max(np.abs(grads[id(ta)] - fa)) < 1e-6
    assert np.max(np.abs(grads[id(tb)] - fb)) < 1e-6


def test_matmul_shape_error():
    with pytest.raises(ShapeError):
        ad.matmul(ad.Tensor(np.ones((2, 3))), ad.Tensor(np.ones((2, 3))))


# -- SVD ---------------------------------------------------------------

def test_svd_diagonal():
    _, s, _ = ad.svd(ad.Tensor(np.diag([3.0, 1.0])))
    assert np.allclose(s.array, [3.0, 1.0])


def test_svd_rank_one():
    m = np.outer([1.0, 2.0, 2.0], [0.5, -0.5])
    _, s, _ = ad.svd(ad.Tensor(m))
    assert np.sum(s.array > 1e-12) == 1


def test_svd_reconstruction_random():
    for _ in range(5):
        m = RNG.normal(size=(4, 4))
        u, s, v = ad.svd(ad.Tensor(m))
        rec = u.array @ np.diag(s.array) @ v.array.T
        assert np.max(np.abs(rec - m)) < 1e-10


def test_svd_rectangular_both_orientations():
    m = RNG.normal(size=(6, 3))
    u, s, v = ad.svd(ad.Tensor(m))
    assert u.shape == (6, 3) and v.shape == (3, 3)
    assert np.max(np.abs(u.array @ np.diag(s.array) @ v.array.T - m)) < 1e-10
    _, s_t, _ = ad.svd(ad.Tensor(m.T))
    assert np.allclose(np.sort(s.array), np.sort(s_t.array), atol=1e-12)


def test_svd_values_sorted_nonnegative():
    m = RNG.normal(size=(5, 5))
    _, s, _ = ad.svd(ad.Tensor(m))
    assert np.all(s.array >= 0)
    assert np.all(np.diff(s.array) <= 1e-12)


def test_svd_matches_lapack_values():
    m = RNG.normal(size=(8, 5))
    _, s, _ = ad.svd(ad.Tensor(m))
    assert np.allclose(s.array, np.linalg.svd(m, compute_uv=False), atol=1e-10)


def test_svd_singular_value_gradient_vs_fd():
    # sum of singular values of a well-separated-spectrum matrix
    m = np.diag([3.0, 2.0, 1.0]) + 0.1 * RNG.normal(size=(3, 3))
    t = ad.Tensor(m, requires_grad=True)
    with ad.Tape() as tape:
        _, s, _ = ad.svd(t)
        out = ad.tensor_sum(s)
    grads = tape.backward(out)
    want = fd_grad(lambda x: float(np.linalg.svd(x, compute_uv=False).sum()), m.copy())
    assert np.max(np.abs(grads[id(t)] - want)) < 1e-5


def test_svd_rejects_nonfinite():
    with pytest.raises(NumericError):
        ad.svd(ad.Tensor([[np.nan, 0.0], [0.0, 1.0]]))


# -- property tests ----------------------------------------------------

@given(st.lists(st.floats(-2, 2), min_size=1, max_size=8))
@settings(max_examples=50, deadline=None)
def test_sum_grad_is_ones(xs):
    t = ad.Tensor(np.array(xs), requires_grad=True)
    with ad.Tape() as tape:
        out = ad.tensor_sum(t)
    grads = tape.backward(out)
    assert np.allclose(grads[id(t)], np.ones(len(xs)))


@given(st.integers(2, 6), st.integers(0, 2 ** 31 - 1))
@settings(max_examples=30, deadline=None)
def test_svd_reconstruction_property(n, seed):
    m = np.random.default_rng(seed).normal(size=(n, n))
    u, s, v = ad.svd(ad.Tensor(m))
    assert np.max(np.abs(u.array @ np.diag(s.array) @ v.array.T - m)) < 1e-10


def test_no_tape_no_recording():
    x = ad.Tensor([1.0], requires_grad=True)
    y = ad.square(x)
    assert y.tape_node is None
