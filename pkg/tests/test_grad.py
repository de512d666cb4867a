import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from itugan import grad as G
from itugan.grad import Adam, AdamState, NonFiniteError, Tape, Tensor, adam_step

from gradcheck import check

rng = np.random.default_rng(7)


def _r(*shape, lo=-1.0, hi=1.0):
    return rng.uniform(lo, hi, size=shape)


def test_matmul_shape():
    out = G.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 1))))
    assert out.shape == (2, 1)


def test_matmul_mismatch_is_descriptive():
    with pytest.raises(ValueError, match=r"\(2, 3\) by \(2, 1\)"):
        G.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 1))))


def test_identity_kernel_conv():
    x = np.zeros((1, 1, 3, 3))
    x[0, 0, 1, 1] = 1.0
    k = np.zeros((1, 1, 3, 3))
    k[0, 0, 1, 1] = 1.0
    out = G.conv2d(Tensor(x), Tensor(k), stride=1, padding=1)
    np.testing.assert_array_equal(out.data, x)


def test_tanh_at_zero():
    x = Tensor(np.zeros(1), requires_grad=True)
    y = G.tanh(x)
    y.sum().backward()
    assert y.item() == 0.0
    assert x.grad[0] == 1.0


def test_sum_of_squares_grad():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    (x * x).sum().backward()
    np.testing.assert_array_equal(x.grad, [2.0, 4.0, 6.0])


def test_backward_requires_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        (x * 2.0).backward()


def test_log_rejects_nonpositive():
    with pytest.raises(ValueError, match="clamp"):
        G.log(Tensor([1.0, 0.0]))


@pytest.mark.filterwarnings("ignore:overflow")
def test_nonfinite_is_an_error():
    with pytest.raises(NonFiniteError):
        Tensor([1.0]) * 1e308 * 10.0


def test_tape_visits_each_node_once_in_reverse_order():
    x = Tensor(_r(3), requires_grad=True)
    y = x * x
    z = y + y  # y reached twice
    loss = (z * y).sum()
    tape = Tape.from_root(loss)
    ids = [n._id for n in tape.nodes]
    assert len(ids) == len(set(ids))
    assert ids == sorted(ids, reverse=True)
    assert tape.nodes[0] is loss and tape.nodes[-1] is x


def test_grads_accumulate_across_backward_calls():
    x = Tensor([1.0, -2.0], requires_grad=True)
    (x * 3.0).sum().backward()
    (x * 3.0).sum().backward()
    np.testing.assert_array_equal(x.grad, [6.0, 6.0])
    x.zero_grad()
    np.testing.assert_array_equal(x.grad, [0.0, 0.0])


# -- finite-difference checks, one per op ---------------------------------------

ELEMENTWISE = {
    "add": lambda a, b: (a + b).sum(),
    "sub": lambda a, b: ((a - b) * (a - b)).sum(),
    "mul": lambda a, b: (a * b).sum(),
    "scalar": lambda a, b: ((2.5 - a) * 0.3 + (b / 4.0) * a + 1.0).sum(),
    "tanh": lambda a, b: (G.tanh(a) * b).sum(),
    "sigmoid": lambda a, b: (G.sigmoid(a) * b).sum(),
    "arctan": lambda a, b: (G.arctan(a) * b).sum(),
    "leaky_relu": lambda a, b: (G.leaky_relu(a) * b).sum(),
    "abs": lambda a, b: (G.tabs(a) * b).sum(),
    "log": lambda a, b: (G.log(a * a + 0.5) * b).sum(),
    "clamp": lambda a, b: (G.clamp(a, -0.5, 0.5) * b).sum(),
    "mean": lambda a, b: (a * b).mean(),
    "mean_axis": lambda a, b: ((a * b).mean(axis=1) * G.tanh(a).sum(axis=1)).sum(),
}


@pytest.mark.parametrize("name", sorted(ELEMENTWISE))
def test_elementwise_gradcheck(name):
    # keep away from the kinks of abs/leaky_relu/clamp
    a = _r(3, 4)
    a[np.abs(a) < 0.05] = 0.3
    a[np.abs(np.abs(a) - 0.5) < 0.05] = 0.3
    assert check(ELEMENTWISE[name], [a, _r(3, 4)]) < 1e-4


def test_matmul_gradcheck():
    assert check(lambda a, b: G.tanh(G.matmul(a, b)).sum(), [_r(2, 3), _r(3, 4)]) < 1e-4


def test_reshape_concat_flip_gradcheck():
    def build(a, b):
        c = G.concat([a, b], axis=0)
        d = G.flip(G.reshape(c, (5, 2, 2)), axis=-1)
        return (G.tanh(d) * d).sum()

    assert check(build, [_r(2, 4), _r(3, 4)]) < 1e-4


def test_add_bias_gradcheck():
    assert check(lambda x, b: G.tanh(G.add_bias(x, b)).sum(), [_r(2, 3, 2, 2), _r(3)]) < 1e-4


@pytest.mark.parametrize("stride,padding,mode", [(1, 1, "zeros"), (2, 1, "zeros"), (1, 1, "replicate"), (2, 0, "zeros")])
def test_conv2d_gradcheck(stride, padding, mode):
    def build(x, w):
        return G.tanh(G.conv2d(x, w, stride=stride, padding=padding, pad_mode=mode)).sum()

    assert check(build, [_r(2, 2, 6, 6), _r(3, 2, 3, 3)]) < 1e-4


def test_conv_transpose2d_gradcheck():
    def build(x, w):
        return G.tanh(G.conv_transpose2d(x, w, stride=2, padding=1)).sum()

    assert check(build, [_r(2, 3, 3, 3), _r(3, 2, 4, 4)]) < 1e-4


def test_three_layer_net_gradcheck():
    def build(x, w1, w2, w3):
        h = G.leaky_relu(G.conv2d(x, w1, stride=2, padding=1))
        h = G.tanh(G.conv_transpose2d(h, w2, stride=2, padding=1))
        h = G.reshape(h, (2, -1))
        return G.sigmoid(G.matmul(h, w3)).mean()

    arrays = [_r(2, 1, 6, 6), _r(3, 1, 4, 4), _r(3, 2, 4, 4), _r(72, 1)]
    assert check(build, arrays) < 1e-4


@settings(max_examples=25, deadline=None)
@given(
    n=st.integers(1, 2),
    c=st.integers(1, 3),
    o=st.integers(1, 3),
    hin=st.integers(2, 5),
    k=st.integers(1, 4),
    stride=st.integers(1, 3),
    seed=st.integers(0, 2**31 - 1),
)
def test_conv_transpose_is_adjoint(n, c, o, hin, k, stride, seed):
    r = np.random.default_rng(seed)
    padding = min(1, k - 1)
    # input size making the strided conv exactly cover the padded image
    h = (hin - 1) * stride + k - 2 * padding
    if h < 1:
        return
    x = r.normal(size=(n, c, h, h))
    w = r.normal(size=(o, c, k, k))
    cx = G.conv2d(Tensor(x), Tensor(w), stride=stride, padding=padding).data
    y = r.normal(size=cx.shape)
    ty = G.conv_transpose2d(Tensor(y), Tensor(w), stride=stride, padding=padding).data
    assert ty.shape == x.shape
    lhs, rhs = np.vdot(cx, y), np.vdot(x, ty)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_replicate_pad_matches_edge_extension():
    x = np.arange(4.0).reshape(1, 1, 2, 2)
    out = G.pad2d(Tensor(x), 1, "replicate").data[0, 0]
    np.testing.assert_array_equal(out[0], [0, 0, 1, 1])
    np.testing.assert_array_equal(out[-1], [2, 2, 3, 3])


# -- Adam -------------------------------------------------------------------------

def test_adam_first_step_is_signed_lr():
    p = Tensor([1.0, -1.0, 5.0])
    g = np.array([0.3, -2.0, 1e-3])
    adam_step([p], [g], AdamState(), lr=0.01, eps=1e-12)
    np.testing.assert_allclose(p.data, [1.0 - 0.01, -1.0 + 0.01, 5.0 - 0.01], rtol=0, atol=1e-9)


def test_adam_zero_grad_no_change():
    p = Tensor([1.0, 2.0])
    adam_step([p], [np.zeros(2)], AdamState())
    np.testing.assert_array_equal(p.data, [1.0, 2.0])


def test_adam_quadratic_converges():
    w = Tensor([0.0], requires_grad=True)
    opt = Adam([w], lr=0.1)
    for _ in range(100):
        opt.zero_grad()
        d = w - 3.0
        (d * d).sum().backward()
        opt.step()
    assert abs(w.item() - 3.0) < 0.2


def test_adam_rejects_nonfinite_grad_without_updating():
    p = Tensor([1.0, 2.0])
    state = AdamState()
    with pytest.raises(NonFiniteError):
        adam_step([p], [np.array([np.nan, 0.0])], state)
    np.testing.assert_array_equal(p.data, [1.0, 2.0])
    assert state.step == 0


def test_float32_preserved():
    x = Tensor(np.ones((2, 2), dtype=np.float32), requires_grad=True)
    y = (G.tanh(x) * 0.5 + 1.0).mean()
    y.backward()
    assert y.dtype == np.float32 and x.grad.dtype == np.float32
