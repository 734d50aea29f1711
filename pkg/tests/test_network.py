import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provable_repair import (
    ActivationKind,
    Dnn,
    InputError,
    Layer,
    UnsupportedActivationError,
    activation_pattern,
    eval_dnn,
    eval_trace,
    eval_with_pattern,
    is_pwl,
)

from netgen import n1, random_dnn


def test_n1_values():
    net = n1()
    assert eval_dnn(net, [0.5]) == pytest.approx([-0.5], abs=0)
    assert eval_dnn(net, [1.5]) == pytest.approx([-1.0], abs=0)


def test_identity_layer():
    net = Dnn([Layer(np.eye(2), [0.0, 0.0], "identity")])
    np.testing.assert_array_equal(eval_dnn(net, [3.0, -4.0]), [3.0, -4.0])


@pytest.mark.parametrize(
    "x, active",
    [(0.5, (False, True, False)), (1.5, (False, True, True)), (-0.5, (True, False, False))],
)
def test_n1_patterns(x, active):
    assert activation_pattern(n1(), [x]).masks == (active, None)


def test_eval_with_pattern_at_shared_vertex():
    net = n1()
    blue = activation_pattern(net, [0.5])
    green = activation_pattern(net, [1.5])
    # Both regions extended to x = 1 give the same value; the net is continuous there.
    np.testing.assert_allclose(eval_with_pattern(net, [1.0], blue), [-1.0], atol=1e-15)
    np.testing.assert_allclose(eval_with_pattern(net, [1.0], green), [-1.0], atol=1e-15)
    # Oracle: linear extrapolation from interior points of each region.
    for pat, (p, q) in ((blue, (0.9, 0.999)), (green, (1.5, 1.001))):
        yp, yq = eval_dnn(net, [p])[0], eval_dnn(net, [q])[0]
        extrap = yq + (yq - yp) / (q - p) * (1.0 - q)
        assert eval_with_pattern(net, [1.0], pat)[0] == pytest.approx(extrap, abs=1e-12)


def test_eval_with_pattern_ignores_actual_signs():
    net = n1()
    blue = activation_pattern(net, [0.5])
    # Far outside the blue region the blue linear map still applies: y = -x.
    assert eval_with_pattern(net, [3.0], blue)[0] == pytest.approx(-3.0)


def test_is_pwl():
    assert is_pwl(n1())
    tanh = Dnn([Layer([[1.0]], [0.0], "tanh")])
    assert not is_pwl(tanh)
    with pytest.raises(UnsupportedActivationError):
        activation_pattern(tanh, [0.0])


def test_construction_invariants():
    with pytest.raises(InputError):
        Dnn([])
    with pytest.raises(InputError):
        Layer([[1.0, 2.0]], [0.0, 1.0])
    with pytest.raises(InputError):
        Layer([[np.nan]], [0.0])
    with pytest.raises(InputError):
        Dnn([Layer([[1.0]], [0.0]), Layer([[1.0, 1.0]], [0.0])])
    with pytest.raises(InputError):
        eval_dnn(n1(), [1.0, 2.0])


def test_layers_are_immutable():
    layer = Layer([[1.0]], [0.0])
    with pytest.raises(ValueError):
        layer.weights[0, 0] = 2.0


def test_trace_matches_eval():
    rng = np.random.default_rng(0)
    net = random_dnn(rng)
    x = rng.normal(size=net.in_dim)
    tr = eval_trace(net, x)
    np.testing.assert_array_equal(tr.output, eval_dnn(net, x))
    assert len(tr.preactivations) == len(net.layers)
    for z, layer in zip(tr.preactivations, net.layers):
        assert z.shape == (layer.out_dim,)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_consistent_pattern_reproduces_eval(seed):
    rng = np.random.default_rng(seed)
    net = random_dnn(rng, kinds=("relu", "identity"))
    x = rng.normal(size=net.in_dim)
    pat = activation_pattern(net, x)
    np.testing.assert_array_equal(eval_with_pattern(net, x, pat), eval_dnn(net, x))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_affine_along_same_pattern_segment(seed):
    rng = np.random.default_rng(seed)
    net = random_dnn(rng, kinds=("relu", "identity"))
    x = rng.normal(size=net.in_dim)
    y = x + 1e-3 * rng.normal(size=net.in_dim)
    ts = np.linspace(0.0, 1.0, 9)
    pats = {activation_pattern(net, x + t * (y - x)) for t in ts}
    if len(pats) != 1:
        return
    fx, fy = eval_dnn(net, x), eval_dnn(net, y)
    mid = eval_dnn(net, 0.5 * (x + y))
    scale = 1.0 + np.max(np.abs(fy))
    assert np.max(np.abs(mid - 0.5 * (fx + fy))) <= 1e-8 * scale


def test_activation_kind_parse():
    assert ActivationKind.parse("ReLU") is ActivationKind.RELU
    with pytest.raises(InputError):
        ActivationKind.parse("sigmoid")
