import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dprox.core import StackedVector
from dprox.harness.checks import golden_section, prox_oracle, prox_terms
from dprox.prox import CompositeTerm, UnsupportedCompositeError, prox_point, prox_stacked, soft_threshold


def grid_prox_1d(phi, lo, hi, n=200001):
    """Brute-force oracle: dense grid then golden-section polish around the best cell."""
    grid = np.linspace(lo, hi, n)
    vals = np.array([phi(t) for t in grid])
    i = int(np.argmin(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
    return golden_section(phi, a, b)


def test_soft_threshold_example():
    term = CompositeTerm("l1", w1=1.0)
    np.testing.assert_array_equal(prox_point(term, 1.0, np.array([2.0, -0.5, 0.0])), [1.0, 0.0, 0.0])


def test_box_clamp_example():
    term = CompositeTerm(q_kind="box", lo=0.0, hi=1.0)
    np.testing.assert_array_equal(prox_point(term, 0.7, np.array([2.0, -1.0, 0.5])), [1.0, 0.0, 0.5])


def test_l1_box_example_against_grid_oracle():
    x = np.array([2.0, -0.5, 0.1])
    expected = [
        grid_prox_1d(lambda t, xi=xi: abs(t) + 0.5 * (t - xi) ** 2, -0.3, 0.3, n=60001) for xi in x
    ]
    np.testing.assert_allclose(expected, [0.3, 0.0, 0.0], atol=1e-9)
    term = CompositeTerm("l1", w1=1.0, q_kind="box", lo=-0.3, hi=0.3)
    np.testing.assert_allclose(prox_point(term, 1.0, x), [0.3, 0.0, 0.0], atol=1e-15)


def test_elastic_net_closed_form():
    term = CompositeTerm("elastic-net", w1=0.5, w2=2.0)
    x = np.array([3.0, -0.2, -1.5])
    got = prox_point(term, 0.5, x)
    # oracle: stationarity of w1|t| + w2 t^2 / 2 + (t - x)^2 / (2 gamma)
    np.testing.assert_allclose(got, [(3.0 - 0.25) / 2.0, 0.0, (-1.5 + 0.25) / 2.0])


def test_ball_projection():
    term = CompositeTerm(q_kind="euclidean-ball", center=np.array([1.0, 0.0]), radius=1.0)
    np.testing.assert_allclose(prox_point(term, 1.0, np.array([4.0, 4.0])), [1.6, 0.8])
    np.testing.assert_array_equal(prox_point(term, 1.0, np.array([1.5, 0.0])), [1.5, 0.0])


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(g_kind="l1", w1=1.0, q_kind="euclidean-ball", radius=1.0),
        dict(g_kind="elastic-net", w1=1.0, q_kind="box", lo=0.0, hi=1.0),
        dict(g_kind="elastic-net", q_kind="euclidean-ball", radius=2.0),
        dict(g_kind="huber"),
        dict(q_kind="simplex"),
        dict(g_kind="l1", w1=-1.0),
        dict(q_kind="box", lo=1.0, hi=0.0),
        dict(q_kind="euclidean-ball", radius=0.0),
    ],
)
def test_invalid_terms_rejected_at_construction(kwargs):
    with pytest.raises(UnsupportedCompositeError):
        CompositeTerm(**kwargs)


def test_unsupported_pair_message_names_the_pair():
    with pytest.raises(UnsupportedCompositeError, match="l1.*euclidean-ball"):
        CompositeTerm("l1", w1=1.0, q_kind="euclidean-ball", radius=1.0)


def test_nonpositive_step_rejected():
    with pytest.raises(ValueError):
        prox_point(CompositeTerm(), 0.0, np.zeros(2))


def test_value_is_infinite_outside_q():
    term = CompositeTerm("l1", w1=2.0, q_kind="box", lo=-1.0, hi=1.0)
    assert term.value(np.array([0.5, -0.5])) == 2.0
    assert term.value(np.array([1.5, 0.0])) == np.inf
    assert term.g_value(np.array([1.5, 0.0])) == 3.0


def test_zero_term_stacked_is_identity(rng):
    x = StackedVector(rng.standard_normal((4, 3)))
    assert prox_stacked(CompositeTerm(), 0.3, x) == x


def _terms(d):
    return [t for _, t in prox_terms(np.random.default_rng(5), d)]


@pytest.mark.parametrize("idx", range(6))
def test_stacked_matches_blockwise_loop(idx, rng):
    term = _terms(3)[idx]
    x = StackedVector(2 * rng.standard_normal((5, 3)))
    loop = np.stack([prox_point(term, 0.4, xi) for xi in x.blocks])
    assert np.array_equal(prox_stacked(term, 0.4, x).blocks, loop)
    same = StackedVector.broadcast(x.blocks[0], 5)
    out = prox_stacked(term, 0.4, same).blocks
    assert np.all(out == out[0])


@pytest.mark.parametrize("idx", range(6))
def test_matches_one_dimensional_oracle(idx):
    rng = np.random.default_rng(100 + idx)
    term = _terms(4)[idx]
    for _ in range(1000):
        gamma = float(np.exp(rng.uniform(np.log(0.05), np.log(5.0))))
        x = 2.0 * rng.standard_normal(4)
        np.testing.assert_allclose(prox_point(term, gamma, x), prox_oracle(term, gamma, x), atol=1e-6)


@pytest.mark.parametrize("idx", range(6))
def test_optimality_against_feasible_points(idx):
    # prox(x) minimizes the prox objective: compare against 1000 random feasible q
    rng = np.random.default_rng(200 + idx)
    term = _terms(4)[idx]
    gamma = 0.8
    x = 2.0 * rng.standard_normal(4)
    p = prox_point(term, gamma, x)
    assert term.contains(p)

    def obj(y):
        return term.g_value(y) + np.sum((y - x) ** 2) / (2 * gamma)

    best = obj(p)
    for _ in range(1000):
        q = term.project(p + rng.standard_normal(4) * rng.choice([1e-3, 0.1, 2.0]))
        assert obj(q) >= best - 1e-12


@pytest.mark.parametrize("idx", range(6))
def test_fixed_point_of_minimizer(idx):
    # the minimizer of g over Q is a fixed point of the prox for every step size
    term = _terms(3)[idx]
    x_min = term.project(np.zeros(3))
    for gamma in (0.01, 1.0, 100.0):
        np.testing.assert_allclose(prox_point(term, gamma, x_min), x_min, atol=1e-14)


vec = arrays(np.float64, 4, elements=st.floats(-50, 50, allow_nan=False))


@settings(max_examples=300, deadline=None)
@given(st.integers(0, 5), vec, vec, st.floats(1e-3, 1e3))
def test_nonexpansive(idx, a, b, gamma):
    term = _terms(4)[idx]
    lhs = np.linalg.norm(prox_point(term, gamma, a) - prox_point(term, gamma, b))
    assert lhs <= np.linalg.norm(a - b) * (1 + 1e-12) + 1e-12


@settings(max_examples=300, deadline=None)
@given(vec, st.floats(0, 10))
def test_soft_threshold_shrinks(x, t):
    out = soft_threshold(x, t)
    assert np.all(np.abs(out) <= np.abs(x))
    assert np.all(np.abs(out - x) <= t + 1e-12)
