import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetprobit.model import (
    DEGENERATE_FLOOR,
    LN2,
    Dataset,
    DimensionError,
    InputError,
    ParamVector,
    benchmark_value,
    crossover_fraction,
    gradient,
    inverse_mills,
    log_likelihood,
    log_ndtr,
    plateau_approximation,
)

mp.mp.dps = 40


def mp_loglik(d, beta, gamma):
    """Term-by-term log-likelihood with 40-digit arithmetic."""
    total = mp.mpf(0)
    for i in range(d.n):
        xb = mp.fsum(mp.mpf(float(x)) * mp.mpf(float(b)) for x, b in zip(d.X[i], beta))
        zg = mp.fsum(mp.mpf(float(z)) * mp.mpf(float(g)) for z, g in zip(d.Z[i], gamma))
        a = xb / mp.exp(zg)
        # 1 - Phi(a) = erfc(a / sqrt 2) / 2, avoiding cancellation when Phi(a) is near 1
        if d.y[i] == 1:
            total += mp.log(mp.erfc(-a / mp.sqrt(2)) / 2)
        else:
            total += mp.log(mp.erfc(a / mp.sqrt(2)) / 2)
    return total


def random_dataset(rng, n=10, k1=3, k2=2, z="binary"):
    X = np.column_stack([np.ones(n), rng.integers(0, 2, size=(n, k1 - 1))])
    Z = rng.integers(0, 2, size=(n, k2)).astype(float) if z == "binary" else rng.random((n, k2))
    y = rng.integers(0, 2, size=n)
    return Dataset(y, X, Z)


# reference values of ln Phi(a) from mpmath at 40 digits
LOG_NDTR_CASES = [
    (-40.0, -804.6084420137537881666068),
    (-37.5, -707.6689893175071910661132),
    (-10.0, -53.23128515051247057834703),
    (-1.0, -1.841021645009263505770783),
    (0.0, -0.6931471805599453094172321),
    (1.0, -0.1727537790234498895264832),
    (5.0, -2.866516129637635933845963e-07),
    (8.0, -6.220960574271786058533518e-16),
    (10.0, -7.619853024160526070429306e-24),
]


@pytest.mark.parametrize("a, expected", LOG_NDTR_CASES)
def test_log_ndtr_tails(a, expected):
    got = float(log_ndtr(np.array([a]))[0])
    assert got == pytest.approx(expected, rel=1e-13)


def test_log_ndtr_finite_far_left():
    vals = log_ndtr(np.array([-100.0, -1e3, -1e5]))
    assert np.all(np.isfinite(vals))
    # leading behaviour -a^2/2 - ln(-a) - ln sqrt(2 pi)
    a = -1e3
    assert vals[1] == pytest.approx(-a * a / 2 - math.log(-a) - 0.5 * math.log(2 * math.pi), rel=1e-9)


def test_inverse_mills_values():
    lam = inverse_mills(np.array([-30.0, 0.0, 3.0]))
    expected = [30.03325966743367703707112, 0.7978845608028653558798921, 0.004437839042125663793302104]
    np.testing.assert_allclose(lam, expected, rtol=1e-13)


def test_loglik_matches_mpmath_oracle():
    rng = np.random.default_rng(11)
    for _ in range(20):
        d = random_dataset(rng, z="continuous")
        beta = rng.uniform(-5, 5, 3)
        gamma = rng.uniform(-3, 3, 2)
        got = log_likelihood(d, ParamVector(beta, gamma)).value
        assert got == pytest.approx(float(mp_loglik(d, beta, gamma)), rel=1e-12)


def test_probit_special_case_no_z():
    rng = np.random.default_rng(2)
    d = random_dataset(rng, k2=2)
    d0 = Dataset(d.y, d.X)
    beta = np.array([0.3, -1.0, 2.0])
    # gamma = 0 is the ordinary probit
    assert log_likelihood(d0, ParamVector(beta)).value == pytest.approx(
        log_likelihood(d, ParamVector(beta, [0.0, 0.0])).value, rel=1e-15)
    assert d0.k2 == 0


def test_flat_point():
    rng = np.random.default_rng(3)
    d = random_dataset(rng, n=25)
    for g in ([0, 0], [4.0, -7.0], [300.0, 300.0]):
        ev = log_likelihood(d, ParamVector(np.zeros(3), g))
        assert ev.value == pytest.approx(-25 * LN2, abs=1e-10)
        assert ev.normalized == pytest.approx(-LN2, abs=1e-12)
        assert not ev.degenerate


def test_degenerate_sentinel():
    # a perfectly wrong prediction with a tiny scale underflows every term
    d = Dataset([1, 0], [[1.0], [1.0]], [[0.0], [0.0]])
    ev = log_likelihood(d, ParamVector([1e200], [0.0]))
    assert ev.degenerate
    assert ev.value == DEGENERATE_FLOOR
    assert np.isfinite(ev.value)


def test_gradient_central_differences():
    rng = np.random.default_rng(5)
    for _ in range(10):
        d = random_dataset(rng, n=40, z="continuous")
        p = ParamVector(rng.uniform(-2, 2, 3), rng.uniform(-1, 1, 2))
        g = gradient(d, p)
        x = p.flat
        fd = np.empty_like(x)
        for j in range(x.size):
            e = np.zeros_like(x)
            e[j] = 1e-5
            fd[j] = (log_likelihood(d, ParamVector.from_flat(x + e, 3)).value
                     - log_likelihood(d, ParamVector.from_flat(x - e, 3)).value) / 2e-5
        np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-7)


def test_gradient_zero_at_flat_point_gamma():
    # at beta = 0 the likelihood does not depend on gamma
    rng = np.random.default_rng(6)
    d = random_dataset(rng, n=30)
    g = gradient(d, ParamVector(np.zeros(3), [1.5, -0.5]))
    np.testing.assert_allclose(g[3:], 0.0, atol=1e-14)


def test_plateau_approximation_small():
    X = np.array([[1.0, 0.0], [1.0, 1.0], [1.0, 1.0], [1.0, 0.0]])
    Z = np.array([[0.0], [1.0], [0.0], [1.0]])
    y = np.array([1, 0, 0, 1])
    d = Dataset(y, X, Z)
    beta = np.array([0.5, -2.0])
    pa = plateau_approximation(d, beta)
    # rows 0 and 2 keep probit terms, rows 1 and 3 give -ln 2
    expected = float(log_ndtr(np.array([0.5]))[0] + log_ndtr(np.array([1.5]))[0]) - 2 * LN2
    assert pa.value == pytest.approx(expected, rel=1e-15)
    assert not pa.negative_z
    ll = log_likelihood(d, ParamVector(beta, [20.0])).value
    assert abs(ll - pa.value) < 1e-6


def test_plateau_approximation_flags_negative_z():
    d = Dataset([0, 1], [[1.0], [1.0]], [[-0.5], [0.5]])
    assert plateau_approximation(d, [0.1]).negative_z


def test_benchmark_and_crossover():
    d = Dataset([1, 0, 1, 1], np.ones((4, 1)), np.zeros((4, 1)))
    assert benchmark_value(d) == -4 * LN2
    assert benchmark_value(10) == -10 * LN2
    # x'beta = 1 >= 0 predicts 1; the one y = 0 row is a crossover
    assert crossover_fraction(d, [1.0]) == 0.25


def test_dimension_and_input_errors():
    d = Dataset([0, 1], [[1.0, 0.0], [1.0, 1.0]], [[1.0], [0.0]])
    with pytest.raises(DimensionError):
        log_likelihood(d, ParamVector([0.0], [0.0]))
    with pytest.raises(DimensionError):
        log_likelihood(d, ParamVector([0.0, 0.0], [0.0, 1.0]))
    with pytest.raises(InputError):
        log_likelihood(d, ParamVector([np.nan, 0.0], [0.0]))
    with pytest.raises(InputError):
        Dataset([0, 2], [[1.0], [1.0]])
    with pytest.raises(InputError):
        Dataset([0, 1], [[1.0], [np.inf]])
    with pytest.raises(DimensionError):
        Dataset([0, 1, 1], [[1.0], [1.0]])


def test_dataset_is_read_only():
    d = Dataset([0, 1], [[1.0], [1.0]], [[1.0], [0.0]])
    with pytest.raises(ValueError):
        d.X[0, 0] = 3.0


def test_param_vector_flat_roundtrip():
    p = ParamVector([1.0, 2.0], [3.0])
    assert ParamVector.from_flat(p.flat, 2) == p
    assert hash(ParamVector.from_flat(p.flat, 2)) == hash(p)


finite = st.floats(-6, 6, allow_nan=False)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), b=st.lists(finite, min_size=3, max_size=3),
       g=st.lists(finite, min_size=2, max_size=2))
def test_loglik_is_nonpositive_and_finite(seed, b, g):
    d = random_dataset(np.random.default_rng(seed), n=15)
    ev = log_likelihood(d, ParamVector(b, g))
    assert ev.value <= 0.0
    assert np.isfinite(ev.value)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), b=st.lists(finite, min_size=3, max_size=3))
def test_label_flip_symmetry(seed, b):
    # flipping every outcome and the sign of beta leaves the likelihood unchanged
    d = random_dataset(np.random.default_rng(seed), n=15)
    flipped = Dataset(1 - d.y, d.X, d.Z)
    g = [0.4, -0.3]
    a = log_likelihood(d, ParamVector(b, g)).value
    c = log_likelihood(flipped, ParamVector(-np.asarray(b), g)).value
    assert a == pytest.approx(c, rel=1e-14, abs=1e-300)
