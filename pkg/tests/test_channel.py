import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from ehrx.channel import (
    ChannelParams,
    ConfigError,
    default_gamma_max,
    rate_of,
    sample_slot,
    sample_slots,
)


@pytest.mark.parametrize("gamma, expected", [(0.0, 0.0), (1.0, 1.0), (3.0, 2.0)])
def test_rate_of(gamma, expected):
    assert rate_of(gamma) == pytest.approx(expected, abs=1e-15)


def test_rate_of_natural_log():
    assert rate_of(math.e - 1, base=math.e) == pytest.approx(1.0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(means=(), access_probs=()),
        dict(means=(1.0, 1.0), access_probs=(0.1,)),
        dict(means=(0.0,), access_probs=(0.1,)),
        dict(means=(1.0,), access_probs=(1.5,)),
        dict(means=(1.0,), access_probs=(0.1,), power=0.0),
        dict(means=(1.0,), access_probs=(0.1,), gain_quantile_eps=0.1),
        dict(means=(1.0,) * 21, access_probs=(0.1,) * 21),
    ],
)
def test_params_validation(kwargs):
    with pytest.raises(ConfigError):
        ChannelParams(**kwargs)


def test_gamma_max_default():
    p = ChannelParams.homogeneous(10)
    assert default_gamma_max(p) == pytest.approx(10 * math.log(1e6))


def test_no_access_is_idle():
    p = ChannelParams((1.0, 2.0), (0.0, 0.0))
    s = sample_slot(p, default_gamma_max(p), np.random.default_rng(0))
    assert s.active_set == () and s.gamma == 0.0 and not s.success and s.rate == 0.0


def test_single_transmitter_always_succeeds():
    p = ChannelParams((2.0,), (1.0,), power=3.0)
    rng = np.random.default_rng(1)
    for _ in range(50):
        s = sample_slot(p, default_gamma_max(p), rng)
        assert s.success and s.active_set == (0,)
        assert s.gamma == pytest.approx(3.0 * s.gains[0])
        assert s.gamma > 0


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    q=st.lists(st.floats(0, 1), min_size=1, max_size=6),
)
def test_slot_invariants(seed, q):
    p = ChannelParams((1.5,) * len(q), tuple(q), power=2.0)
    gmax = default_gamma_max(p)
    a = sample_slot(p, gmax, np.random.default_rng(seed))
    b = sample_slot(p, gmax, np.random.default_rng(seed))
    assert a == b
    assert 0 <= a.gamma <= gmax
    assert (a.gamma == 0) == (a.n_active == 0)
    assert a.success == (a.n_active == 1)
    assert all(g <= 1.5 * math.log(1e6) for g in a.gains)


def test_gamma_clamped_to_configured_cap():
    p = ChannelParams.homogeneous(4, q=1.0)
    s = sample_slots(p, 0.5, 10_000, np.random.default_rng(3))
    assert s.gamma.max() == 0.5


def test_stream_reproducible():
    p = ChannelParams((1.0, 2.0, 3.0), (0.2, 0.3, 0.4))
    a = sample_slots(p, default_gamma_max(p), 200_000, np.random.default_rng(9))
    b = sample_slots(p, default_gamma_max(p), 200_000, np.random.default_rng(9))
    assert np.array_equal(a.gamma, b.gamma) and np.array_equal(a.n_active, b.n_active)


def test_active_count_mean():
    # Binomial(10, 0.1) has mean 1
    p = ChannelParams.homogeneous(10)
    s = sample_slots(p, default_gamma_max(p), 1_000_000, np.random.default_rng(11))
    assert s.n_active.mean() == pytest.approx(1.0, abs=0.01)


@pytest.mark.parametrize(
    "means, q",
    [((1.0,) * 10, (0.1,) * 10), ((1.0, 2.0, 3.0), (0.2, 0.3, 0.4)), ((1.0, 1.0), (0.5, 0.9))],
)
def test_single_active_frequency(means, q):
    p = ChannelParams(means, q)
    s = sample_slots(p, default_gamma_max(p), 1_000_000, np.random.default_rng(5))
    qa = np.asarray(q)
    exact = sum(qa[i] * np.prod(np.delete(1 - qa, i)) for i in range(len(q)))
    assert s.success.mean() == pytest.approx(exact, abs=0.005)


def test_truncated_gain_mean():
    eps = 1e-6
    p = ChannelParams((1.0,), (1.0,), power=1.0, gain_quantile_eps=eps)
    s = sample_slots(p, default_gamma_max(p), 1_000_000, np.random.default_rng(17))
    cap = math.log(1 / eps)
    partial_mean = integrate.quad(lambda x: x * math.exp(-x), 0, cap)[0]
    assert partial_mean == pytest.approx(1 - eps * (1 + math.log(1 / eps)), rel=1e-9)
    assert s.gamma.mean() == pytest.approx(partial_mean, rel=0.01)
    conditional_mean = partial_mean / (1 - eps)
    assert s.gamma.mean() == pytest.approx(conditional_mean, rel=0.01)
    assert s.gamma.max() <= cap


def test_sample_slot_matches_stream_statistics():
    p = ChannelParams((1.0, 2.0), (0.3, 0.6))
    rng = np.random.default_rng(21)
    slots = [sample_slot(p, default_gamma_max(p), rng) for _ in range(40_000)]
    g = np.array([s.gamma for s in slots])
    # E[gamma] = sum q_i mu_i
    assert g.mean() == pytest.approx(0.3 * 1 + 0.6 * 2, rel=0.03)
