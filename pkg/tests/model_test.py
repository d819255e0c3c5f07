from fractions import Fraction

import jax.numpy as jnp
import numpy as np
import pytest

from encrelay import model
from encrelay.model import EncPolicy, RateParams, StationaryDist
from encrelay.test_utils import assert_allclose
from encrelay.units import unit_registry as ureg


def random_policy(K, seed, lossy=True):
    rng = np.random.default_rng(seed)
    g = rng.uniform(0.0, 1.0, K + 1)
    if not lossy:
        g[K] = 1.0
    f = rng.uniform(0.0, 2.0, K + 1)
    return EncPolicy(K, g, f)


def test_conventional_k2():
    metrics = model.analyze(EncPolicy.conventional(2), 1.0)
    assert_allclose(metrics.delay, 0.6)
    assert_allclose(metrics.loss, 0.2)
    assert_allclose(metrics.energy, 0.8)
    assert_allclose(metrics.normalized_energy, 0.8)


def test_fcfs_k2():
    metrics = model.analyze(EncPolicy.fcfs(2), 1.0)
    assert_allclose(metrics.delay, 0.6)
    assert metrics.loss == 0.0
    assert_allclose(metrics.normalized_energy, 1.2)


@pytest.mark.parametrize("K", [1, 3, 10])
def test_always_send(K):
    metrics = model.analyze(EncPolicy.always_send(K), 2.0)
    assert metrics.delay == 0.0
    assert metrics.loss == 0.0
    assert_allclose(metrics.normalized_energy, 2.0)
    assert_allclose(metrics.energy, 4.0)


@pytest.mark.parametrize("K", range(1, 21))
def test_conventional_closed_form(K):
    # uniform occupancy 2 / (1 + 2K) on 1..K
    metrics = model.analyze(EncPolicy.conventional(K), 1.0)
    assert_allclose(metrics.delay, K * (K + 1) / (2 * (1 + 2 * K)))
    assert Fraction(metrics.loss).limit_denominator(10**6) == Fraction(1, 1 + 2 * K)
    assert_allclose(metrics.loss, 1.0 / (1 + 2 * K), atol=1e-15, rtol=1e-14)


def test_units_and_epsilon():
    plain = model.analyze(EncPolicy.conventional(3), 2.0, 0.5)
    with_units = model.analyze(
        EncPolicy.conventional(3), 120 * ureg.pkt / ureg.minute, 500 * ureg.mJ
    )
    assert_allclose(plain.delay, with_units.delay)
    assert_allclose(plain.energy, with_units.energy)
    assert_allclose(plain.normalized_energy, with_units.normalized_energy)


def test_delay_scales_inversely_with_rate():
    policy = random_policy(4, 7)
    slow = model.analyze(policy, 1.0)
    fast = model.analyze(
        EncPolicy(4, policy.g, 3.0 * policy.f), 3.0
    )
    assert_allclose(fast.delay, slow.delay / 3.0)
    assert_allclose(fast.loss, slow.loss)
    assert_allclose(fast.normalized_energy, slow.normalized_energy)


def test_policy_to_rates():
    policy = EncPolicy(2, [0.5, 0.25, 1.0], [0.0, 0.5, 1.5])
    rates = model.policy_to_rates(policy, 2.0)
    assert rates.K == 2
    assert_allclose(rates.up, jnp.array([2.0, 1.5, 0.0]))
    assert_allclose(rates.down, jnp.array([2.5, 3.5]))


@pytest.mark.parametrize("seed", range(5))
def test_rates_round_trip(seed):
    policy = random_policy(6, seed)
    back = model.rates_to_policy(model.policy_to_rates(policy, 1.7))
    assert_allclose(back.g, policy.g, atol=1e-12)
    assert_allclose(back.f[1:], policy.f[1:], atol=1e-12)
    assert back.f[0] == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_normalized_energy_identity(seed):
    metrics = model.analyze(random_policy(5, seed), 1.3)
    rates = model.policy_to_rates(random_policy(5, seed), 1.3)
    pi0 = float(model.stationary(rates).pi[0])
    assert_allclose(metrics.normalized_energy, pi0 + 1 - 2 * metrics.loss, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_state_energy_rates_average_to_energy(seed):
    rates = model.policy_to_rates(random_policy(4, seed), 0.8)
    dist = model.stationary(rates)
    per_state = model.state_energy_rates(rates, 2.0)
    e_ave, _ = model.energy(dist, rates, 2.0)
    assert_allclose(jnp.sum(dist.pi * per_state), e_ave, atol=1e-12)


def test_loss_free_property():
    assert EncPolicy.fcfs(3).loss_free
    assert EncPolicy.always_send(3).loss_free
    assert not EncPolicy.conventional(3).loss_free


def test_policy_clips_small_overshoot():
    policy = EncPolicy(1, [1.0 + 1e-10, -1e-10], [0.0, -1e-10])
    assert float(policy.g[0]) == 1.0
    assert float(policy.g[1]) == 0.0
    assert float(policy.f[1]) == 0.0


@pytest.mark.parametrize(
    "g, f, match",
    [
        ([1.1, 0.0], None, r"'g\[0\]'"),
        ([0.0, -0.2], None, r"'g\[1\]'"),
        ([0.0, 0.0], [0.0, -1.0], r"'f\[1\]'"),
        ([0.0, 0.0, 0.0], None, "length 2"),
        ([0.0, float("nan")], None, "finite"),
    ],
)
def test_policy_invalid(g, f, match):
    with pytest.raises(ValueError, match=match):
        EncPolicy(1, g, f)


@pytest.mark.parametrize("K", [0, -1, 1.5, True, "2"])
def test_invalid_buffer_size(K):
    with pytest.raises(ValueError, match="'K'"):
        EncPolicy.conventional(K)


def test_rate_params_box():
    RateParams(lam=1.0, up=[2.0, 1.0], down=[1.0])
    with pytest.raises(ValueError, match=r"'up\[0\]'"):
        RateParams(lam=1.0, up=[2.5, 1.0], down=[1.0])
    with pytest.raises(ValueError, match=r"'up\[1\]'"):
        RateParams(lam=1.0, up=[2.0, 1.5], down=[1.0])
    with pytest.raises(ValueError, match=r"'down\[0\]'"):
        RateParams(lam=1.0, up=[2.0, 1.0], down=[0.5])
    with pytest.raises(ValueError, match="'lam'"):
        RateParams(lam=0.0, up=[0.0, 0.0], down=[1.0])


def test_rate_params_outside_policy_box():
    # mu below lam has no ENC policy counterpart
    with pytest.raises(ValueError):
        RateParams(lam=1.0, up=[1.0, 1.0], down=[0.9])


def test_stationary_dist_validation():
    StationaryDist([0.5, 0.5])
    with pytest.raises(ValueError, match="sum to"):
        StationaryDist([0.5, 0.6])
    with pytest.raises(ValueError, match="non-negative"):
        StationaryDist([1.5, -0.5])
    with pytest.raises(ValueError, match="at least two"):
        StationaryDist([1.0])


def test_mismatched_distribution():
    rates = model.policy_to_rates(EncPolicy.conventional(2), 1.0)
    with pytest.raises(ValueError, match="states"):
        model.loss_rate(StationaryDist([0.5, 0.5]), rates)


def test_invalid_rates_for_metrics():
    dist = StationaryDist([0.5, 0.5])
    with pytest.raises(ValueError, match="'lam'"):
        model.mean_delay(dist, 0.0)
    with pytest.raises(ValueError, match="'lam'"):
        model.analyze(EncPolicy.conventional(1), -1.0)
    rates = model.policy_to_rates(EncPolicy.conventional(1), 1.0)
    with pytest.raises(ValueError, match="'epsilon'"):
        model.energy(dist, rates, 0.0)


def test_metrics_validation():
    with pytest.raises(ValueError, match="delay"):
        model.Metrics(delay=-1.0, loss=0.0, energy=1.0, normalized_energy=1.0)
    with pytest.raises(ValueError, match="loss"):
        model.Metrics(delay=1.0, loss=1.5, energy=1.0, normalized_energy=1.0)
