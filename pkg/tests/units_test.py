import jax.numpy as jnp
import pytest
from pint import DimensionalityError

from encrelay import units
from encrelay.model import RateParams
from encrelay.test_utils import assert_allclose, assert_quantity_allclose
from encrelay.units import unit_registry as ureg


def test_quantity_input():
    @units.quantity_input(lam=ureg.Hz, horizon=ureg.s)
    def expected_arrivals(lam, horizon):
        assert lam.units == ureg.Hz
        assert horizon.units == ureg.s
        return 2 * lam * horizon

    assert_quantity_allclose(
        expected_arrivals(1.5 * ureg.Hz, 2.0 * ureg.s), 6.0 * ureg.Hz * ureg.s
    )


def test_quantity_input_functional():
    def rate(lam):
        assert lam.units == ureg.Hz
        return lam

    rate = units.quantity_input(rate, lam=ureg.Hz)
    assert_quantity_allclose(rate(0.5 * ureg.Hz), 0.5 * ureg.Hz)


def test_quantity_input_without_units():
    @units.quantity_input(lam=ureg.Hz, horizon=ureg.s)
    def expected_arrivals(lam, horizon):
        return (2 * lam * horizon).to(ureg.dimensionless)

    assert_quantity_allclose(expected_arrivals(1.5, 2.0), 6.0 * ureg.dimensionless)


def test_quantity_input_packet_rates():
    @units.quantity_input(lam=ureg.Hz)
    def rate(lam):
        return lam

    assert_quantity_allclose(rate(60 * ureg.pkt / ureg.minute), 1.0 * ureg.Hz)
    assert_quantity_allclose(rate(3.6e3 * ureg.packet / ureg.hour), 1.0 * ureg.Hz)


def test_quantity_input_conversion():
    @units.quantity_input(horizon=ureg.s)
    def horizon_seconds(horizon):
        return horizon

    assert_quantity_allclose(horizon_seconds(1500.0 * ureg.ms), 1.5 * ureg.s)
    assert_quantity_allclose(
        horizon_seconds(1500.0 * ureg.ms), 1500.0 * ureg.ms, convert=True
    )


def test_quantity_input_none_default():
    @units.quantity_input(warmup=ureg.s)
    def warmup_or_none(warmup=None):
        return warmup

    assert warmup_or_none() is None


def test_quantity_input_invalid():
    @units.quantity_input(lam=ureg.Hz)
    def rate(lam):
        return lam

    with pytest.raises(DimensionalityError):
        rate(1.0 * ureg.m)


def test_quantity_input_strict():
    @units.quantity_input(lam=ureg.Hz, _strict=True)
    def rate(lam):
        return lam

    assert_quantity_allclose(rate(1.0 * ureg.Hz), 1.0 * ureg.Hz)
    with pytest.raises(ValueError, match="must be quantities"):
        rate(1.0)


def test_quantity_input_unrecognized_argument():
    with pytest.raises(TypeError, match="got an unexpected keyword argument 'x'"):

        @units.quantity_input(lam=ureg.Hz, x=ureg.s)
        def rate(lam):
            return lam


def test_magnitude():
    assert units.magnitude(2.5) == 2.5
    assert units.magnitude(2.5 * ureg.Hz) == 2.5
    assert isinstance(units.magnitude(jnp.float64(1.0)), float)


def test_array_magnitude():
    assert_allclose(units.array_magnitude([1.0, 2.0], ureg.Hz), jnp.array([1.0, 2.0]))
    assert_allclose(
        units.array_magnitude(jnp.array([60.0, 120.0]) / ureg.minute, ureg.Hz),
        jnp.array([1.0, 2.0]),
    )


def test_rate_params_accept_quantities():
    rates = RateParams(
        lam=60 * ureg.pkt / ureg.minute,
        up=jnp.array([2.0, 1.0, 0.0]) / ureg.s,
        down=jnp.array([1.0, 1.0]) * ureg.Hz,
    )
    assert rates.lam == 1.0
    assert_allclose(rates.up, jnp.array([2.0, 1.0, 0.0]))
