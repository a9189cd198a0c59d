import math
import random

import pytest

from manetsim.radio import (
    ChannelMode,
    DEFAULT_RADIO_PARAMS,
    NonPositiveDistance,
    NonPositivePower,
    PowerSample,
    RadioParams,
    crossover_distance,
    estimate_distance_friis,
    received_power,
)

PARAMS = RadioParams(tx_power=0.28183815, tx_gain=1.0, rx_gain=1.0,
                     wavelength=0.328227, system_loss=1.0,
                     tx_antenna_height=1.5, rx_antenna_height=1.5)

# Reference rows: (true distance, free-space-inverted estimate) pairs from a
# published two-ray measurement campaign; distances in meters.
REFERENCE_ROWS = [
    (165.397, 317.654), (277.895, 897.138), (299.47, 1041.43),
    (351.078, 1430.93), (356.321, 1474.36), (358.238, 1490.13),
    (152.84, 271.179), (238.948, 662.809), (258.118, 773.428),
    (276.525, 887.669), (277.731, 896.079), (280.446, 913.022),
    (315.33, 1154.29), (318.399, 1176.86), (371.712, 1603.97),
    (380.623, 1681.8), (308.585, 1105.44), (316.332, 1161.63),
    (103.368, 124.039), (187.032, 406.083), (194.023, 437.009),
    (206.903, 496.956), (224.54, 585.286), (256.821, 765.673),
    (309.608, 1112.77), (371.486, 1602.02), (378.926, 1666.83),
    (66.4831, 66.4831), (136.741, 217.059), (299.018, 1038.29),
]


class TestReceivedPower:
    def test_inverse_square_in_free_space(self):
        p1 = received_power(PARAMS, ChannelMode.FRIIS, 50.0).rx_power
        p2 = received_power(PARAMS, ChannelMode.FRIIS, 100.0).rx_power
        assert p2 == pytest.approx(p1 / 4.0, rel=1e-12)

    def test_free_space_value_at_100m(self):
        # Expected value evaluated beforehand with a standalone scalar
        # computation of the link-budget formula.
        sample = received_power(PARAMS, ChannelMode.FRIIS, 100.0)
        assert sample.rx_power == pytest.approx(1.922775846750218e-08, rel=1e-12)

    def test_two_ray_continuous_at_crossover(self):
        dc = crossover_distance(PARAMS)
        friis = received_power(PARAMS, ChannelMode.FRIIS, dc).rx_power
        tworay = received_power(PARAMS, ChannelMode.TWO_RAY_CROSSOVER, dc).rx_power
        assert abs(friis - tworay) / friis < 1e-12
        # Just beyond the crossover the two-ray branch takes over smoothly.
        eps = dc * 1e-9
        above = received_power(PARAMS, ChannelMode.TWO_RAY_CROSSOVER, dc + eps)
        assert abs(above.rx_power - friis) / friis < 1e-6

    def test_fourth_power_decay_beyond_crossover(self):
        p1 = received_power(PARAMS, ChannelMode.TWO_RAY_CROSSOVER, 200.0).rx_power
        p2 = received_power(PARAMS, ChannelMode.TWO_RAY_CROSSOVER, 400.0).rx_power
        assert p1 / p2 == pytest.approx(16.0, rel=1e-12)

    def test_strictly_decreasing_in_distance(self):
        rng = random.Random(2024)
        distances = sorted(rng.uniform(0.5, 2000.0) for _ in range(200))
        for mode in ChannelMode:
            powers = [received_power(PARAMS, mode, d).rx_power for d in distances]
            assert all(a > b for a, b in zip(powers, powers[1:]))

    def test_rejects_non_positive_distance(self):
        with pytest.raises(NonPositiveDistance):
            received_power(PARAMS, ChannelMode.FRIIS, 0.0)
        with pytest.raises(NonPositiveDistance):
            received_power(PARAMS, ChannelMode.TWO_RAY_CROSSOVER, -3.0)


class TestEstimateDistance:
    def test_round_trip_over_free_space(self):
        for d in [1.0, 2.5, 10.0, 66.4831, 100.0, 250.0, 999.0, 1000.0]:
            est = estimate_distance_friis(
                PARAMS, received_power(PARAMS, ChannelMode.FRIIS, d))
            assert abs(est - d) / d < 1e-9

    def test_round_trip_wide_range(self):
        rng = random.Random(7)
        for _ in range(2000):
            d = math.exp(rng.uniform(math.log(0.1), math.log(10000.0)))
            est = estimate_distance_friis(
                PARAMS, received_power(PARAMS, ChannelMode.FRIIS, d))
            assert abs(est - d) / d < 1e-9

    def test_reference_identity_below_crossover(self):
        est = estimate_distance_friis(
            PARAMS, received_power(PARAMS, ChannelMode.TWO_RAY_CROSSOVER, 66.4831))
        assert est == pytest.approx(66.4831, rel=1e-9)

    @pytest.mark.parametrize("distance,expected", [
        (103.368, 124.039),
        (165.397, 317.654),
        (299.47, 1041.43),
    ])
    def test_reference_overestimates_beyond_crossover(self, distance, expected):
        est = estimate_distance_friis(
            PARAMS, received_power(PARAMS, ChannelMode.TWO_RAY_CROSSOVER, distance))
        assert est == pytest.approx(expected, rel=2e-3)
        assert est == pytest.approx(distance ** 2 / crossover_distance(PARAMS),
                                    rel=1e-9)

    def test_overestimation_law_beyond_crossover(self):
        dc = crossover_distance(PARAMS)
        rng = random.Random(99)
        for _ in range(500):
            d = rng.uniform(dc * 1.0001, 5000.0)
            est = estimate_distance_friis(
                PARAMS, received_power(PARAMS, ChannelMode.TWO_RAY_CROSSOVER, d))
            assert abs(est - d * d / dc) / est < 1e-9

    def test_strictly_decreasing_in_power(self):
        rng = random.Random(5)
        powers = sorted(10 ** rng.uniform(-14, -3) for _ in range(200))
        ests = [estimate_distance_friis(PARAMS, PowerSample(p)) for p in powers]
        assert all(a > b for a, b in zip(ests, ests[1:]))

    def test_rejects_non_positive_power(self):
        with pytest.raises(NonPositivePower):
            PowerSample(0.0)
        with pytest.raises(NonPositivePower):
            PowerSample(-1e-9)
        with pytest.raises(NonPositivePower):
            PowerSample(float("inf"))


class TestCrossoverDistance:
    def test_default_value(self):
        assert crossover_distance(PARAMS) == pytest.approx(86.14, abs=0.01)

    def test_matches_fit_of_reference_rows(self):
        # Least-squares fit of c in estimate = d^2/c over the far rows; the
        # model constant must land inside the fitted band.
        far = [(d, e) for d, e in REFERENCE_ROWS if d > 90.0]
        c_fit = sum(d ** 4 for d, _ in far) / sum(d * d * e for d, e in far)
        assert 86.0 <= c_fit <= 86.2
        assert crossover_distance(PARAMS) == pytest.approx(c_fit, rel=2e-3)

    def test_linear_in_tx_height(self):
        doubled = RadioParams(tx_power=PARAMS.tx_power,
                              wavelength=PARAMS.wavelength,
                              tx_antenna_height=3.0, rx_antenna_height=1.5)
        assert crossover_distance(doubled) == pytest.approx(
            2.0 * crossover_distance(PARAMS), rel=1e-12)

    def test_inverse_linear_in_wavelength(self):
        doubled = RadioParams(tx_power=PARAMS.tx_power,
                              wavelength=2 * PARAMS.wavelength)
        assert crossover_distance(doubled) == pytest.approx(
            crossover_distance(PARAMS) / 2.0, rel=1e-12)


class TestRadioParams:
    def test_default_params_match_reference_setup(self):
        assert DEFAULT_RADIO_PARAMS.tx_power == pytest.approx(0.28183815)
        assert DEFAULT_RADIO_PARAMS.wavelength == pytest.approx(0.328227)
        assert DEFAULT_RADIO_PARAMS.system_loss == 1.0

    @pytest.mark.parametrize("kwargs", [
        {"tx_power": 0.0},
        {"tx_power": 1.0, "tx_gain": -1.0},
        {"tx_power": 1.0, "wavelength": 0.0},
        {"tx_power": 1.0, "system_loss": 0.5},
        {"tx_power": 1.0, "tx_antenna_height": 0.0},
    ])
    def test_rejects_bad_fields(self, kwargs):
        with pytest.raises(ValueError):
            RadioParams(**kwargs)
