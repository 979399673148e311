import pytest

from eeopt.errors import DomainError
from eeopt.units import (
    db_to_linear,
    dbm_to_watts,
    linear_to_db,
    parse_distance,
    parse_frequency,
    parse_gain_db,
    parse_noise_density,
    parse_power,
    parse_rate,
    parse_scalar,
    watts_to_dbm,
)


class TestConversions:
    def test_23_dbm_round_trip(self):
        w = dbm_to_watts(23.0)
        assert w == pytest.approx(0.1995262315, rel=1e-9)
        assert watts_to_dbm(w) == pytest.approx(23.0, rel=1e-9)

    def test_noise_floor_is_thermal_density_times_bandwidth_times_figure(self):
        # -174 dBm/Hz over 500 kHz with a 3 dB noise figure
        density = dbm_to_watts(-174.0)
        assert density == pytest.approx(3.9810717055349695e-21, rel=1e-9)
        noise = density * 5e5 * db_to_linear(3.0)
        assert noise == pytest.approx(3.971641173621418e-15, rel=1e-9)
        assert watts_to_dbm(noise) == pytest.approx(-114.0103, abs=1e-4)

    def test_db_round_trip(self):
        for x in (0.5, 1.0, 2.0, 123.4):
            assert db_to_linear(linear_to_db(x)) == pytest.approx(x, rel=1e-12)

    def test_nonpositive_rejected(self):
        with pytest.raises(DomainError):
            watts_to_dbm(0.0)
        with pytest.raises(DomainError):
            linear_to_db(-1.0)


class TestParsers:
    def test_power_units(self):
        assert parse_power("23 dBm") == pytest.approx(0.1995262315, rel=1e-9)
        assert parse_power("0.5 W") == 0.5
        assert parse_power("200 mW") == pytest.approx(0.2)
        assert parse_power(0.25) == 0.25
        assert parse_power("-10 dBW") == pytest.approx(0.1)

    def test_frequency_units(self):
        assert parse_frequency("5 GHz") == 5e9
        assert parse_frequency("500 kHz") == 5e5
        assert parse_frequency("500 KHz") == 5e5
        assert parse_frequency(1e6) == 1e6

    def test_ratio_units(self):
        assert parse_gain_db("3 dB") == pytest.approx(1.9952623149688795)
        assert parse_gain_db(2.0) == 2.0

    def test_noise_density(self):
        assert parse_noise_density("-174 dBm/Hz") == pytest.approx(3.9810717055349695e-21)
        assert parse_noise_density(1e-20) == 1e-20

    def test_distance_and_rate(self):
        assert parse_distance("20 m") == 20.0
        assert parse_distance("1.5 km") == 1500.0
        assert parse_rate("2 Mbit/s") == 2e6
        assert parse_rate(100.0) == 100.0

    def test_scalar_rejects_units(self):
        assert parse_scalar("42") == 42.0
        with pytest.raises(DomainError):
            parse_scalar("42 m")

    def test_unknown_unit_rejected(self):
        with pytest.raises(DomainError):
            parse_power("3 parsec")
        with pytest.raises(DomainError):
            parse_frequency("abc")
