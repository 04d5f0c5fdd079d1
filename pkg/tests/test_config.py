from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qjfeedback.config import (
    PRESETS, ConfigError, RunConfig, format_config, parse_config, parse_duration, parse_rate,
    preset_config,
)
from qjfeedback.controller import FeedbackConfig
from qjfeedback.ensemble import LifetimeDistribution
from qjfeedback.photophysics import PhotophysicsParams


class TestUnits:
    @pytest.mark.parametrize("text,value", [
        ("70us", 7e-05), ("400us", 4e-04), ("600ns", 6e-07), ("600 ns", 6e-07),
        ("1.5ms", 1.5e-3), ("2s", 2.0), ("2", 2.0), ("70µs", 7e-05), ("1e2us", 1e-4),
    ])
    def test_duration(self, text, value):
        assert parse_duration(text) == value

    @pytest.mark.parametrize("text,value", [
        ("30k/s", 3e4), ("1e8/s", 1e8), ("2M/s", 2e6), ("55", 55.0),
    ])
    def test_rate(self, text, value):
        assert parse_rate(text) == value

    def test_mismatch(self):
        with pytest.raises(ValueError, match="unit mismatch"):
            parse_duration("3k/s")
        with pytest.raises(ValueError, match="unit mismatch"):
            parse_rate("3us")
        with pytest.raises(ValueError):
            parse_duration("abc")


class TestParse:
    def test_default_feedback_values(self):
        cfg = parse_config("[photophysics]\npreset = dii\n[feedback]\ntau_d = 70us\n"
                           "tau_off = 400us\n")
        assert cfg.feedback.tau_d == 7.0e-5
        assert cfg.feedback.tau_off == 4.0e-4
        assert cfg.params == preset_config("dii").params

    def test_negative_tau_d(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("[photophysics]\npreset = dii\n[feedback]\ntau_d = -1us\n")
        assert any("tau_d" in m for _, _, m in exc.value.problems)
        assert exc.value.problems[0][0] == 4

    def test_all_errors_reported(self):
        text = ("[photophysics]\npreset = dii\nk_bleach = 5us\n"
                "[feedback]\ntau_d = 70us\ntau_dd = 1us\n"
                "[ensemble]\nn_molecules = 0\nhorizon\n[weird]\n")
        with pytest.raises(ConfigError) as exc:
            parse_config(text)
        lines = [ln for ln, _, _ in exc.value.problems]
        msgs = " | ".join(m for _, _, m in exc.value.problems)
        assert lines == sorted(lines)
        assert {3, 6, 8, 9, 10} <= set(lines)
        assert "unit mismatch" in msgs and "unknown key 'tau_dd'" in msgs
        assert "syntax error" in msgs and "unknown section" in msgs
        assert "line 6" in str(exc.value)

    def test_column_of_value(self):
        with pytest.raises(ConfigError) as exc:
            parse_config("[feedback]\ntau_off =   3k/s\n")
        (ln, col, _), = [p for p in exc.value.problems if "tau_off" in p[2]]
        assert (ln, col) == (2, 13)

    def test_missing_rates_without_preset(self):
        with pytest.raises(ConfigError, match="k_exc"):
            parse_config("[feedback]\ntau_d = 70us\n")

    def test_explicit_params(self):
        text = ("[photophysics]\nk_exc = 1e8/s\nk_fl = 1e8/s\nk_isc = 1k/s\ntau_t = 200us\n"
                "eta = 0.001\nk_bleach = 10/s\n[ensemble]\nlifetime = fixed\nseed = 9\n")
        cfg = parse_config(text)
        assert cfg.params.k_isc == 1000.0
        assert cfg.lifetime == LifetimeDistribution.fixed(2e-4)
        assert cfg.master_seed == 9 and cfg.preset is None

    def test_duplicate_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("[photophysics]\npreset = dii\n[feedback]\ntau_d = 1us\ntau_d = 2us\n")

    def test_lifetime_mean(self):
        cfg = parse_config("[photophysics]\npreset = dii\n[ensemble]\ntau_t_mean = 240us\n"
                           "sigma_log = 0.75\n")
        assert cfg.lifetime.mean == pytest.approx(2.4e-4)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_round_trip(name):
    cfg = preset_config(name)
    assert parse_config(format_config(cfg)) == cfg


def test_terrylene_lifetime():
    assert preset_config("terrylene").lifetime.nominal == 217e-6


positive = st.floats(1e-9, 1e9, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(positive, positive, st.floats(0, 1e6), st.floats(1e-9, 10), st.floats(0, 1),
       st.floats(0, 1e6), st.floats(1e-9, 1), st.floats(1e-9, 1), st.floats(0, 1e-3),
       st.booleans(), st.integers(1, 10 ** 6), st.integers(0, 2 ** 64 - 1),
       st.sampled_from(["fixed", "lognormal", "empirical"]), st.sampled_from(["exact", "aggregated"]))
def test_round_trip(k_exc, k_fl, k_isc, tau_t, eta, k_bleach, tau_d, tau_off, latency,
                    enabled, n, seed, kind, path):
    import warnings
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        params = PhotophysicsParams(k_exc, k_fl, k_isc, tau_t, eta, k_bleach)
    life = {"fixed": LifetimeDistribution.fixed(tau_t),
            "lognormal": LifetimeDistribution.lognormal(tau_t, 0.37),
            "empirical": LifetimeDistribution.empirical([tau_t, tau_t * 3.3])}[kind]
    cfg = RunConfig(params=params, lifetime=life,
                    feedback=FeedbackConfig(tau_d, tau_off, latency, enabled), n_molecules=n,
                    horizon=123.25, master_seed=seed, path=path, min_rate=None,
                    out_dir="out/x")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert parse_config(format_config(cfg)) == cfg
