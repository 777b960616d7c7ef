import json

import numpy as np
import pytest

from cohtree.errors import ValidationError
from cohtree.metrics import coherence_distance, pearson_correlation
from cohtree.series import (
    align_and_fill,
    read_calendar_csv,
    read_prices_csv,
    segment_sessions,
    standardize,
    to_log_returns,
)
from cohtree.graph import EMPTY_LABELING, read_labels_csv
from cohtree.spectral import SpectralConfig
from cohtree.synth import (
    GeneratorSpec,
    SyntheticMarket,
    ar1,
    delayed_copy,
    factor_market,
    spec_manifest,
    white_noise,
    write_dataset,
)


class TestSpecValidation:
    def test_unknown_kind(self):
        with pytest.raises(ValidationError):
            GeneratorSpec(kind="brownian", length=128, seed=0)

    def test_short_length(self):
        with pytest.raises(ValidationError):
            GeneratorSpec(kind="white", length=1, seed=0)

    def test_nonstationary_phi(self):
        with pytest.raises(ValidationError):
            GeneratorSpec(kind="ar1", length=128, seed=0, phi=1.0)
        with pytest.raises(ValidationError):
            GeneratorSpec(kind="ar1", length=128, seed=0, phi=-1.5)

    def test_delay_out_of_range(self):
        with pytest.raises(ValidationError):
            GeneratorSpec(kind="delayed_copy", length=128, seed=0, delay=128)

    def test_group_size_too_small(self):
        with pytest.raises(ValidationError):
            GeneratorSpec(kind="factor_market", length=128, seed=0, group_size=1)

    def test_loading_out_of_range(self):
        for bad in (0.0, 1.2, -0.5):
            with pytest.raises(ValidationError):
                GeneratorSpec(kind="factor_market", length=128, seed=0, loading=bad)

    def test_loading_tuple_length_checked(self):
        with pytest.raises(ValidationError):
            GeneratorSpec(
                kind="factor_market", length=128, seed=0, n_groups=3, loading=(0.9, 0.5)
            )

    def test_nonpositive_noise(self):
        with pytest.raises(ValidationError):
            GeneratorSpec(kind="factor_market", length=128, seed=0, noise=0.0)


class TestWhiteNoise:
    def test_deterministic(self):
        spec = GeneratorSpec(kind="white", length=4096, seed=5)
        assert np.array_equal(white_noise(spec), white_noise(spec))

    def test_different_seeds_differ(self):
        a = white_noise(GeneratorSpec(kind="white", length=256, seed=0))
        b = white_noise(GeneratorSpec(kind="white", length=256, seed=1))
        assert not np.array_equal(a, b)

    def test_lag_zero_autocorrelation_is_one(self):
        z = standardize(white_noise(GeneratorSpec(kind="white", length=8192, seed=2)))
        assert np.mean(z * z) == pytest.approx(1.0, abs=1e-12)

    def test_short_lags_decorrelated(self):
        n = 8192
        bound = 4.0 / np.sqrt(n)
        for seed in range(100):
            z = standardize(white_noise(GeneratorSpec(kind="white", length=n, seed=seed)))
            for tau in range(1, 11):
                r = float(np.dot(z[:-tau], z[tau:]) / n)
                assert abs(r) < bound


class TestDelayedCopy:
    def test_zero_delay_identity(self):
        x = white_noise(GeneratorSpec(kind="white", length=512, seed=3))
        assert np.array_equal(delayed_copy(x, 0), x)

    def test_multiset_preserved(self):
        x = white_noise(GeneratorSpec(kind="white", length=512, seed=4))
        assert np.array_equal(np.sort(delayed_copy(x, 17)), np.sort(x))

    def test_shift_relation(self):
        x = white_noise(GeneratorSpec(kind="white", length=64, seed=5))
        y = delayed_copy(x, 3)
        assert np.array_equal(y[3:], x[:-3])
        assert np.array_equal(delayed_copy(delayed_copy(x, 63), 1), x)

    def test_out_of_range(self):
        x = np.zeros(16)
        with pytest.raises(ValidationError):
            delayed_copy(x, 16)
        with pytest.raises(ValidationError):
            delayed_copy(x, -1)


class TestAr1:
    def test_deterministic(self):
        spec = GeneratorSpec(kind="ar1", length=2048, seed=6, phi=0.7)
        assert np.array_equal(ar1(spec), ar1(spec))

    def test_unit_variance(self):
        for seed in range(10):
            x = ar1(GeneratorSpec(kind="ar1", length=8192, seed=seed, phi=0.6))
            assert abs(x.var() - 1.0) < 0.15

    def test_lag_one_autocorrelation_near_phi(self):
        for seed in range(10):
            x = ar1(GeneratorSpec(kind="ar1", length=8192, seed=seed, phi=0.6))
            z = standardize(x)
            r1 = float(np.dot(z[:-1], z[1:]) / len(z))
            assert abs(r1 - 0.6) < 0.1

    def test_phi_zero_is_white(self):
        spec = GeneratorSpec(kind="ar1", length=1024, seed=7, phi=0.0)
        x = ar1(spec)
        z = standardize(x)
        r1 = float(np.dot(z[:-1], z[1:]) / len(z))
        assert abs(r1) < 4.0 / np.sqrt(1024)


class TestFactorMarket:
    def spec(self, **kw):
        base = dict(kind="factor_market", length=2048, seed=0)
        base.update(kw)
        return GeneratorSpec(**base)

    def test_symbols_and_labels(self):
        market = factor_market(self.spec())
        assert sorted(market.series) == [
            "A0", "A1", "A2", "A3",
            "B0", "B1", "B2", "B3",
            "C0", "C1", "C2", "C3",
        ]
        # one sector per group, consistent within the group
        sectors = {market.labels.sector_of(s) for s in ("A0", "A1", "A2", "A3")}
        assert len(sectors) == 1
        assert market.labels.sector_of("A0") != market.labels.sector_of("B0")

    def test_deterministic(self):
        a = factor_market(self.spec())
        b = factor_market(self.spec())
        for sym in a.series:
            assert np.array_equal(a.series[sym], b.series[sym])

    def test_outputs_standardized(self):
        market = factor_market(self.spec())
        for x in market.series.values():
            assert abs(x.mean()) < 1e-9
            assert abs(x.var() - 1.0) < 1e-9

    def test_zero_lag_tiny_noise_fully_correlated(self):
        market = factor_market(self.spec(lag=0, noise=1e-12, loading=0.9))
        rho = pearson_correlation(market.series["A0"], market.series["A1"])
        assert rho > 1.0 - 1e-9

    def test_default_noise_of_unit_loading_rejected(self):
        with pytest.raises(ValidationError) as err:
            factor_market(self.spec(loading=1.0))
        assert "noise" in str(err.value)
        factor_market(self.spec(loading=1.0, noise=0.1))  # explicit level is fine

    def test_per_group_loadings(self):
        market = factor_market(self.spec(n_groups=2, loading=(0.95, 0.4), lag=0))
        rho_a = pearson_correlation(market.series["A0"], market.series["A1"])
        rho_b = pearson_correlation(market.series["B0"], market.series["B1"])
        assert rho_a > rho_b + 0.2

    def test_wrong_kind_rejected(self):
        with pytest.raises(ValidationError):
            factor_market(GeneratorSpec(kind="white", length=128, seed=0))

    def test_within_group_coherent_across_groups_not(self):
        cfg = SpectralConfig()
        for seed in range(5):
            market = factor_market(self.spec(length=8192, seed=seed, n_groups=2))
            within = coherence_distance(market.series["A0"], market.series["A1"], cfg)
            across = coherence_distance(market.series["A0"], market.series["B0"], cfg)
            assert across >= 0.9
            assert within + 0.2 < across


class TestWriteDataset:
    def small_market(self, length=256, sessions=2):
        spec = GeneratorSpec(
            kind="factor_market", length=length, seed=9, n_groups=2, group_size=2
        )
        return factor_market(spec), spec, sessions

    def test_round_trip_recovers_returns(self, tmp_path):
        market, spec, sessions = self.small_market()
        paths = write_dataset(
            tmp_path, market.series, market.labels, sessions, 120.0, spec_manifest(spec)
        )
        series, bad = read_prices_csv(paths["prices"])
        assert bad == []
        calendar = read_calendar_csv(paths["calendar"])
        assert len(calendar) == sessions
        per = spec.length // sessions
        for sym, original in market.series.items():
            segments, short = segment_sessions(series[sym], calendar, min_samples=2)
            assert short == []
            for s in range(sessions):
                grid, values, missing = align_and_fill(
                    {sym: segments[s]}, calendar.sessions[s], 120.0
                )
                assert missing == []
                got = standardize(to_log_returns(values[sym]))
                want = standardize(original[s * per:(s + 1) * per])
                assert np.allclose(got, want, atol=1e-7)

    def test_labels_round_trip(self, tmp_path):
        market, spec, sessions = self.small_market()
        paths = write_dataset(
            tmp_path, market.series, market.labels, sessions, 120.0, spec_manifest(spec)
        )
        labels = read_labels_csv(paths["labels"])
        for sym in market.series:
            assert labels.sector_of(sym) == market.labels.sector_of(sym)

    def test_manifest_records_seed(self, tmp_path):
        market, spec, sessions = self.small_market()
        paths = write_dataset(
            tmp_path, market.series, market.labels, sessions, 120.0, spec_manifest(spec)
        )
        manifest = json.loads(open(paths["manifest"]).read())
        assert manifest["generator"]["seed"] == 9
        assert manifest["sessions"] == sessions
        assert manifest["symbols"] == sorted(market.series)

    def test_long_sessions_do_not_collide(self, tmp_path):
        # 1280 returns at 120 s outgrow one day; sessions must stay disjoint
        market, spec, _ = self.small_market(length=2560, sessions=2)
        paths = write_dataset(
            tmp_path, market.series, market.labels, 2, 120.0, spec_manifest(spec)
        )
        read_prices_csv(paths["prices"])  # duplicate timestamps would raise
        cal = read_calendar_csv(paths["calendar"])
        assert cal.sessions[1][0] > cal.sessions[0][1]

    def test_indivisible_length_rejected(self, tmp_path):
        market, spec, _ = self.small_market(length=256)
        with pytest.raises(ValidationError):
            write_dataset(
                tmp_path, market.series, market.labels, 3, 120.0, spec_manifest(spec)
            )

    def test_empty_series_rejected(self, tmp_path):
        with pytest.raises(ValidationError):
            write_dataset(tmp_path, {}, EMPTY_LABELING, 1, 120.0, {})


class TestManifest:
    def test_loading_tuple_serializable(self):
        spec = GeneratorSpec(
            kind="factor_market", length=128, seed=0, n_groups=2, loading=(0.9, 0.5)
        )
        m = spec_manifest(spec)
        assert m["generator"]["loading"] == [0.9, 0.5]
        json.dumps(m)  # must be JSON-clean
