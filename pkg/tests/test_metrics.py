import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anc_dsp.core import Signal, SignalError
from anc_dsp.metrics import (ECG_BANDS, PCG_BANDS, SATURATED_DB, BandSpec, MetricsRecord, band_snr, evaluate,
                             pearson, snr_db)

from oracles import pearson_bruteforce, periodogram_band_snr


def triple(rng, n=2000, noise=0.5):
    c = rng.standard_normal(n)
    x = c + noise * rng.standard_normal(n)
    d = c + 0.1 * rng.standard_normal(n)
    return Signal(c, 2000), Signal(x, 2000), Signal(d, 2000)


class TestEvaluate:
    def test_formulas(self, rng):
        c, x, d = triple(rng)
        m = evaluate(c, x, d)
        cc, xx, dd = c.samples, x.samples, d.samples
        assert m.nmse == pytest.approx(np.sum((dd - cc) ** 2) / np.sum(cc ** 2), rel=1e-12)
        snr_out = 10 * np.log10(np.sum(cc ** 2) / np.sum((dd - cc) ** 2))
        snr_in = 10 * np.log10(np.sum(cc ** 2) / np.sum((xx - cc) ** 2))
        assert m.delta_snr_db == pytest.approx(snr_out - snr_in, abs=1e-10)
        assert m.cc == pytest.approx(pearson_bruteforce(cc, dd), abs=1e-12)
        assert m.nmae == pytest.approx(np.sum(np.abs(dd - cc)) / np.sum(np.abs(cc)), rel=1e-12)

    def test_perfect_reconstruction(self, rng):
        c, x, _ = triple(rng)
        m = evaluate(c, x, c)
        assert (m.nmse, m.cc, m.nmae) == (0.0, 1.0, 0.0)
        assert m.delta_snr_db == SATURATED_DB - snr_db(c, x) and m.saturated

    def test_identity_denoiser(self, rng):
        c, x, _ = triple(rng)
        m = evaluate(c, x, x)
        assert m.delta_snr_db == 0.0
        noise = x.samples - c.samples
        assert m.nmse == pytest.approx(np.sum(noise ** 2) / np.sum(c.samples ** 2), rel=1e-12)

    def test_doubled_clean(self, rng):
        c, x, _ = triple(rng)
        m = evaluate(c, x, Signal(2 * c.samples, 2000))
        assert m.nmse == pytest.approx(1.0, rel=1e-14)
        assert m.cc == pytest.approx(1.0, abs=1e-14)
        assert m.nmae == pytest.approx(1.0, rel=1e-14)

    def test_errors(self, rng):
        c, x, d = triple(rng)
        with pytest.raises(SignalError):
            evaluate(Signal(np.zeros(2000), 2000), x, d)
        with pytest.raises(SignalError):
            evaluate(c, x, Signal(d.samples[:-1], 2000))

    def test_discard(self, rng):
        c, x, d = triple(rng)
        m = evaluate(c, x, d, discard_samples=500)
        ref = evaluate(Signal(c.samples[500:], 2000), Signal(x.samples[500:], 2000), Signal(d.samples[500:], 2000))
        assert m == ref

    def test_runaway_output_is_saturated(self, rng):
        c, x, _ = triple(rng)
        m = evaluate(c, x, Signal(np.full(2000, 1e200), 2000))
        assert m.delta_snr_db == -SATURATED_DB and m.saturated

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1e3))
    def test_scale_invariance(self, seed, k):
        c, x, d = triple(np.random.default_rng(seed), n=200)
        a = evaluate(c, x, d)
        b = evaluate(*(Signal(k * s.samples, 2000) for s in (c, x, d)))
        for f in MetricsRecord.FIELDS:
            assert getattr(b, f) == pytest.approx(getattr(a, f), rel=1e-9, abs=1e-9)

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1))
    def test_delta_antisymmetric(self, seed):
        c, x, d = triple(np.random.default_rng(seed), n=200)
        assert evaluate(c, x, d).delta_snr_db == -evaluate(c, d, x).delta_snr_db

    def test_row_order(self):
        m = MetricsRecord(0.1, 2.0, 0.9, 0.3)
        assert m.as_row() == [0.1, 2.0, 0.9, 0.3]
        assert list(m.as_dict()) == ["nmse", "delta_snr_db", "cc", "nmae"]


@settings(max_examples=100)
@given(st.integers(0, 2**32 - 1))
def test_pearson_bruteforce(seed):
    a, b = np.random.default_rng(seed).standard_normal((2, 100))
    assert pearson(a, b) == pytest.approx(pearson_bruteforce(a, b), abs=1e-12)


def test_pearson_degenerate():
    assert pearson(np.ones(5), np.arange(5.0)) == 0.0


class TestBandSnr:
    t = np.arange(10 * 2000) / 2000

    def test_in_band_tone(self):
        assert band_snr(Signal(np.sin(2 * np.pi * 100 * self.t), 2000)).db > 30

    def test_out_of_band_tone(self):
        assert band_snr(Signal(np.sin(2 * np.pi * 500 * self.t), 2000)).db < -30

    def test_equal_power_tones(self):
        x = np.sin(2 * np.pi * 100 * self.t) + np.sin(2 * np.pi * 500 * self.t)
        assert abs(band_snr(Signal(x, 2000)).db) < 0.5

    @pytest.mark.parametrize("c", [-3.0, 1e-4, 7.5])
    def test_scale_invariant(self, rng, c):
        x = rng.standard_normal(6000)
        assert band_snr(Signal(c * x, 2000)).db == pytest.approx(band_snr(Signal(x, 2000)).db, abs=1e-9)

    @pytest.mark.parametrize("fs,bands", [(2000.0, PCG_BANDS), (500.0, ECG_BANDS)])
    def test_matches_periodogram_oracle(self, rng, fs, bands):
        x = np.cumsum(rng.standard_normal(int(7.3 * fs))) * 0.01 + rng.standard_normal(int(7.3 * fs))
        ours = band_snr(Signal(x, fs), bands).db
        ref = periodogram_band_snr(x, fs, bands.lfn, bands.lf, bands.hf)
        assert ours == pytest.approx(ref, abs=1e-9)

    def test_nyquist_bin_counted_in_hf(self):
        n = 4000
        x = np.cos(np.pi * np.arange(n))  # exactly Nyquist
        r = band_snr(Signal(x, 2000))
        assert r.hf_power > 0 and r.lf_power < 1e-20

    def test_zero_signal_saturates(self):
        r = band_snr(Signal(np.zeros(4000), 2000))
        assert r.saturated and r.db == 0.0

    def test_too_short(self):
        with pytest.raises(SignalError):
            band_snr(Signal(np.zeros(1999), 2000))

    @pytest.mark.parametrize("spec", [
        BandSpec((0, 30), (20, 200), (200, None)),
        BandSpec((0, 20), (20, 2000), (2000, None)),
        BandSpec((0, 20), (200, 20), (200, None)),
    ])
    def test_invalid_bands(self, spec):
        with pytest.raises(SignalError):
            band_snr(Signal(np.zeros(4000), 2000), spec)
