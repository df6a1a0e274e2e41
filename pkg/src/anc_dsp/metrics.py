"""Denoising quality measures.

Ground-truth metrics (:func:`evaluate`) compare a denoised recording with
the clean source it was synthesized from. :func:`band_snr` scores a single
recording with no ground truth from the power it carries in a useful band
versus two noise bands.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.signal as ss

from .core import Signal, SignalError, check_pair

#: finite stand-in for an infinite SNR (perfect reconstruction, empty band)
SATURATED_DB = 300.0


@dataclass(frozen=True)
class MetricsRecord:
    nmse: float
    delta_snr_db: float
    cc: float
    nmae: float
    saturated: bool = False

    FIELDS = ("nmse", "delta_snr_db", "cc", "nmae")

    def as_row(self):
        return [self.nmse, self.delta_snr_db, self.cc, self.nmae]

    def as_dict(self):
        return dict(zip(self.FIELDS, self.as_row()))


def _db_ratio(num, den):
    if num > 0 and den > 0:
        return 10.0 * (np.log10(num) - np.log10(den)), False
    if num > 0:
        return SATURATED_DB, True
    if den > 0:
        return -SATURATED_DB, True
    return 0.0, True


def evaluate(clean: Signal, noisy: Signal, denoised: Signal, discard_samples: int = 0) -> MetricsRecord:
    """NMSE, SNR improvement, Pearson CC and NMAE of ``denoised`` against ``clean``.

    ``discard_samples`` drops an initial adaptation transient from all three
    signals before scoring; the default scores the full recording.
    """
    check_pair(clean, noisy, "clean and noisy")
    check_pair(clean, denoised, "clean and denoised")
    c = clean.samples[discard_samples:]
    x = noisy.samples[discard_samples:]
    d = denoised.samples[discard_samples:]
    if c.size == 0:
        raise SignalError("nothing left to score after discarding the transient")
    clean_energy = float(np.dot(c, c))
    if clean_energy == 0:
        raise SignalError("clean signal has zero power")

    out_err = d - c
    in_err = x - c
    out_energy = float(np.dot(out_err, out_err))
    in_energy = float(np.dot(in_err, in_err))

    nmse = out_energy / clean_energy
    nmae = float(np.sum(np.abs(out_err)) / np.sum(np.abs(c)))

    saturated = False
    if not np.isfinite(out_energy):
        # a runaway (but not yet non-finite) filter output
        delta, saturated = -SATURATED_DB, True
    elif out_energy > 0 and in_energy > 0:
        delta = 10.0 * (np.log10(in_energy) - np.log10(out_energy))
    else:
        snr_in, s_in = _db_ratio(clean_energy, in_energy)
        snr_out, s_out = _db_ratio(clean_energy, out_energy)
        delta = snr_out - snr_in
        saturated = s_in or s_out

    cc = pearson(c, d)
    return MetricsRecord(float(nmse), float(delta), cc, nmae, saturated)


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=float) - np.mean(a)
    b = np.asarray(b, dtype=float) - np.mean(b)
    den = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if den == 0:
        return 0.0
    return float(np.clip(np.dot(a, b) / den, -1.0, 1.0))


def snr_db(clean: Signal, other: Signal) -> float:
    """Ground-truth SNR of ``other`` treating ``other - clean`` as noise."""
    check_pair(clean, other)
    err = other.samples - clean.samples
    return _db_ratio(float(np.dot(clean.samples, clean.samples)), float(np.dot(err, err)))[0]


# -- band-power SNR -------------------------------------------------------

@dataclass(frozen=True)
class BandSpec:
    """Frequency bands in Hz. An upper edge of ``None`` means Nyquist.

    Bands are half-open ``[low, high)``; a band reaching Nyquist includes
    the Nyquist bin.
    """

    lfn: tuple = (0.0, 20.0)
    lf: tuple = (20.0, 200.0)
    hf: tuple = (200.0, None)

    def resolved(self, nyquist: float):
        bands = []
        for lo, hi in (self.lfn, self.lf, self.hf):
            hi = nyquist if hi is None else hi
            if not 0 <= lo < hi <= nyquist:
                raise SignalError(f"band ({lo}, {hi}) is not inside [0, {nyquist:g}] Hz")
            bands.append((float(lo), float(hi)))
        (_, lfn_hi), (lf_lo, lf_hi), (hf_lo, _) = bands
        if not (lfn_hi <= lf_lo and lf_hi <= hf_lo):
            raise SignalError("bands must be disjoint and ordered LFN < LF < HF")
        return bands


PCG_BANDS = BandSpec((0.0, 20.0), (20.0, 200.0), (200.0, None))
ECG_BANDS = BandSpec((0.0, 0.5), (0.5, 40.0), (40.0, None))


class BandSnr(NamedTuple):
    db: float
    saturated: bool
    lf_power: float
    lfn_power: float
    hf_power: float


def welch_psd(signal: Signal, segment_s: float = 1.0):
    """Hann-windowed averaged periodogram, 50 % overlap, no detrending."""
    fs = signal.sample_rate_hz
    nperseg = int(round(segment_s * fs))
    if len(signal) < nperseg:
        raise SignalError(
            f"band SNR needs at least {segment_s:g} s of signal, got {signal.duration_s:.3f} s"
        )
    return ss.welch(signal.samples, fs=fs, window="hann", nperseg=nperseg,
                    noverlap=nperseg // 2, detrend=False, scaling="density")


def band_power(freqs, psd, lo, hi, nyquist) -> float:
    df = freqs[1] - freqs[0]
    mask = (freqs >= lo) & ((freqs < hi) | ((hi >= nyquist) & (freqs <= hi)))
    return float(np.sum(psd[mask]) * df)


def band_snr(signal: Signal, bands: BandSpec = PCG_BANDS, segment_s: float = 1.0) -> BandSnr:
    """``10 log10(P_LF / (P_LFN + P_HF))`` from a Welch power spectrum.

    Returns a saturated value (with ``saturated=True``) instead of raising
    when either side of the ratio is zero.
    """
    nyquist = signal.sample_rate_hz / 2
    (lfn, lf, hf) = bands.resolved(nyquist)
    freqs, psd = welch_psd(signal, segment_s)
    p_lfn = band_power(freqs, psd, *lfn, nyquist)
    p_lf = band_power(freqs, psd, *lf, nyquist)
    p_hf = band_power(freqs, psd, *hf, nyquist)
    db, saturated = _db_ratio(p_lf, p_lfn + p_hf)
    return BandSnr(float(db), saturated, p_lf, p_lfn, p_hf)
