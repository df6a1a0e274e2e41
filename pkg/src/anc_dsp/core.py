"""Signal container and sample arithmetic shared by the rest of the package."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class AncError(Exception):
    """Base class for errors raised by anc_dsp."""


class SignalError(AncError, ValueError):
    """Invalid signal contents (empty, all zero, non-finite, bad rate)."""


class SampleRateError(AncError, ValueError):
    """An invalid sample rate, or two signals (or a signal and a filter) that disagree on it."""


@dataclass(frozen=True, eq=False)
class Signal:
    """A uniformly sampled single-channel recording.

    Samples are stored as a read-only float64 array; construct a new
    ``Signal`` rather than editing one in place.
    """

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        x = np.array(self.samples, dtype=np.float64, copy=True)
        if x.ndim != 1:
            raise SignalError(f"a Signal is one channel (1-D), got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise SignalError("signal contains NaN or Inf samples")
        fs = float(self.sample_rate_hz)
        if not (fs > 0 and np.isfinite(fs)):
            raise SampleRateError(f"sample rate must be positive, got {self.sample_rate_hz!r}")
        x.flags.writeable = False
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "sample_rate_hz", fs)

    def __len__(self):
        return self.samples.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Signal):
            return NotImplemented
        return (
            self.sample_rate_hz == other.sample_rate_hz
            and np.array_equal(self.samples, other.samples)
        )

    __hash__ = None

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def with_samples(self, samples) -> "Signal":
        """Same type and sample rate, new samples."""
        return type(self)(samples, self.sample_rate_hz)


class ReferenceSignal(Signal):
    """The noise-correlated reference channel fed to an adaptive filter."""


def check_pair(a: Signal, b: Signal, what: str = "signals") -> None:
    """Raise if two signals differ in length or sample rate."""
    if a.sample_rate_hz != b.sample_rate_hz:
        raise SampleRateError(
            f"{what} differ in sample rate: {a.sample_rate_hz} vs {b.sample_rate_hz}"
        )
    if len(a) != len(b):
        raise SignalError(f"{what} differ in length: {len(a)} vs {len(b)}")


def normalize(signal: Signal) -> Signal:
    """Scale a signal so its peak absolute amplitude is exactly 1."""
    x = signal.samples
    if x.size == 0:
        raise SignalError("cannot normalize an empty signal")
    peak = np.max(np.abs(x))
    if peak == 0:
        raise SignalError("cannot normalize an all-zero signal")
    return signal.with_samples(x / peak)


def signal_power(signal: Signal) -> float:
    """Average power (mean of squared samples)."""
    x = signal.samples
    if x.size == 0:
        raise SignalError("power of an empty signal is undefined")
    return float(np.mean(x * x))


def rms_normalize(signal: Signal) -> Signal:
    """Scale a signal to unit RMS. Alternative to peak normalization for sensitivity runs."""
    p = signal_power(signal)
    if p == 0:
        raise SignalError("cannot normalize an all-zero signal")
    return signal.with_samples(signal.samples / np.sqrt(p))
