"""Cascaded second-order-section IIR filtering.

Sections run in transposed direct form II. Coefficients are never designed
at runtime: the shipped cascades live as text files under ``data/`` (or
under ``$ANC_DSP_COEFF_DIR`` when set) and were produced once by
``scripts/design_coefficients.py``.

Coefficient file format::

    <label>, <sample_rate_hz>, <n_sections>
    b0 b1 b2 a1 a2
    ...

one line per section, numbers written with ``repr`` so a save/load round
trip is bit-exact. ``a0`` is implicitly 1.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
from numba import njit

from .core import AncError, SampleRateError, Signal, SignalError

COEFF_DIR_ENV = "ANC_DSP_COEFF_DIR"

ECG_RATE_HZ = 500.0
PCG_RATE_HZ = 2000.0


class CoefficientFileError(AncError, ValueError):
    """Malformed coefficient file body."""


class MissingHeaderError(CoefficientFileError):
    """Coefficient file lacks the ``label, rate, n_sections`` header."""


class UnstableFilterError(AncError, ValueError):
    """A section has a pole on or outside the unit circle."""


@dataclass(frozen=True)
class SosSection:
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    def is_stable(self) -> bool:
        # z^2 + a1 z + a2 has both roots strictly inside |z| = 1
        return abs(self.a2) < 1.0 and abs(self.a1) < 1.0 + self.a2

    def as_tuple(self):
        return (self.b0, self.b1, self.b2, self.a1, self.a2)


@njit(cache=True, nogil=True)
def _sos_kernel(coef, zi, x, y):
    for n in range(x.shape[0]):
        v = x[n]
        for s in range(coef.shape[0]):
            out = coef[s, 0] * v + zi[s, 0]
            zi[s, 0] = coef[s, 1] * v - coef[s, 3] * out + zi[s, 1]
            zi[s, 1] = coef[s, 2] * v - coef[s, 4] * out
            v = out
        y[n] = v


class SosCascade:
    """Ordered biquad sections plus their delay state.

    The coefficient array is shared and read-only; ``state`` belongs to
    this instance. Use :meth:`fresh` to get an independent zero-state copy.
    """

    def __init__(self, sections, sample_rate_hz: float, design_label: str = ""):
        if isinstance(sections, np.ndarray):
            coef = np.array(sections, dtype=np.float64)
        else:
            coef = np.array(
                [s.as_tuple() if isinstance(s, SosSection) else tuple(s) for s in sections],
                dtype=np.float64,
            )
        if coef.ndim != 2 or coef.shape[1] != 5 or coef.shape[0] == 0:
            raise CoefficientFileError(f"expected an (n, 5) array of sections, got shape {coef.shape}")
        if not np.all(np.isfinite(coef)):
            raise CoefficientFileError("non-finite filter coefficient")
        for i, row in enumerate(coef):
            if not SosSection(*row).is_stable():
                raise UnstableFilterError(
                    f"section {i} of {design_label or 'cascade'} is unstable (a1={float(row[3])!r}, a2={float(row[4])!r})"
                )
        if not sample_rate_hz > 0:
            raise SignalError("cascade sample rate must be positive")
        coef.flags.writeable = False
        self.coefficients = coef
        self.sample_rate_hz = float(sample_rate_hz)
        self.design_label = design_label
        self.state = np.zeros((coef.shape[0], 2))

    @classmethod
    def from_scipy_sos(cls, sos, sample_rate_hz, design_label=""):
        sos = np.asarray(sos, dtype=np.float64)
        if not np.all(sos[:, 3] == 1.0):
            sos = sos / sos[:, 3:4]
        return cls(sos[:, [0, 1, 2, 4, 5]], sample_rate_hz, design_label)

    @property
    def sections(self) -> list:
        return [SosSection(*map(float, row)) for row in self.coefficients]

    def __len__(self):
        return self.coefficients.shape[0]

    def __repr__(self):
        return (f"SosCascade({self.design_label!r}, {len(self)} sections, "
                f"{self.sample_rate_hz:g} Hz)")

    def fresh(self) -> "SosCascade":
        new = object.__new__(SosCascade)
        new.coefficients = self.coefficients
        new.sample_rate_hz = self.sample_rate_hz
        new.design_label = self.design_label
        new.state = np.zeros_like(self.state)
        return new

    def reset(self):
        self.state[:] = 0.0

    def then(self, other: "SosCascade", label: str | None = None) -> "SosCascade":
        """Series connection: ``self`` first, then ``other``."""
        if other.sample_rate_hz != self.sample_rate_hz:
            raise SampleRateError("cannot chain cascades designed for different rates")
        coef = np.vstack([self.coefficients, other.coefficients])
        return SosCascade(coef, self.sample_rate_hz,
                          label or f"{self.design_label}+{other.design_label}")

    def as_scipy_sos(self) -> np.ndarray:
        c = self.coefficients
        return np.column_stack([c[:, 0], c[:, 1], c[:, 2], np.ones(len(c)), c[:, 3], c[:, 4]])

    def process(self, x) -> np.ndarray:
        """Filter a block, advancing the internal state."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 1:
            raise SignalError("process() expects a 1-D block")
        y = np.empty_like(x)
        _sos_kernel(self.coefficients, self.state, x, y)
        return y

    def impulse_response(self, n: int) -> np.ndarray:
        x = np.zeros(n)
        x[0] = 1.0
        return self.fresh().process(x)

    def frequency_response(self, freqs_hz) -> np.ndarray:
        """Complex gain at the given frequencies (Hz)."""
        z = np.exp(1j * 2 * np.pi * np.asarray(freqs_hz, dtype=float) / self.sample_rate_hz)
        zi = 1.0 / z
        h = np.ones_like(z)
        for b0, b1, b2, a1, a2 in self.coefficients:
            h *= (b0 + b1 * zi + b2 * zi * zi) / (1.0 + a1 * zi + a2 * zi * zi)
        return h

    def gain_db(self, freq_hz: float) -> float:
        return float(20 * np.log10(np.abs(self.frequency_response([freq_hz])[0])))


def apply(cascade: SosCascade, signal: Signal) -> Signal:
    """Causally filter ``signal`` through ``cascade``.

    The cascade's current state is used as the initial condition and is
    advanced, so consecutive calls on consecutive chunks equal one call on
    the whole. Pass ``cascade.fresh()`` for zero initial state.
    """
    if signal.sample_rate_hz != cascade.sample_rate_hz:
        raise SampleRateError(
            f"{cascade.design_label or 'cascade'} is designed for {cascade.sample_rate_hz:g} Hz, "
            f"signal is {signal.sample_rate_hz:g} Hz"
        )
    return signal.with_samples(cascade.process(signal.samples))


# -- coefficient files ----------------------------------------------------

def save_cascade(cascade: SosCascade, path) -> None:
    lines = [f"{cascade.design_label}, {float(cascade.sample_rate_hz)!r}, {len(cascade)}"]
    for row in cascade.coefficients:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_cascade(path) -> SosCascade:
    """Read a coefficient file. The returned cascade has zero state."""
    text = Path(path).read_text()
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise MissingHeaderError(f"{path}: empty coefficient file")
    head = [h.strip() for h in lines[0].split(",")]
    if len(head) != 3:
        raise MissingHeaderError(f"{path}: first line must be 'label, sample_rate_hz, n_sections'")
    label = head[0]
    try:
        rate = float(head[1])
        n_sections = int(head[2])
    except ValueError as exc:
        raise MissingHeaderError(f"{path}: bad header {lines[0]!r}") from exc
    body = lines[1:]
    if len(body) != n_sections:
        raise CoefficientFileError(f"{path}: header declares {n_sections} sections, found {len(body)}")
    rows = []
    for i, ln in enumerate(body, start=2):
        parts = ln.split()
        if len(parts) != 5:
            raise CoefficientFileError(f"{path}:{i}: expected 5 coefficients, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise CoefficientFileError(f"{path}:{i}: {exc}") from exc
    return SosCascade(np.array(rows), rate, label)


def coeff_dir() -> Path:
    override = os.environ.get(COEFF_DIR_ENV)
    if override:
        return Path(override)
    return Path(str(resources.files("anc_dsp") / "data"))


SHIPPED = (
    "ecg_highpass_0p5hz",
    "ecg_lowpass_150hz",
    "ecg_bandstop_50hz",
    "ecg_bandstop_60hz",
    "pcg_bandpass_20_200hz",
    "decim2_4000hz",
    "decim4_8000hz",
)

_cache: dict = {}


def shipped_cascade(name: str) -> SosCascade:
    """A fresh zero-state copy of one of the shipped designs."""
    path = coeff_dir() / f"{name}.sos"
    key = str(path)
    if key not in _cache:
        if not path.exists():
            raise FileNotFoundError(f"no coefficient file {path}")
        _cache[key] = load_cascade(path)
    return _cache[key].fresh()


def oracle_impulse_response(name: str) -> np.ndarray:
    """Impulse response recorded from the design tool when the file was generated."""
    return np.loadtxt(coeff_dir() / f"{name}.impulse")


# -- fixed pipelines ------------------------------------------------------

def ecg_cascade(powerline_hz: int = 50) -> SosCascade:
    if powerline_hz not in (50, 60):
        raise ValueError("powerline_hz must be 50 or 60")
    return (
        shipped_cascade("ecg_highpass_0p5hz")
        .then(shipped_cascade("ecg_lowpass_150hz"))
        .then(shipped_cascade(f"ecg_bandstop_{powerline_hz}hz"), label=f"ecg_pipeline_{powerline_hz}hz")
    )


def ecg_pipeline(signal: Signal, powerline_hz: int = 50) -> Signal:
    """0.5 Hz high-pass, 150 Hz low-pass, then mains notch; 500 Hz input only."""
    if signal.sample_rate_hz != ECG_RATE_HZ:
        raise SampleRateError(f"ECG pipeline expects {ECG_RATE_HZ:g} Hz, got {signal.sample_rate_hz:g} Hz")
    return apply(ecg_cascade(powerline_hz), signal)


def pcg_bandpass(signal: Signal) -> Signal:
    """20-200 Hz heart-sound band-pass; 2 kHz input only."""
    if signal.sample_rate_hz != PCG_RATE_HZ:
        raise SampleRateError(f"PCG band-pass expects {PCG_RATE_HZ:g} Hz, got {signal.sample_rate_hz:g} Hz")
    return apply(shipped_cascade("pcg_bandpass_20_200hz"), signal)
