"""Single-channel WAV and CSV reading/writing.

WAV files may be 16-bit PCM or 32-bit float; both load as float64 in
[-1, 1]. Single-column CSV is accepted for ECG exports.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from .core import Signal, SignalError


class AudioFormatError(SignalError):
    pass


def read_wav(path, sample_rate_hz: float | None = None, cls=Signal) -> Signal:
    try:
        rate, data = wavfile.read(str(path))
    except ValueError as exc:
        raise AudioFormatError(f"{path}: {exc}") from exc
    if data.ndim != 1:
        raise AudioFormatError(f"{path}: expected a single channel, found {data.shape[1]}")
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32 or data.dtype == np.float64:
        x = data.astype(np.float64)
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    else:
        raise AudioFormatError(f"{path}: unsupported sample type {data.dtype}")
    return cls(x, sample_rate_hz if sample_rate_hz is not None else float(rate))


def write_wav(path, signal: Signal, fmt: str = "float32") -> None:
    """Write ``signal``. ``fmt`` is ``"float32"``, ``"float64"`` or ``"int16"`` (clips to [-1, 1))."""
    rate = signal.sample_rate_hz
    if rate != int(rate):
        raise AudioFormatError(f"WAV needs an integer sample rate, got {rate}")
    if fmt == "float32":
        data = signal.samples.astype(np.float32)
    elif fmt == "float64":
        data = signal.samples.copy()
    elif fmt == "int16":
        data = np.clip(np.round(signal.samples * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise ValueError(f"unknown WAV sample format {fmt!r}")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    wavfile.write(str(path), int(rate), data)


def read_csv_column(path, sample_rate_hz: float, cls=Signal) -> Signal:
    x = np.loadtxt(path, delimiter=",", ndmin=1, comments="#")
    if x.ndim != 1:
        raise AudioFormatError(f"{path}: expected a single column")
    return cls(x, sample_rate_hz)


def write_csv_column(path, signal: Signal) -> None:
    np.savetxt(path, signal.samples, fmt="%.17g")


def read_signal(path, sample_rate_hz: float | None = None, cls=Signal) -> Signal:
    """Dispatch on extension: ``.wav`` or ``.csv``/``.txt`` (the latter needs a rate)."""
    path = Path(path)
    if path.suffix.lower() == ".wav":
        return read_wav(path, sample_rate_hz, cls)
    if sample_rate_hz is None:
        raise AudioFormatError(f"{path}: CSV input needs an explicit sample rate")
    return read_csv_column(path, sample_rate_hz, cls)


def write_signal(path, signal: Signal) -> None:
    path = Path(path)
    if path.suffix.lower() == ".wav":
        write_wav(path, signal)
    else:
        write_csv_column(path, signal)
