"""Integer-factor decimation behind a shipped elliptic anti-alias filter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SampleRateError, Signal, SignalError
from .sosfilt import SosCascade, shipped_cascade


@dataclass(frozen=True)
class DecimatorSpec:
    factor: int
    anti_alias: SosCascade | None = None

    def __post_init__(self):
        if int(self.factor) != self.factor or self.factor < 1:
            raise ValueError(f"decimation factor must be a positive integer, got {self.factor!r}")
        if self.factor > 1 and self.anti_alias is None:
            raise ValueError("factor > 1 needs an anti-alias cascade")
        if self.factor > 1:
            out_nyquist = self.anti_alias.sample_rate_hz / self.factor / 2
            # the passband edge must sit below the output Nyquist frequency
            if self.anti_alias.gain_db(out_nyquist) > -40:
                raise ValueError(
                    f"anti-alias filter {self.anti_alias.design_label!r} does not attenuate "
                    f"the output Nyquist frequency ({out_nyquist:g} Hz)"
                )

    @property
    def input_rate_hz(self):
        return None if self.anti_alias is None else self.anti_alias.sample_rate_hz


_SHIPPED = {(4000.0, 2): "decim2_4000hz", (8000.0, 4): "decim4_8000hz"}


def decimator_for(input_rate_hz: float, output_rate_hz: float = 2000.0) -> DecimatorSpec:
    """Shipped decimator from ``input_rate_hz`` down to ``output_rate_hz``."""
    ratio = input_rate_hz / output_rate_hz
    if ratio != int(ratio) or ratio < 1:
        raise SampleRateError(f"{input_rate_hz:g} Hz is not an integer multiple of {output_rate_hz:g} Hz")
    factor = int(ratio)
    if factor == 1:
        return DecimatorSpec(1)
    name = _SHIPPED.get((float(input_rate_hz), factor))
    if name is None:
        raise SampleRateError(f"no shipped anti-alias design for {input_rate_hz:g} Hz -> {output_rate_hz:g} Hz")
    return DecimatorSpec(factor, shipped_cascade(name))


class Decimator:
    """Stateful decimator; keeps filter state and sample phase across blocks."""

    def __init__(self, spec: DecimatorSpec):
        self.spec = spec
        self.filter = None if spec.anti_alias is None else spec.anti_alias.fresh()
        self._phase = 0  # input samples to skip before the next kept one

    def reset(self):
        if self.filter is not None:
            self.filter.reset()
        self._phase = 0

    def process(self, x) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        if self.spec.factor == 1:
            return x.copy()
        y = self.filter.process(x)
        kept = y[self._phase::self.spec.factor]
        self._phase = (self._phase - x.shape[0]) % self.spec.factor
        return kept


def decimate(spec: DecimatorSpec, signal: Signal) -> Signal:
    """Anti-alias filter then keep every ``factor``-th sample, starting at the first.

    Output length is ``ceil(len(signal) / factor)``. With ``factor == 1``
    the input is returned unchanged.
    """
    if spec.factor == 1:
        return signal
    if signal.sample_rate_hz != spec.anti_alias.sample_rate_hz:
        raise SampleRateError(
            f"decimator designed for {spec.anti_alias.sample_rate_hz:g} Hz, "
            f"signal is {signal.sample_rate_hz:g} Hz"
        )
    rate_out = signal.sample_rate_hz / spec.factor
    if rate_out != int(rate_out):
        raise SignalError(f"{signal.sample_rate_hz:g} Hz is not divisible by {spec.factor}")
    y = Decimator(spec).process(signal.samples)
    return type(signal)(y, rate_out)
