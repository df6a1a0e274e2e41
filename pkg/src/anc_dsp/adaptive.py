"""LMS, NLMS and burst-adaptive NLMS noise cancellers.

All three variants share one compiled per-sample kernel, so the scalar
:func:`step` API, the stateful :class:`AdaptiveFilter` and the batch
:func:`run_filter` produce bit-identical results for the same input.

Conventions
-----------
* The tap-input vector holds the most recent reference sample first.
* Weights, the tap window and the running energy start at zero.
* For the burst-adaptive variant the running energy is updated *before*
  the burst gate compares against it.
* ``effective_step`` reports the un-normalized step actually chosen for
  the sample (``mu0`` or ``beta * mu0``); NLMS variants then divide it by
  ``epsilon + ||r||^2``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

from .core import AncError, ReferenceSignal, Signal, SignalError, check_pair


class DivergenceError(AncError, ArithmeticError):
    """Raised when a weight becomes NaN or infinite.

    ``sample_index`` is the zero-based index (counted from the last reset)
    of the sample whose update produced the non-finite weight.
    """

    def __init__(self, sample_index: int, variant: str = ""):
        self.sample_index = int(sample_index)
        self.variant = variant
        super().__init__(f"adaptive filter {variant} diverged at sample {sample_index}")


class Variant(str, enum.Enum):
    LMS = "lms"
    NLMS = "nlms"
    BA_NLMS = "ba-nlms"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for v in cls:
            if v.value == key:
                return v
        raise ValueError(f"unknown adaptive filter variant {value!r}")


_VARIANT_CODE = {Variant.LMS: 0, Variant.NLMS: 1, Variant.BA_NLMS: 2}


@dataclass(frozen=True)
class AdaptiveConfig:
    """Parameters of one adaptive filter.

    Defaults are the values used for the filter comparison experiments:
    10 taps, ``mu0=0.05``, ``epsilon=0.001``, ``alpha=0.99``, ``eta=5``,
    ``beta=6``.
    """

    filter_length: int = 10
    mu0: float = 0.05
    epsilon: float = 1e-3
    alpha: float = 0.99
    eta: float = 5.0
    beta: float = 6.0
    variant: Variant = Variant.BA_NLMS

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if int(self.filter_length) != self.filter_length or self.filter_length < 1:
            raise ValueError(f"filter_length must be a positive integer, got {self.filter_length!r}")
        object.__setattr__(self, "filter_length", int(self.filter_length))
        # mu0 == 0 is allowed: it freezes the weights (identity pass-through)
        if not self.mu0 >= 0:
            raise ValueError(f"mu0 must be non-negative, got {self.mu0!r}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha!r}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta!r}")
        if not self.beta > 1:
            raise ValueError(f"beta must exceed 1, got {self.beta!r}")

    def with_variant(self, variant) -> "AdaptiveConfig":
        return replace(self, variant=Variant.parse(variant))

    def as_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "filter_length": self.filter_length,
            "mu0": self.mu0,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "eta": self.eta,
            "beta": self.beta,
        }


@dataclass
class AdaptiveFilterState:
    weights: np.ndarray
    ref_window: np.ndarray
    energy_avg: float = 0.0
    sample_index: int = 0

    def copy(self) -> "AdaptiveFilterState":
        return AdaptiveFilterState(
            self.weights.copy(), self.ref_window.copy(), self.energy_avg, self.sample_index
        )

    def __eq__(self, other):
        if not isinstance(other, AdaptiveFilterState):
            return NotImplemented
        return (
            np.array_equal(self.weights, other.weights)
            and np.array_equal(self.ref_window, other.ref_window)
            and self.energy_avg == other.energy_avg
            and self.sample_index == other.sample_index
        )


@dataclass(frozen=True)
class StepOutput:
    denoised_sample: float
    noise_estimate: float
    effective_step: float
    burst_flag: bool


@dataclass
class Trace:
    """Per-sample diagnostics from a batch run."""

    noise_estimate: np.ndarray
    effective_step: np.ndarray
    burst_flag: np.ndarray = field(repr=False)

    @classmethod
    def empty(cls, n: int) -> "Trace":
        return cls(np.zeros(n), np.zeros(n), np.zeros(n, dtype=np.bool_))

    @property
    def burst_fraction(self) -> float:
        return float(np.mean(self.burst_flag)) if self.burst_flag.size else 0.0


@njit(cache=True, nogil=True)
def _adapt_kernel(variant, mu0, eps, alpha, eta, beta, w, win, energy,
                  primary, reference, out, y_out, mu_out, flag_out):
    taps = w.shape[0]
    for n in range(primary.shape[0]):
        for k in range(taps - 1, 0, -1):
            win[k] = win[k - 1]
        win[0] = reference[n]

        y = 0.0
        power = 0.0
        for k in range(taps):
            y += w[k] * win[k]
            power += win[k] * win[k]
        e = primary[n] - y

        mu = mu0
        burst = False
        if variant == 2:
            energy[0] = alpha * energy[0] + (1.0 - alpha) * power
            if power > eta * energy[0]:
                burst = True
                mu = beta * mu0
        if variant == 0:
            gain = mu
        else:
            gain = mu / (eps + power)

        ok = True
        for k in range(taps):
            w[k] += gain * e * win[k]
            if not np.isfinite(w[k]):
                ok = False

        out[n] = e
        y_out[n] = y
        mu_out[n] = mu
        flag_out[n] = burst
        if not ok:
            return n
    return -1


def reset(config: AdaptiveConfig) -> AdaptiveFilterState:
    """Fresh all-zero state for ``config``."""
    L = config.filter_length
    return AdaptiveFilterState(np.zeros(L), np.zeros(L), 0.0, 0)


def _advance(config, state, primary, reference, out, trace):
    """Run the kernel in place over aligned float64 arrays; raise on divergence."""
    energy = np.array([state.energy_avg])
    bad = _adapt_kernel(
        _VARIANT_CODE[config.variant], float(config.mu0), float(config.epsilon),
        float(config.alpha), float(config.eta), float(config.beta),
        state.weights, state.ref_window, energy,
        primary, reference, out,
        trace.noise_estimate, trace.effective_step, trace.burst_flag,
    )
    state.energy_avg = float(energy[0])
    if bad >= 0:
        index = state.sample_index + bad
        state.sample_index = index + 1
        raise DivergenceError(index, config.variant.value)
    state.sample_index += primary.shape[0]


def step(state: AdaptiveFilterState, config: AdaptiveConfig,
         primary_sample: float, reference_sample: float):
    """Process one sample. Returns ``(StepOutput, new_state)``; ``state`` is not modified."""
    if not (np.isfinite(primary_sample) and np.isfinite(reference_sample)):
        raise SignalError("step() requires finite samples")
    if state.weights.shape != (config.filter_length,):
        raise ValueError("state does not match config.filter_length")
    new = state.copy()
    out = np.empty(1)
    trace = Trace.empty(1)
    _advance(config, new,
             np.array([primary_sample], dtype=np.float64),
             np.array([reference_sample], dtype=np.float64), out, trace)
    result = StepOutput(
        float(out[0]), float(trace.noise_estimate[0]),
        float(trace.effective_step[0]), bool(trace.burst_flag[0]),
    )
    return result, new


class AdaptiveFilter:
    """Stateful canceller for streaming use.

    >>> f = AdaptiveFilter(AdaptiveConfig(variant="nlms"))
    >>> e, trace = f.process(primary_block, reference_block)  # doctest: +SKIP

    Successive :meth:`process` calls continue where the previous one
    stopped, so splitting a recording into blocks gives exactly the same
    output as one call on the whole recording.
    """

    def __init__(self, config: AdaptiveConfig, state: AdaptiveFilterState | None = None):
        self.config = config
        self.state = reset(config) if state is None else state.copy()

    def reset(self):
        self.state = reset(self.config)

    def process(self, primary, reference):
        primary = np.ascontiguousarray(primary, dtype=np.float64)
        reference = np.ascontiguousarray(reference, dtype=np.float64)
        if primary.shape != reference.shape or primary.ndim != 1:
            raise SignalError(
                f"primary and reference blocks must be 1-D and equal length, "
                f"got {primary.shape} and {reference.shape}"
            )
        out = np.empty_like(primary)
        trace = Trace.empty(primary.shape[0])
        _advance(self.config, self.state, primary, reference, out, trace)
        return out, trace


def run_filter(config: AdaptiveConfig, primary: Signal, reference: Signal):
    """Denoise ``primary`` from a fresh zero state.

    Returns ``(denoised, trace)`` where ``denoised`` is the error signal
    ``e(n) = primary(n) - w(n)^T r(n)``.
    """
    check_pair(primary, reference, "primary and reference")
    f = AdaptiveFilter(config)
    out, trace = f.process(primary.samples, reference.samples)
    return primary.with_samples(out), trace


def average_references(references) -> ReferenceSignal:
    """Mean of several reference channels (e.g. an ambient microphone array)."""
    references = list(references)
    if not references:
        raise SignalError("need at least one reference channel")
    first = references[0]
    for r in references[1:]:
        check_pair(first, r, "reference channels")
    stacked = np.vstack([r.samples for r in references])
    return ReferenceSignal(stacked.mean(axis=0), first.sample_rate_hz)
