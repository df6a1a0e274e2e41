"""Block-by-block processing harness with deadline accounting.

The pipeline is optional decimation, then adaptive cancellation, then an
optional 20-200 Hz band-pass. Every stage keeps its state between blocks,
so the streamed output is bit-identical to :func:`batch_process`.

In threaded mode a producer thread slices the input into blocks and
hands them to the processor through a :class:`DoubleBuffer`. The
single-threaded mode runs the producer inline and gives the same output.

:meth:`TimingReport.to_json` emits the keys ``n_blocks``, ``block_size``,
``block_duration_s``, ``audio_duration_s``, ``total_processing_s``,
``max_latency_s``, ``mean_latency_s``, ``p95_latency_s``,
``real_time_factor`` and ``deadline_misses``. :meth:`TimingReport.to_csv`
writes one ``block,processing_s,deadline_miss`` row per block.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .adaptive import AdaptiveConfig, AdaptiveFilter
from .core import ReferenceSignal, SampleRateError, Signal, check_pair
from .resample import Decimator, DecimatorSpec, decimate
from .sosfilt import PCG_RATE_HZ, apply, shipped_cascade


@dataclass(frozen=True)
class StreamConfig:
    """``block_size`` counts samples at the adaptive filter's rate (after decimation)."""

    block_size: int = 256
    adaptive: AdaptiveConfig = AdaptiveConfig()
    decimator: DecimatorSpec | None = None
    post_bandpass: bool = True
    threaded: bool = True

    def __post_init__(self):
        if self.block_size < self.adaptive.filter_length:
            raise ValueError(
                f"block_size {self.block_size} is shorter than the filter length "
                f"{self.adaptive.filter_length}"
            )

    @property
    def factor(self) -> int:
        return 1 if self.decimator is None else self.decimator.factor

    def as_dict(self) -> dict:
        dec = None
        if self.decimator is not None:
            dec = {"factor": self.decimator.factor,
                   "anti_alias": self.decimator.anti_alias.design_label if self.decimator.anti_alias else None}
        return {"block_size": self.block_size, "adaptive": self.adaptive.as_dict(),
                "decimator": dec, "post_bandpass": self.post_bandpass, "threaded": self.threaded}


@dataclass
class TimingReport:
    block_times_s: np.ndarray
    block_duration_s: float
    audio_duration_s: float
    block_size: int

    @property
    def n_blocks(self) -> int:
        return int(self.block_times_s.size)

    @property
    def total_processing_s(self) -> float:
        return float(np.sum(self.block_times_s))

    @property
    def max_latency_s(self) -> float:
        return float(np.max(self.block_times_s))

    @property
    def mean_latency_s(self) -> float:
        return float(np.mean(self.block_times_s))

    @property
    def p95_latency_s(self) -> float:
        return float(np.percentile(self.block_times_s, 95))

    @property
    def real_time_factor(self) -> float:
        return self.total_processing_s / self.audio_duration_s

    @property
    def deadline_misses(self) -> int:
        return int(np.count_nonzero(self.block_times_s > self.block_duration_s))

    def as_dict(self) -> dict:
        return {
            "n_blocks": self.n_blocks,
            "block_size": self.block_size,
            "block_duration_s": self.block_duration_s,
            "audio_duration_s": self.audio_duration_s,
            "total_processing_s": self.total_processing_s,
            "max_latency_s": self.max_latency_s,
            "mean_latency_s": self.mean_latency_s,
            "p95_latency_s": self.p95_latency_s,
            "real_time_factor": self.real_time_factor,
            "deadline_misses": self.deadline_misses,
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        lines = ["block,processing_s,deadline_miss"]
        for i, t in enumerate(self.block_times_s):
            lines.append(f"{i},{float(t)!r},{int(t > self.block_duration_s)}")
        return "\n".join(lines) + "\n"


class Pipeline:
    """Stateful decimate -> cancel -> band-pass chain."""

    def __init__(self, config: StreamConfig):
        self.config = config
        spec = config.decimator
        self._dec_p = Decimator(spec) if spec is not None else None
        self._dec_r = Decimator(spec) if spec is not None else None
        self._anc = AdaptiveFilter(config.adaptive)
        self._bp = shipped_cascade("pcg_bandpass_20_200hz") if config.post_bandpass else None

    def process(self, primary_block, reference_block) -> np.ndarray:
        p, r = primary_block, reference_block
        if self._dec_p is not None:
            p = self._dec_p.process(p)
            r = self._dec_r.process(r)
        e, _ = self._anc.process(p, r)
        if self._bp is not None:
            e = self._bp.process(e)
        return e


def _output_rate(config: StreamConfig, input_rate: float) -> float:
    out = input_rate / config.factor
    if config.decimator is not None and config.decimator.input_rate_hz != input_rate:
        raise SampleRateError(
            f"decimator expects {config.decimator.input_rate_hz:g} Hz input, got {input_rate:g} Hz"
        )
    if config.post_bandpass and out != PCG_RATE_HZ:
        raise SampleRateError(f"the band-pass stage runs at {PCG_RATE_HZ:g} Hz, pipeline output is {out:g} Hz")
    return out


def batch_process(config: StreamConfig, primary: Signal, reference: Signal) -> Signal:
    """Reference implementation: each stage applied once to the whole recording."""
    check_pair(primary, reference, "primary and reference")
    out_rate = _output_rate(config, primary.sample_rate_hz)
    p, r = primary, reference
    if config.decimator is not None:
        p, r = decimate(config.decimator, p), decimate(config.decimator, r)
    e, _ = AdaptiveFilter(config.adaptive).process(p.samples, r.samples)
    out = Signal(e, out_rate)
    if config.post_bandpass:
        out = apply(shipped_cascade("pcg_bandpass_20_200hz"), out)
    return out


class DoubleBuffer:
    """Two-slot blocking exchange between one producer and one consumer.

    :meth:`put` blocks while both slots hold unconsumed blocks, so the
    producer can never overwrite data the consumer has not taken.
    ``overwrites`` counts violations of that rule and must stay zero.
    """

    def __init__(self):
        self._slots = [None, None]
        self._full = [False, False]
        self._write = 0
        self._read = 0
        self._cond = threading.Condition()
        self._closed = False
        self.overwrites = 0
        self.producer_waits = 0

    def put(self, item) -> None:
        with self._cond:
            if self._full[self._write]:
                self.producer_waits += 1
            while self._full[self._write]:
                self._cond.wait()
            if self._full[self._write]:
                self.overwrites += 1
            self._slots[self._write] = item
            self._full[self._write] = True
            self._write ^= 1
            self._cond.notify_all()

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()

    def get(self):
        """Next block, or ``None`` once the producer has closed and both slots are drained."""
        with self._cond:
            while not self._full[self._read]:
                if self._closed:
                    return None
                self._cond.wait()
            item = self._slots[self._read]
            self._slots[self._read] = None
            self._full[self._read] = False
            self._read ^= 1
            self._cond.notify_all()
            return item


def _blocks(primary: np.ndarray, reference: np.ndarray, size: int):
    for i in range(0, primary.shape[0], size):
        yield i, primary[i:i + size].copy(), reference[i:i + size].copy()


_warmed = False


def warm_up() -> None:
    """Compile the numba kernels once so first-block timings are not compile times."""
    global _warmed
    if _warmed:
        return
    x = np.zeros(32)
    Pipeline(StreamConfig(block_size=32, post_bandpass=True)).process(x, x)
    _warmed = True


@dataclass
class _Outcome:
    chunks: list = field(default_factory=list)
    times: list = field(default_factory=list)


def stream_process(config: StreamConfig, primary: Signal, reference: ReferenceSignal,
                   consumer_delay=None, buffer: DoubleBuffer | None = None):
    """Process in blocks of ``config.block_size``; returns ``(denoised, TimingReport)``.

    ``consumer_delay`` is an optional callable ``f(block_index)`` run inside
    the processor before each block (for fault injection). It is excluded
    from the timing. Deadline misses are counted only and never alter the
    output.
    """
    check_pair(primary, reference, "primary and reference")
    out_rate = _output_rate(config, primary.sample_rate_hz)
    warm_up()
    pipe = Pipeline(config)
    in_block = config.block_size * config.factor
    block_duration = config.block_size / out_rate
    outcome = _Outcome()

    def consume(idx, p, r):
        if consumer_delay is not None:
            consumer_delay(idx)
        t0 = time.perf_counter()
        y = pipe.process(p, r)
        outcome.times.append(time.perf_counter() - t0)
        outcome.chunks.append(y)

    source = _blocks(primary.samples, reference.samples, in_block)
    if not config.threaded:
        for idx, (_, p, r) in enumerate(source):
            consume(idx, p, r)
    else:
        buf = buffer if buffer is not None else DoubleBuffer()
        failure = []

        def produce():
            try:
                for item in source:
                    buf.put(item)
            except BaseException as exc:  # surfaced on the caller's thread
                failure.append(exc)
            finally:
                buf.close()

        producer = threading.Thread(target=produce, name="anc-producer", daemon=True)
        producer.start()
        idx = 0
        try:
            while (item := buf.get()) is not None:
                consume(idx, item[1], item[2])
                idx += 1
        finally:
            # drain so the producer can finish even if processing raised
            while buf.get() is not None:
                pass
            producer.join()
        if failure:
            raise failure[0]

    out = np.concatenate(outcome.chunks) if outcome.chunks else np.zeros(0)
    report = TimingReport(np.asarray(outcome.times, dtype=float), block_duration,
                          out.shape[0] / out_rate, config.block_size)
    return Signal(out, out_rate), report
