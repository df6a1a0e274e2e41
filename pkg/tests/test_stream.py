import json
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anc_dsp import stream
from anc_dsp.adaptive import AdaptiveConfig
from anc_dsp.core import ReferenceSignal, SampleRateError, Signal
from anc_dsp.resample import decimator_for
from anc_dsp.stream import DoubleBuffer, StreamConfig, TimingReport, batch_process, stream_process


def pair(seed, n, fs=2000.0):
    rng = np.random.default_rng(seed)
    ref = rng.standard_normal(n)
    prim = np.sin(np.arange(n) / 7.0) + np.convolve(ref, [0.9, -0.4, 0.2])[:n]
    return Signal(prim, fs), ReferenceSignal(ref, fs)


@pytest.mark.parametrize("threaded", [True, False])
@pytest.mark.parametrize("block", [10, 256, 1000, 5003])
def test_stream_equals_batch(threaded, block):
    p, r = pair(0, 5003)
    cfg = StreamConfig(block_size=block, threaded=threaded)
    out, rep = stream_process(cfg, p, r)
    assert out == batch_process(cfg, p, r)
    assert rep.n_blocks == -(-5003 // block)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(10, 400), st.integers(10, 3000), st.booleans())
def test_random_blocks(seed, block, n, bandpass):
    p, r = pair(seed, n)
    cfg = StreamConfig(block_size=block, post_bandpass=bandpass)
    assert stream_process(cfg, p, r)[0] == batch_process(cfg, p, r)


def test_decimating_pipeline():
    p, r = pair(1, 80001, fs=8000.0)
    cfg = StreamConfig(block_size=77, decimator=decimator_for(8000))
    out, rep = stream_process(cfg, p, r)
    assert out.sample_rate_hz == 2000 and len(out) == 20001
    assert out == batch_process(cfg, p, r)
    assert rep.block_duration_s == 77 / 2000


def test_block_shorter_than_filter():
    with pytest.raises(ValueError):
        StreamConfig(block_size=5, adaptive=AdaptiveConfig(filter_length=10))


@pytest.mark.parametrize("fs,cfg", [
    (8000.0, StreamConfig()),
    (4000.0, StreamConfig(decimator=decimator_for(8000))),
])
def test_rate_errors(fs, cfg):
    p, r = pair(0, 400, fs)
    with pytest.raises(SampleRateError):
        stream_process(cfg, p, r)


def test_no_bandpass_any_rate():
    p, r = pair(0, 400, 1000.0)
    cfg = StreamConfig(block_size=64, post_bandpass=False)
    out, _ = stream_process(cfg, p, r)
    assert out.sample_rate_hz == 1000 and out == batch_process(cfg, p, r)


def test_timing_report_consistency():
    p, r = pair(2, 4000)
    out, rep = stream_process(StreamConfig(block_size=256), p, r)
    d = json.loads(rep.to_json())
    assert set(d) == {"n_blocks", "block_size", "block_duration_s", "audio_duration_s", "total_processing_s",
                      "max_latency_s", "mean_latency_s", "p95_latency_s", "real_time_factor",
                      "deadline_misses"}
    assert d["audio_duration_s"] == 2.0 and d["block_duration_s"] == 0.128
    assert d["real_time_factor"] == pytest.approx(d["total_processing_s"] / 2.0)
    assert rep.mean_latency_s <= rep.p95_latency_s <= rep.max_latency_s
    lines = rep.to_csv().splitlines()
    assert lines[0] == "block,processing_s,deadline_miss" and len(lines) == rep.n_blocks + 1


def test_timing_report_counts_misses():
    rep = TimingReport(np.array([0.1, 0.3, 0.2, 0.5]), 0.25, 1.0, 10)
    assert rep.deadline_misses == 2
    assert rep.real_time_factor == pytest.approx(1.1)
    assert rep.to_csv().splitlines()[2] == "1,0.3,1"


def test_slow_consumer_never_overwrites():
    p, r = pair(3, 2000)
    buf = DoubleBuffer()
    cfg = StreamConfig(block_size=50)
    out, rep = stream_process(cfg, p, r, consumer_delay=lambda i: time.sleep(0.005), buffer=buf)
    assert buf.overwrites == 0 and buf.producer_waits > 0
    assert out == batch_process(cfg, p, r)
    # the injected delay is not charged to processing time
    assert rep.total_processing_s < 40 * 0.005


def test_deadline_misses_do_not_change_output(monkeypatch):
    p, r = pair(4, 640)
    cfg = StreamConfig(block_size=32)
    original = stream.Pipeline.process

    def slow(self, a, b):
        if len(self.__dict__.setdefault("_calls", [])) % 3 == 0:
            time.sleep(cfg.block_size / 2000 * 1.5)
        self._calls.append(1)
        return original(self, a, b)

    monkeypatch.setattr(stream.Pipeline, "process", slow)
    out, rep = stream_process(cfg, p, r)
    assert rep.n_blocks == 20 and rep.deadline_misses >= 7
    monkeypatch.setattr(stream.Pipeline, "process", original)
    assert out == batch_process(cfg, p, r)


def test_double_buffer_order():
    buf = DoubleBuffer()
    buf.put(1)
    buf.put(2)
    assert buf.get() == 1
    buf.put(3)
    buf.close()
    assert [buf.get(), buf.get(), buf.get()] == [2, 3, None]


def test_processing_error_propagates(monkeypatch):
    p, r = pair(5, 1000)

    def boom(self, a, b):
        raise RuntimeError("boom")

    monkeypatch.setattr(stream.Pipeline, "process", boom)
    with pytest.raises(RuntimeError):
        stream_process(StreamConfig(block_size=50), p, r)


def test_real_time_factor_small():
    p, r = pair(6, 60 * 2000)
    _, rep = stream_process(StreamConfig(), p, r)
    assert rep.real_time_factor < 0.05
