import numpy as np
import pytest
from scipy.io import wavfile

from anc_dsp.core import ReferenceSignal, Signal
from anc_dsp.wavio import AudioFormatError, read_signal, read_wav, write_signal, write_wav


def test_float64_round_trip_exact(tmp_path, rng):
    s = Signal(rng.uniform(-1, 1, 500), 2000)
    write_wav(tmp_path / "a.wav", s, "float64")
    assert read_wav(tmp_path / "a.wav") == s


def test_float32_round_trip(tmp_path, rng):
    s = Signal(rng.uniform(-1, 1, 500), 8000)
    write_wav(tmp_path / "a.wav", s)
    back = read_wav(tmp_path / "a.wav")
    assert back.sample_rate_hz == 8000
    assert np.array_equal(back.samples, s.samples.astype(np.float32).astype(np.float64))


def test_int16_scaling_and_clipping(tmp_path):
    write_wav(tmp_path / "a.wav", Signal([0.0, 0.5, -1.0, 1.0], 500), "int16")
    _, raw = wavfile.read(tmp_path / "a.wav")
    assert raw.tolist() == [0, 16384, -32768, 32767]
    assert read_wav(tmp_path / "a.wav").samples.tolist() == [0.0, 0.5, -1.0, 32767 / 32768]


def test_rate_override_and_class(tmp_path):
    write_wav(tmp_path / "a.wav", Signal([0.1, 0.2], 8000))
    r = read_wav(tmp_path / "a.wav", sample_rate_hz=2000, cls=ReferenceSignal)
    assert isinstance(r, ReferenceSignal) and r.sample_rate_hz == 2000


def test_rejects_stereo(tmp_path):
    wavfile.write(tmp_path / "st.wav", 2000, np.zeros((10, 2), dtype=np.float32))
    with pytest.raises(AudioFormatError):
        read_wav(tmp_path / "st.wav")


def test_rejects_garbage(tmp_path):
    (tmp_path / "g.wav").write_bytes(b"not a wav file at all")
    with pytest.raises(AudioFormatError):
        read_wav(tmp_path / "g.wav")


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        read_wav(tmp_path / "nope.wav")


def test_non_integer_rate(tmp_path):
    with pytest.raises(AudioFormatError):
        write_wav(tmp_path / "a.wav", Signal([0.0], 2000.5))


def test_csv_round_trip(tmp_path, rng):
    s = Signal(rng.standard_normal(50), 500)
    write_signal(tmp_path / "e.csv", s)
    assert read_signal(tmp_path / "e.csv", 500) == s
    with pytest.raises(AudioFormatError):
        read_signal(tmp_path / "e.csv")


def test_dispatch_wav(tmp_path):
    s = Signal([0.25, -0.5], 500)
    write_signal(tmp_path / "e.wav", s)
    assert read_signal(tmp_path / "e.wav") == s
