"""Synthetic source recordings.

Stand-ins for a clean heart-sound database and a hospital ambient-noise
corpus when the real recordings are not at hand. The generators are
parametric and seeded; :func:`write_corpus` lays the files out in the
directory convention expected by :func:`anc_dsp.synth.generate_dataset`.

Heart sounds
    S1 and S2 are modelled as pairs of Gaussian-windowed, slightly chirped
    low-frequency oscillations (valve components), repeated at a jittered
    heart rate with a rate-dependent systolic interval. Abnormal records
    add one pathology: a systolic or diastolic murmur (shaped band-limited
    noise), an S3 gallop, or a widely split S2.

Ambient noise
    A mix of ventilation rumble and mains hum, several talkers (glottal
    pulse trains through moving formant resonators, gated into syllables
    and phrases), monitor alarms, and footsteps. "Bursty" recordings add a
    few short, loud impacts such as doors or trolleys.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.signal as ss

from .core import Signal, normalize
from .wavio import write_wav

PCG_RATE_HZ = 2000.0
NOISE_RATE_HZ = 8000.0

PATHOLOGIES = ("systolic_murmur", "diastolic_murmur", "s3_gallop", "split_s2")


def _tone_burst(t, onset, freq, width, chirp=0.0, phase=0.0):
    """Gaussian-windowed oscillation centred ``width/2`` after ``onset``."""
    tau = t - onset
    env = np.exp(-0.5 * ((tau - width / 2) / (width / 5)) ** 2)
    return env * np.sin(2 * np.pi * (freq * tau + 0.5 * chirp * tau * tau) + phase)


def _band_noise(rng, n, lo, hi, fs):
    sos = ss.butter(2, [lo, hi], btype="bandpass", fs=fs, output="sos")
    x = ss.sosfilt(sos, rng.standard_normal(n))
    return x / (np.std(x) + 1e-12)


def heart_sound(rng: np.random.Generator, duration_s: float, abnormal: bool = False,
                pathology: str | None = None, fs: float = PCG_RATE_HZ) -> Signal:
    """One synthetic phonocardiogram, peak-normalized."""
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    x = np.zeros(n)
    if abnormal and pathology is None:
        pathology = PATHOLOGIES[rng.integers(len(PATHOLOGIES))]
    hr = rng.uniform(55, 100)
    rr_mean = 60.0 / hr
    f_s1 = rng.uniform(35, 65)
    f_s2 = rng.uniform(55, 95)
    murmur_gain = rng.uniform(0.25, 0.5)
    onset = rng.uniform(0, rr_mean)
    while onset < duration_s:
        rr = rr_mean * rng.uniform(0.96, 1.04)
        systole = 0.35 * np.sqrt(rr) - 0.02
        # S1: mitral then tricuspid component
        a = rng.uniform(0.85, 1.15)
        x += a * _tone_burst(t, onset, f_s1, 0.09, chirp=-60, phase=rng.uniform(0, 2 * np.pi))
        x += 0.6 * a * _tone_burst(t, onset + 0.025, f_s1 * 1.2, 0.07, phase=rng.uniform(0, 2 * np.pi))
        # S2: aortic then pulmonary component
        s2 = onset + systole
        split = 0.05 if pathology == "split_s2" else rng.uniform(0.0, 0.025)
        b = rng.uniform(0.55, 0.8)
        x += b * _tone_burst(t, s2, f_s2, 0.06, chirp=80, phase=rng.uniform(0, 2 * np.pi))
        x += 0.5 * b * _tone_burst(t, s2 + split, f_s2 * 0.85, 0.05, phase=rng.uniform(0, 2 * np.pi))
        if pathology == "systolic_murmur":
            i0, i1 = int((onset + 0.1) * fs), int((s2 - 0.01) * fs)
            _add_shaped(x, rng, i0, i1, murmur_gain, fs, "diamond")
        elif pathology == "diastolic_murmur":
            i0, i1 = int((s2 + 0.07) * fs), int((s2 + 0.07 + 0.45 * (rr - systole)) * fs)
            _add_shaped(x, rng, i0, i1, murmur_gain, fs, "decrescendo")
        elif pathology == "s3_gallop":
            x += 0.35 * _tone_burst(t, s2 + 0.14, rng.uniform(25, 45), 0.07)
        onset += rr
    # breathing modulates chest-wall coupling a little
    x *= 1 + 0.1 * np.sin(2 * np.pi * rng.uniform(0.2, 0.3) * t + rng.uniform(0, 2 * np.pi))
    x += 1e-3 * rng.standard_normal(n)
    return normalize(Signal(x, fs))


def _add_shaped(x, rng, i0, i1, gain, fs, shape):
    i0, i1 = max(i0, 0), min(i1, x.shape[0])
    k = i1 - i0
    if k < 8:
        return
    u = np.linspace(0, 1, k)
    env = np.minimum(u, 1 - u) * 2 if shape == "diamond" else (1 - u) ** 1.5
    x[i0:i1] += gain * env * _band_noise(rng, k, 90, 350, fs)


def _level_track(rng, n, fs, floor_db, seg=(0.4, 3.0), off_prob=0.0):
    """Piecewise-constant level in dB steps, smoothed; segments may go silent."""
    env = np.empty(n)
    i = 0
    while i < n:
        m = int(rng.uniform(*seg) * fs)
        level = 0.0 if rng.random() < off_prob else 10 ** (rng.uniform(floor_db, 0) / 20)
        env[i:i + m] = level
        i += m
    sos = ss.butter(1, 6.0, fs=fs, output="sos")
    return np.clip(ss.sosfiltfilt(sos, env), 0, None)


def _talker(rng, n, fs):
    t = np.arange(n) / fs
    f0 = rng.uniform(90, 240)
    contour = f0 * (1 + 0.08 * np.sin(2 * np.pi * rng.uniform(0.3, 1.0) * t + rng.uniform(0, 6)))
    phase = np.cumsum(contour / fs)
    pulses = np.diff(np.floor(phase), prepend=0.0)
    voiced = ss.lfilter([1.0], [1.0, -0.95], pulses)  # glottal spectral tilt
    out = np.zeros(n)
    # formant targets change every syllable
    i = 0
    while i < n:
        m = int(rng.uniform(0.08, 0.25) * fs)
        seg = voiced[i:i + m]
        y = seg
        for f in (rng.uniform(300, 850), rng.uniform(900, 2300), rng.uniform(2300, 3200)):
            f = min(f, 0.45 * fs)  # only bites at reduced noise rates
            b, a = ss.iirpeak(f, 6.0, fs=fs)
            y = ss.lfilter(b, a, y)
        out[i:i + m] = y
        i += m
    syllables = np.clip(np.sin(2 * np.pi * rng.uniform(3, 5.5) * t + rng.uniform(0, 6)), 0, None) ** 0.7
    phrases = _level_track(rng, n, fs, -12, seg=(0.6, 2.5), off_prob=0.35)
    out = out / (np.std(out) + 1e-12) * syllables * phrases
    fric = _band_noise(rng, n, min(2000, 0.25 * fs), min(3600, 0.45 * fs), fs) * (rng.random(n // 800 + 1).repeat(800)[:n] < 0.15)
    return out + 0.3 * fric


def _alarm(rng, n, fs):
    t = np.arange(n) / fs
    f = rng.uniform(450, 1000)
    tone = sum(np.sin(2 * np.pi * k * f * t) / k for k in (1, 2, 3))
    period = rng.uniform(0.5, 2.0)
    duty = rng.uniform(0.15, 0.5)
    gate = ((t / period) % 1.0) < duty
    return tone * gate


def _footsteps(rng, n, fs):
    x = np.zeros(n)
    step = rng.uniform(0.45, 0.7)
    pos = rng.uniform(0, step)
    while pos * fs < n:
        i = int(pos * fs)
        m = min(int(0.05 * fs), n - i)
        x[i:i + m] += np.exp(-np.arange(m) / (0.008 * fs)) * rng.standard_normal(m)
        pos += step * rng.uniform(0.9, 1.1)
    sos = ss.butter(2, 400, fs=fs, output="sos")
    return ss.sosfilt(sos, x)


def _impacts(rng, n, fs, count):
    """Short loud broadband events: doors, trolleys, dropped objects."""
    x = np.zeros(n)
    for _ in range(count):
        dur = rng.uniform(0.1, 0.45)
        m = int(dur * fs)
        i = int(rng.uniform(0, max(n - m, 1)))
        m = min(m, n - i)
        cut = rng.uniform(200, 1500)
        sos = ss.butter(2, cut, fs=fs, output="sos")
        body = ss.sosfilt(sos, rng.standard_normal(m))
        body *= np.exp(-np.arange(m) / (m / 4)) / (np.std(body) + 1e-12)
        x[i:i + m] += rng.uniform(10, 40) * body
    return x


def hospital_noise(rng: np.random.Generator, duration_s: float, bursty: bool = False,
                   fs: float = NOISE_RATE_HZ) -> Signal:
    """One synthetic ward-noise recording, peak-normalized."""
    n = int(round(duration_s * fs))
    t = np.arange(n) / fs
    sos = ss.butter(1, rng.uniform(80, 400), fs=fs, output="sos")
    rumble = ss.sosfilt(sos, rng.standard_normal(n))
    x = rng.uniform(0.05, 0.3) * rumble / np.std(rumble)
    hum = sum(np.sin(2 * np.pi * 50 * k * t + rng.uniform(0, 6)) / k for k in (1, 2, 3))
    x += rng.uniform(0, 0.05) * hum
    # burst-type recordings come from calmer rooms: fewer, quieter talkers
    talkers = rng.integers(0, 3) if bursty else rng.integers(1, 5)
    talk_level = (0.1, 0.4) if bursty else (0.3, 1.0)
    for _ in range(talkers):
        x += rng.uniform(*talk_level) * _talker(rng, n, fs)
    if rng.random() < 0.3:
        x += rng.uniform(0.1, 0.4) * _alarm(rng, n, fs)
    if rng.random() < 0.4:
        x += rng.uniform(0.5, 2.0) * _footsteps(rng, n, fs)
    if bursty:
        x += np.std(x) * _impacts(rng, n, fs, rng.integers(1, 5))
    return normalize(Signal(x, fs))


@dataclass(frozen=True)
class CorpusConfig:
    n_normal: int = 7
    n_abnormal: int = 7
    n_noise: int = 144
    clean_duration_s: tuple = (10.0, 30.0)
    noise_duration_s: tuple = (4.0, 15.0)
    burst_fraction: float = 0.2
    noise_rate_hz: float = NOISE_RATE_HZ


def write_corpus(root, seed: int = 0, config: CorpusConfig = CorpusConfig()) -> dict:
    """Write ``clean/{normal,abnormal}/*.wav`` and ``noise/*.wav`` under ``root``.

    Returns (and stores as ``corpus.json``) a description of what was
    generated, including which noise files contain impacts.
    """
    root = Path(root)
    seeds = np.random.SeedSequence(seed).spawn(3)
    info = {"seed": seed, "clean": {}, "noise": {}}
    rng = np.random.default_rng(seeds[0])
    for label, count in (("normal", config.n_normal), ("abnormal", config.n_abnormal)):
        for i in range(count):
            dur = rng.uniform(*config.clean_duration_s)
            pathology = PATHOLOGIES[i % len(PATHOLOGIES)] if label == "abnormal" else None
            sig = heart_sound(rng, dur, label == "abnormal", pathology)
            name = f"{label}/{label[0]}{i:03d}.wav"
            write_wav(root / "clean" / name, sig)
            info["clean"][name] = {"duration_s": round(dur, 3), "pathology": pathology}
    rng = np.random.default_rng(seeds[1])
    n_bursty = int(round(config.burst_fraction * config.n_noise))
    bursty_idx = set(np.random.default_rng(seeds[2]).choice(config.n_noise, n_bursty, replace=False).tolist())
    for i in range(config.n_noise):
        dur = rng.uniform(*config.noise_duration_s)
        bursty = i in bursty_idx
        sig = hospital_noise(rng, dur, bursty, config.noise_rate_hz)
        name = f"ward{i:04d}.wav"
        write_wav(root / "noise" / name, sig)
        info["noise"][name] = {"duration_s": round(dur, 3), "bursty": bursty}
    (root / "corpus.json").write_text(json.dumps(info, indent=1, sort_keys=True) + "\n")
    return info


def burst_demo_noise(rng: np.random.Generator, duration_s: float, fs: float = PCG_RATE_HZ,
                     burst_times_s=(2.5, 6.0), burst_len_s: float = 0.3, burst_gain: float = 10.0) -> Signal:
    """Stationary background with loud impacts at known times (not normalized).

    Used to build single-case burst demonstrations where the burst
    positions must be known in advance.
    """
    n = int(round(duration_s * fs))
    sos = ss.butter(1, 300, fs=fs, output="sos")
    bg = ss.sosfilt(sos, rng.standard_normal(n))
    x = bg / np.std(bg)
    for t0 in burst_times_s:
        i = int(t0 * fs)
        m = min(int(burst_len_s * fs), n - i)
        sos_b = ss.butter(2, 500, fs=fs, output="sos")
        body = ss.sosfilt(sos_b, rng.standard_normal(m))
        x[i:i + m] += burst_gain * body / np.std(body) * np.exp(-np.arange(m) / (m / 3))
    return Signal(x, fs)


def burst_case(seed: int = 0, duration_s: float = 10.0, snr_db: float = -3.0, abnormal: bool = False):
    """One clean heart sound mixed with impact noise at ``snr_db``.

    Both sources are peak-normalized like dataset sources, then mixed
    through the default noise and reference paths. Returns
    ``(EntrySignals, burst_windows)`` where ``burst_windows`` lists the
    ``(start_s, end_s)`` span of every impact.
    """
    from .synth import MixSpec, build_entry

    rng = np.random.default_rng(seed)
    clean = normalize(heart_sound(rng, duration_s, abnormal))
    times, length = (0.25 * duration_s, 0.6 * duration_s), 0.3
    noise = normalize(burst_demo_noise(rng, duration_s, burst_times_s=times, burst_len_s=length))
    entry = build_entry(clean, noise, MixSpec("burst_case_clean", "burst_case_noise", snr_db, seed))
    return entry, [(t, t + length) for t in times]
