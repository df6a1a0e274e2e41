"""Noisy-dataset synthesis.

Each entry pairs one clean heart-sound recording with one ambient-noise
recording. The noise recording is tiled to the clean length, then sent
down two paths:

* the noise path, an all-pole filter ``1/A(z)``, models what leaks into
  the stethoscope and is scaled and added to the clean signal;
* the reference path, an FIR filter, models the ambient microphone.

Directory layout expected on input::

    <clean_root>/normal/*.wav
    <clean_root>/abnormal/*.wav
    <noise_root>/*.wav

Manifest CSV: ``#key=value`` metadata lines, then a header row and one row
per entry with the columns in :data:`MANIFEST_COLUMNS`. Coefficient lists
are space-separated; all floats are written with ``repr`` so they read back
bit-exactly.
"""

from __future__ import annotations

import csv
import functools
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.signal as ss

from .core import ReferenceSignal, Signal, SignalError, check_pair, normalize, rms_normalize, signal_power
from .resample import decimate, decimator_for
from .wavio import read_wav, write_wav

log = logging.getLogger(__name__)

GENERATOR_VERSION = "anc_dsp-synth/1"
DEFAULT_AR = (1.0, -0.5)
# minimum phase, so a short FIR canceller can invert it; see README
DEFAULT_MA = (1.0, -0.8, 0.4, -0.2)
SNR_RANGE_DB = (-10.0, 5.0)
DATASET_RATE_HZ = 2000.0
CLASSES = ("normal", "abnormal")

MANIFEST_COLUMNS = (
    "entry_id", "label", "clean_id", "noise_id", "target_snr_db", "realized_snr_db",
    "scale", "seed", "ar_coeffs", "ma_coeffs", "clean_path", "noisy_path",
    "reference_path", "status",
)


class UnstableARError(SignalError):
    pass


def _check_ar(ar):
    ar = np.asarray(ar, dtype=float)
    if ar.size == 0 or ar[0] == 0:
        raise UnstableARError("AR coefficients need a nonzero leading term")
    if ar.size > 1 and np.max(np.abs(np.roots(ar))) >= 1.0:
        raise UnstableARError(f"AR filter {tuple(ar)} has a pole on or outside the unit circle")


@dataclass(frozen=True)
class MixSpec:
    clean_id: str
    noise_id: str
    target_snr_db: float
    seed: int = 0
    ar_coeffs: tuple = DEFAULT_AR
    ma_coeffs: tuple = DEFAULT_MA

    def __post_init__(self):
        object.__setattr__(self, "ar_coeffs", tuple(float(a) for a in self.ar_coeffs))
        object.__setattr__(self, "ma_coeffs", tuple(float(b) for b in self.ma_coeffs))
        if not np.isfinite(self.target_snr_db):
            raise ValueError("target SNR must be finite")
        _check_ar(self.ar_coeffs)
        if not self.ma_coeffs:
            raise ValueError("reference path needs at least one FIR coefficient")


def tile_to_length(noise: Signal, target_len: int) -> Signal:
    """Repeat ``noise`` end to end and cut to ``target_len`` samples."""
    if len(noise) == 0:
        raise SignalError("cannot tile an empty noise recording")
    if target_len < 0:
        raise ValueError("target length must be non-negative")
    return noise.with_samples(np.resize(noise.samples, target_len))


def make_noise_path(raw_noise: Signal, spec: MixSpec) -> Signal:
    _check_ar(spec.ar_coeffs)
    return Signal(ss.lfilter([1.0], spec.ar_coeffs, raw_noise.samples), raw_noise.sample_rate_hz)


def make_reference_path(raw_noise: Signal, spec: MixSpec) -> ReferenceSignal:
    if not spec.ma_coeffs:
        raise ValueError("reference path needs at least one FIR coefficient")
    return ReferenceSignal(ss.lfilter(spec.ma_coeffs, [1.0], raw_noise.samples), raw_noise.sample_rate_hz)


def snr_scale(clean: Signal, noise: Signal, target_snr_db: float) -> float:
    """Gain on ``noise`` that puts it ``target_snr_db`` below ``clean`` in power."""
    check_pair(clean, noise, "clean and noise")
    p_clean = signal_power(clean)
    p_noise = signal_power(noise)
    if p_clean == 0 or p_noise == 0:
        raise SignalError("mixing needs nonzero clean and noise power")
    return float(np.sqrt(p_clean / (p_noise * 10.0 ** (target_snr_db / 10.0))))


def mix_at_snr(clean: Signal, noise: Signal, target_snr_db: float):
    """Return ``(clean + scale * noise, scale)`` with the requested SNR."""
    scale = snr_scale(clean, noise, target_snr_db)
    return clean.with_samples(clean.samples + scale * noise.samples), scale


# Dataset entries keep clean and scaled noise on a common power-of-two grid.
# Sums of grid values below GRID_LIMIT are exact in double precision, so
# noisy - scaled_noise reproduces the clean signal bit for bit.
MIX_GRID = 2.0 ** -40
GRID_LIMIT = 2.0 ** 12


def on_grid(x) -> np.ndarray:
    return np.round(np.asarray(x, dtype=np.float64) / MIX_GRID) * MIX_GRID


def scaled_noise(noise_path: Signal, scale: float) -> np.ndarray:
    """The additive noise component of an entry, exactly as it was mixed."""
    return on_grid(scale * noise_path.samples)


@dataclass
class EntrySignals:
    clean: Signal
    noisy: Signal
    reference: ReferenceSignal
    noise_path: Signal | None = None
    scale: float = float("nan")

    @property
    def realized_snr_db(self) -> float:
        return realized_snr_db(self.clean, self.noise_path, self.scale)


def realized_snr_db(clean: Signal, noise_path: Signal, scale: float) -> float:
    scaled = scaled_noise(noise_path, scale)
    return float(10.0 * np.log10(signal_power(clean) / float(np.mean(scaled * scaled))))


def build_entry(clean: Signal, raw_noise: Signal, spec: MixSpec) -> EntrySignals:
    """Synthesize one (clean, noisy, reference) triple in memory."""
    if clean.sample_rate_hz != raw_noise.sample_rate_hz:
        raise SignalError("clean and noise recordings must share a sample rate")
    tiled = tile_to_length(raw_noise, len(clean))
    noise = make_noise_path(tiled, spec)
    reference = make_reference_path(tiled, spec)
    clean = clean.with_samples(on_grid(clean.samples))
    scale = snr_scale(clean, noise, spec.target_snr_db)
    added = scaled_noise(noise, scale)
    if np.max(np.abs(clean.samples)) + np.max(np.abs(added)) >= GRID_LIMIT:
        raise SignalError("mixture amplitude too large for exact mixing")
    noisy = clean.with_samples(clean.samples + added)
    return EntrySignals(clean, noisy, reference, noise, scale)


# -- sources --------------------------------------------------------------

def discover_sources(clean_root, noise_root):
    """Sorted relative ids: ``({'normal': [...], 'abnormal': [...]}, [noise ids])``."""
    clean_root, noise_root = Path(clean_root), Path(noise_root)
    for p in (clean_root, noise_root):
        if not p.is_dir():
            raise FileNotFoundError(f"input directory {p} does not exist")
    clean = {}
    for label in CLASSES:
        d = clean_root / label
        clean[label] = sorted(f"{label}/{p.name}" for p in d.glob("*.wav")) if d.is_dir() else []
    noise = sorted(p.name for p in noise_root.glob("*.wav"))
    return clean, noise


@functools.lru_cache(maxsize=1024)
def load_source(path: str, normalization: str = "peak", rate_hz: float = DATASET_RATE_HZ) -> Signal:
    """Read a recording, decimate it to ``rate_hz`` if needed, normalize."""
    sig = read_wav(path)
    if sig.sample_rate_hz != rate_hz:
        sig = decimate(decimator_for(sig.sample_rate_hz, rate_hz), sig)
    if normalization == "peak":
        return normalize(sig)
    if normalization == "rms":
        return rms_normalize(sig)
    raise ValueError(f"unknown normalization {normalization!r}")


def pair_sources(clean: dict, noise: list):
    """Noise ids alternate between classes (even sorted index -> normal).

    Each class pairs all its clean recordings with all the noise ids
    assigned to it. Returns ``[(label, clean_id, noise_id), ...]``.
    """
    halves = {"normal": noise[0::2], "abnormal": noise[1::2]}
    pairs = []
    for label in CLASSES:
        for cid in clean.get(label, []):
            for nid in halves[label]:
                pairs.append((label, cid, nid))
    return pairs


def entry_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


# -- manifest -------------------------------------------------------------

@dataclass
class ManifestEntry:
    entry_id: str
    label: str
    spec: MixSpec
    realized_snr_db: float = float("nan")
    scale: float = float("nan")
    clean_path: str = ""
    noisy_path: str = ""
    reference_path: str = ""
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def to_row(self):
        s = self.spec
        return [
            self.entry_id, self.label, s.clean_id, s.noise_id, repr(float(s.target_snr_db)),
            repr(float(self.realized_snr_db)), repr(float(self.scale)), str(s.seed),
            " ".join(repr(a) for a in s.ar_coeffs), " ".join(repr(b) for b in s.ma_coeffs),
            self.clean_path, self.noisy_path, self.reference_path, self.status,
        ]

    @classmethod
    def from_row(cls, row: dict) -> "ManifestEntry":
        spec = MixSpec(
            row["clean_id"], row["noise_id"], float(row["target_snr_db"]), int(row["seed"]),
            tuple(float(a) for a in row["ar_coeffs"].split()),
            tuple(float(b) for b in row["ma_coeffs"].split()),
        )
        return cls(row["entry_id"], row["label"], spec, float(row["realized_snr_db"]),
                   float(row["scale"]), row["clean_path"], row["noisy_path"],
                   row["reference_path"], row["status"])


@dataclass
class DatasetManifest:
    entries: list
    generator_version: str = GENERATOR_VERSION
    metadata: dict = field(default_factory=dict)
    path: Path | None = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def by_id(self, entry_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.entry_id == entry_id:
                return e
        raise KeyError(f"no manifest entry {entry_id!r}")

    def subset(self, entry_ids) -> "DatasetManifest":
        keep = set(entry_ids)
        return replace(self, entries=[e for e in self.entries if e.entry_id in keep])

    def of_class(self, label: str) -> list:
        return [e for e in self.entries if e.label == label]

    @property
    def base_dir(self) -> Path:
        return self.path.parent if self.path is not None else Path(".")

    def source_path(self, kind: str, source_id: str) -> Path:
        root = Path(self.metadata[f"{kind}_root"])
        if not root.is_absolute():
            root = self.base_dir / root
        return root / source_id

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"#generator_version={self.generator_version}\n")
        for k in sorted(self.metadata):
            buf.write(f"#{k}={self.metadata[k]}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(MANIFEST_COLUMNS)
        for e in self.entries:
            w.writerow(e.to_row())
        return buf.getvalue()

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        self.path = path
        return path

    @classmethod
    def read(cls, path) -> "DatasetManifest":
        path = Path(path)
        meta, body = {}, []
        for line in path.read_text().splitlines():
            if line.startswith("#"):
                k, _, v = line[1:].partition("=")
                meta[k] = v
            elif line.strip():
                body.append(line)
        if not body or tuple(next(csv.reader(body[:1]))) != MANIFEST_COLUMNS:
            raise ValueError(f"{path}: unexpected manifest columns")
        rows = list(csv.DictReader(body))
        version = meta.pop("generator_version", "")
        return cls([ManifestEntry.from_row(r) for r in rows], version, meta, path)


@dataclass(frozen=True)
class DatasetConfig:
    snr_range_db: tuple = SNR_RANGE_DB
    ar_coeffs: tuple = DEFAULT_AR
    ma_coeffs: tuple = DEFAULT_MA
    normalization: str = "peak"
    write_audio: bool = True
    audio_format: str = "float32"
    workers: int = 1

    def __post_init__(self):
        lo, hi = self.snr_range_db
        if not lo <= hi:
            raise ValueError("SNR range must be (low, high) with low <= high")
        _check_ar(self.ar_coeffs)
        if self.normalization not in ("peak", "rms"):
            raise ValueError(f"unknown normalization {self.normalization!r}")
        if self.audio_format not in ("float32", "float64", "int16"):
            raise ValueError(f"unknown audio format {self.audio_format!r}")


def plan_entries(clean: dict, noise: list, seed: int, config: DatasetConfig):
    lo, hi = config.snr_range_db
    entries = []
    for i, (label, cid, nid) in enumerate(pair_sources(clean, noise)):
        es = entry_seed(seed, i)
        snr = float(np.random.default_rng(es).uniform(lo, hi))
        spec = MixSpec(cid, nid, snr, es, config.ar_coeffs, config.ma_coeffs)
        entries.append(ManifestEntry(f"{label}_{i:05d}", label, spec))
    return entries


def _materialize(args):
    entry, clean_path, noise_path, out_dir, config = args
    entry = replace(entry)
    try:
        clean = load_source(str(clean_path), config.normalization)
        raw = load_source(str(noise_path), config.normalization)
        sig = build_entry(clean, raw, entry.spec)
        entry.scale = sig.scale
        entry.realized_snr_db = sig.realized_snr_db
        if config.write_audio:
            rel = Path("audio") / entry.entry_id
            for kind, s in (("clean", sig.clean), ("noisy", sig.noisy), ("reference", sig.reference)):
                write_wav(Path(out_dir) / rel / f"{kind}.wav", s, config.audio_format)
            entry.clean_path = str(rel / "clean.wav")
            entry.noisy_path = str(rel / "noisy.wav")
            entry.reference_path = str(rel / "reference.wav")
    except (OSError, ValueError) as exc:
        entry.status = f"error: {type(exc).__name__}: {exc}".replace("\n", " ")
        log.warning("entry %s failed: %s", entry.entry_id, exc)
    return entry


def generate_dataset(clean_root, noise_root, out_dir, seed: int = 0,
                     config: DatasetConfig = DatasetConfig()) -> DatasetManifest:
    """Synthesize every (clean, noise) pairing and write ``manifest.csv``.

    Failures on individual entries are recorded in the manifest ``status``
    column; the run continues.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    clean, noise = discover_sources(clean_root, noise_root)
    if not noise or not any(clean.values()):
        raise FileNotFoundError("need at least one clean and one noise recording")
    entries = plan_entries(clean, noise, seed, config)
    clean_root, noise_root = Path(clean_root), Path(noise_root)
    jobs = [(e, clean_root / e.spec.clean_id, noise_root / e.spec.noise_id, out_dir, config)
            for e in entries]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            done = list(pool.map(_materialize, jobs, chunksize=16))
    else:
        done = [_materialize(j) for j in jobs]
    metadata = {
        "seed": int(seed),
        "clean_root": str(clean_root.resolve()),
        "noise_root": str(noise_root.resolve()),
        "snr_range_db": " ".join(repr(float(v)) for v in config.snr_range_db),
        "normalization": config.normalization,
        "ar_coeffs": " ".join(repr(float(v)) for v in config.ar_coeffs),
        "ma_coeffs": " ".join(repr(float(v)) for v in config.ma_coeffs),
        "audio_format": config.audio_format if config.write_audio else "none",
        "sample_rate_hz": repr(DATASET_RATE_HZ),
    }
    manifest = DatasetManifest(done, GENERATOR_VERSION, metadata)
    manifest.write(out_dir / "manifest.csv")
    return manifest


def regenerate_dataset(manifest: "DatasetManifest | str | Path", out_dir, workers: int = 1) -> DatasetManifest:
    """Rebuild a dataset from the seed and settings recorded in ``manifest``."""
    if not isinstance(manifest, DatasetManifest):
        manifest = DatasetManifest.read(manifest)
    meta = manifest.metadata

    def floats(key):
        return tuple(float(v) for v in meta[key].split())

    fmt = meta.get("audio_format", "none")
    config = DatasetConfig(
        snr_range_db=floats("snr_range_db"), ar_coeffs=floats("ar_coeffs"),
        ma_coeffs=floats("ma_coeffs"), normalization=meta["normalization"],
        write_audio=fmt != "none", audio_format=fmt if fmt != "none" else "float32",
        workers=workers,
    )
    return generate_dataset(meta["clean_root"], meta["noise_root"], out_dir, int(meta["seed"]), config)


def load_entry(manifest: DatasetManifest, entry: ManifestEntry, rebuild: bool = False) -> EntrySignals:
    """Signals for one entry: read the stored WAV triple if present, else rebuild from sources."""
    if not entry.ok:
        raise SignalError(f"entry {entry.entry_id} failed during generation: {entry.status}")
    if entry.noisy_path and not rebuild:
        base = manifest.base_dir
        clean = read_wav(base / entry.clean_path)
        noisy = read_wav(base / entry.noisy_path)
        reference = read_wav(base / entry.reference_path, cls=ReferenceSignal)
        return EntrySignals(clean, noisy, reference, None, entry.scale)
    norm = manifest.metadata.get("normalization", "peak")
    clean = load_source(str(manifest.source_path("clean", entry.spec.clean_id)), norm)
    raw = load_source(str(manifest.source_path("noise", entry.spec.noise_id)), norm)
    return build_entry(clean, raw, entry.spec)


def raw_noise(manifest: DatasetManifest, entry: ManifestEntry) -> Signal:
    norm = manifest.metadata.get("normalization", "peak")
    return load_source(str(manifest.source_path("noise", entry.spec.noise_id)), norm)
