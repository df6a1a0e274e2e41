"""Filter-comparison experiments over a synthesized dataset.

Outputs of :func:`run_experiment` (all under ``output_dir``):

``per_entry.csv``
    one row per (entry, filter): ``entry_id, label, filter, input_snr_db,
    status, nmse, delta_snr_db, cc, nmae, detail``. Floats use ``repr``
    so the summary recomputes exactly from this file.
``summary.csv``
    one row per (class, filter): ``label, filter, n, n_excluded`` then
    mean and population standard deviation of each metric.
``experiment.json``
    the fully resolved experiment configuration.
``run.log``
    timestamps and counts; the only file that changes between reruns.

A case report directory (:func:`report_case`) holds ``case.json``,
``metrics.csv``, ``traces.csv`` (``time_s, clean, noisy, denoised,
noise_estimate, effective_step, burst_flag``) and one
``spectrogram_<signal>.csv`` per trace: the first row is ``freq_hz``
followed by the frame times, every further row a frequency followed by
power in dB.
"""

from __future__ import annotations

import csv
import json
import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.signal as ss

from .adaptive import AdaptiveConfig, DivergenceError, Variant, run_filter
from .core import Signal
from .metrics import MetricsRecord, evaluate
from .sosfilt import pcg_bandpass
from .synth import DatasetManifest, load_entry, raw_noise

log = logging.getLogger(__name__)

#: the default comparison: identical parameters, one filter per update rule
DEFAULT_FILTERS = tuple(AdaptiveConfig(variant=v) for v in Variant)

#: max/median ratio of 50 ms window energies above which a noise recording counts as bursty
BURST_THRESHOLD = 30.0
BURST_WINDOW_S = 0.05

ENTRY_COLUMNS = ("entry_id", "label", "filter", "input_snr_db", "status",
                 "nmse", "delta_snr_db", "cc", "nmae", "detail")
SUMMARY_COLUMNS = ("label", "filter", "n", "n_excluded",
                   "nmse_mean", "nmse_std", "delta_snr_db_mean", "delta_snr_db_std",
                   "cc_mean", "cc_std", "nmae_mean", "nmae_std")


class BurstSelectionWarning(UserWarning):
    pass


def filter_label(config: AdaptiveConfig) -> str:
    return config.variant.value


@dataclass(frozen=True)
class ExperimentConfig:
    manifest_path: str
    filters: tuple = DEFAULT_FILTERS
    labels: tuple | None = None
    post_filter: bool = False
    output_dir: str | None = None
    workers: int = 1
    discard_s: float = 0.0
    entry_ids: tuple | None = None
    rebuild_audio: bool = False

    def __post_init__(self):
        if not self.filters:
            raise ValueError("need at least one filter configuration")
        if self.labels is not None and len(self.labels) != len(self.filters):
            raise ValueError("labels must match filters one to one")

    def filter_labels(self):
        if self.labels is not None:
            return tuple(self.labels)
        return tuple(filter_label(f) for f in self.filters)

    def as_dict(self) -> dict:
        return {
            "manifest_path": str(self.manifest_path),
            "filters": [dict(f.as_dict(), label=lab) for f, lab in zip(self.filters, self.filter_labels())],
            "post_filter": self.post_filter,
            "discard_s": self.discard_s,
            "workers": self.workers,
            "entry_ids": list(self.entry_ids) if self.entry_ids is not None else None,
            "rebuild_audio": self.rebuild_audio,
        }


@dataclass(frozen=True)
class EntryResult:
    entry_id: str
    label: str
    filter: str
    input_snr_db: float
    status: str
    metrics: MetricsRecord | None = None
    detail: str = ""

    def to_row(self):
        vals = self.metrics.as_row() if self.metrics is not None else [float("nan")] * 4
        return [self.entry_id, self.label, self.filter, repr(float(self.input_snr_db)), self.status,
                *(repr(float(v)) for v in vals), self.detail]

    @classmethod
    def from_row(cls, row: dict) -> "EntryResult":
        m = None
        if row["status"] == "ok":
            m = MetricsRecord(*(float(row[k]) for k in MetricsRecord.FIELDS))
        return cls(row["entry_id"], row["label"], row["filter"], float(row["input_snr_db"]),
                   row["status"], m, row["detail"])


@dataclass(frozen=True)
class SummaryRow:
    label: str
    filter: str
    n: int
    n_excluded: int
    mean: dict
    std: dict

    def to_row(self):
        out = [self.label, self.filter, str(self.n), str(self.n_excluded)]
        for k in MetricsRecord.FIELDS:
            out += [repr(float(self.mean[k])), repr(float(self.std[k]))]
        return out

    def __str__(self):
        cells = "  ".join(f"{k}={self.mean[k]:.4f}±{self.std[k]:.4f}" for k in MetricsRecord.FIELDS)
        return f"{self.label:9s} {self.filter:8s} n={self.n:<5d} {cells}"


@dataclass
class ExperimentResult:
    summary: list
    entries: list
    output_dir: Path | None = None

    def row(self, label: str, filt: str) -> SummaryRow:
        for r in self.summary:
            if r.label == label and r.filter == filt:
                return r
        raise KeyError((label, filt))


def _score_entry(manifest, entry, filters, labels, post_filter, discard_s, rebuild):
    sig = load_entry(manifest, entry, rebuild=rebuild)
    discard = int(round(discard_s * sig.clean.sample_rate_hz))
    clean = pcg_bandpass(sig.clean) if post_filter else sig.clean
    results = []
    for cfg, lab in zip(filters, labels):
        try:
            denoised, _ = run_filter(cfg, sig.noisy, sig.reference)
        except DivergenceError as exc:
            results.append(EntryResult(entry.entry_id, entry.label, lab, entry.spec.target_snr_db,
                                       "diverged", None, f"sample {exc.sample_index}"))
            continue
        noisy = sig.noisy
        if post_filter:
            denoised, noisy = pcg_bandpass(denoised), pcg_bandpass(noisy)
        m = evaluate(clean, noisy, denoised, discard_samples=discard)
        results.append(EntryResult(entry.entry_id, entry.label, lab, entry.spec.target_snr_db, "ok", m))
    return results


def _score_chunk(args):
    manifest, entries, filters, labels, post_filter, discard_s, rebuild = args
    out = []
    for e in entries:
        out.extend(_score_entry(manifest, e, filters, labels, post_filter, discard_s, rebuild))
    return out


def summarize(results) -> list:
    """Mean and population std per (class, filter); diverged rows are counted, not averaged."""
    groups: dict = {}
    for r in results:
        groups.setdefault((r.label, r.filter), []).append(r)
    rows = []
    for (label, filt), rs in sorted(groups.items()):
        ok = [r.metrics for r in rs if r.status == "ok"]
        n_ex = len(rs) - len(ok)
        if not ok:
            nan = {k: float("nan") for k in MetricsRecord.FIELDS}
            rows.append(SummaryRow(label, filt, 0, n_ex, nan, dict(nan)))
            continue
        arr = np.array([m.as_row() for m in ok])
        mean = dict(zip(MetricsRecord.FIELDS, arr.mean(axis=0).tolist()))
        std = dict(zip(MetricsRecord.FIELDS, arr.std(axis=0).tolist()))
        rows.append(SummaryRow(label, filt, len(ok), n_ex, mean, std))
    return rows


def write_entries_csv(path, results):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ENTRY_COLUMNS)
        for r in results:
            w.writerow(r.to_row())


def read_entries_csv(path) -> list:
    with open(path, newline="") as fh:
        return [EntryResult.from_row(row) for row in csv.DictReader(fh)]


def write_summary_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow(r.to_row())


def run_experiment(config: ExperimentConfig, manifest: DatasetManifest | None = None) -> ExperimentResult:
    """Score every manifest entry with every filter and aggregate per class."""
    t_start = time.time()
    if manifest is None:
        manifest = DatasetManifest.read(config.manifest_path)
    entries = [e for e in manifest if e.ok]
    skipped = len(manifest) - len(entries)
    if config.entry_ids is not None:
        keep = set(config.entry_ids)
        entries = [e for e in entries if e.entry_id in keep]
    if not entries:
        raise ValueError("no usable entries to evaluate")
    entries.sort(key=lambda e: e.entry_id)
    labels = config.filter_labels()
    common = (tuple(config.filters), labels, config.post_filter, config.discard_s, config.rebuild_audio)

    if config.workers > 1:
        n_chunks = config.workers * 4
        chunks = [entries[i::n_chunks] for i in range(n_chunks)]
        jobs = [(manifest, c, *common) for c in chunks if c]
        with ProcessPoolExecutor(config.workers) as pool:
            results = [r for part in pool.map(_score_chunk, jobs) for r in part]
    else:
        results = _score_chunk((manifest, entries, *common))
    order = {lab: i for i, lab in enumerate(labels)}
    results.sort(key=lambda r: (r.entry_id, order[r.filter]))

    n_div = sum(r.status != "ok" for r in results)
    if n_div:
        log.warning("%d (entry, filter) runs diverged and are excluded from the summary", n_div)
    summary = summarize(results)

    out = None
    if config.output_dir is not None:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_entries_csv(out / "per_entry.csv", results)
        write_summary_csv(out / "summary.csv", summary)
        (out / "experiment.json").write_text(json.dumps(config.as_dict(), indent=2, sort_keys=True) + "\n")
        with open(out / "run.log", "a") as fh:
            fh.write(f"{time.strftime('%Y-%m-%dT%H:%M:%S')} entries={len(entries)} "
                     f"filters={len(labels)} diverged={n_div} skipped_failed_entries={skipped} "
                     f"elapsed_s={time.time() - t_start:.2f}\n")
    return ExperimentResult(summary, results, out)


# -- burst subset ---------------------------------------------------------

def burst_ratio(signal: Signal, window_s: float = BURST_WINDOW_S) -> float:
    """Max over median of short-time energies in non-overlapping windows."""
    k = max(int(round(window_s * signal.sample_rate_hz)), 1)
    n = len(signal) // k
    if n == 0:
        return 1.0
    x = signal.samples[: n * k].reshape(n, k)
    energy = np.sum(x * x, axis=1)
    med = np.median(energy)
    if med == 0:
        return float("inf") if energy.max() > 0 else 1.0
    return float(energy.max() / med)


def select_burst_subset(manifest: DatasetManifest, threshold: float = BURST_THRESHOLD,
                        window_s: float = BURST_WINDOW_S) -> DatasetManifest:
    """Entries whose noise recording has ``burst_ratio > threshold``.

    An empty selection emits :class:`BurstSelectionWarning` so the caller
    does not silently run an empty experiment.
    """
    ratios: dict = {}
    keep = []
    for e in manifest:
        if not e.ok:
            continue
        nid = e.spec.noise_id
        if nid not in ratios:
            ratios[nid] = burst_ratio(raw_noise(manifest, e), window_s)
        if ratios[nid] > threshold:
            keep.append(e.entry_id)
    if not keep:
        warnings.warn(f"no entry exceeds burst ratio {threshold}", BurstSelectionWarning, stacklevel=2)
    sub = manifest.subset(keep)
    sub.metadata = dict(manifest.metadata, burst_threshold=repr(float(threshold)),
                        burst_window_s=repr(float(window_s)))
    return sub


# -- single case ----------------------------------------------------------

@dataclass
class CaseReport:
    entry_id: str
    config: AdaptiveConfig
    clean: Signal
    noisy: Signal
    denoised: Signal
    noise_estimate: np.ndarray
    effective_step: np.ndarray
    burst_flag: np.ndarray
    metrics: MetricsRecord
    input_snr_db: float
    spectrograms: dict = field(default_factory=dict)

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        fs = self.clean.sample_rate_hz
        meta = {"entry_id": self.entry_id, "filter": self.config.as_dict(),
                "input_snr_db": self.input_snr_db, "sample_rate_hz": fs,
                "burst_fraction": float(np.mean(self.burst_flag))}
        (out / "case.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        with open(out / "metrics.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(MetricsRecord.FIELDS)
            w.writerow([repr(float(v)) for v in self.metrics.as_row()])
        t = np.arange(len(self.clean)) / fs
        cols = np.column_stack([t, self.clean.samples, self.noisy.samples, self.denoised.samples,
                                self.noise_estimate, self.effective_step, self.burst_flag.astype(int)])
        np.savetxt(out / "traces.csv", cols, delimiter=",", fmt="%.17g",
                   header="time_s,clean,noisy,denoised,noise_estimate,effective_step,burst_flag",
                   comments="")
        for name, (f, tt, sxx) in self.spectrograms.items():
            with open(out / f"spectrogram_{name}.csv", "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["freq_hz", *(f"{v:.6g}" for v in tt)])
                for fi, row in zip(f, sxx):
                    w.writerow([f"{fi:.6g}", *(f"{v:.6g}" for v in row)])
        return out


def spectrogram_db(signal: Signal, segment_s: float = 0.128):
    nper = int(round(segment_s * signal.sample_rate_hz))
    f, t, sxx = ss.spectrogram(signal.samples, fs=signal.sample_rate_hz, window="hann",
                               nperseg=nper, noverlap=nper // 2)
    return f, t, 10 * np.log10(sxx + 1e-20)


def report_case(manifest: DatasetManifest, entry_id: str, config: AdaptiveConfig = AdaptiveConfig(),
                out_dir=None, rebuild: bool = False) -> CaseReport:
    """Run one filter on one entry and collect traces, metrics and spectrograms."""
    entry = manifest.by_id(entry_id)
    sig = load_entry(manifest, entry, rebuild=rebuild)
    return case_from_signals(entry_id, config, sig.clean, sig.noisy, sig.reference,
                             entry.spec.target_snr_db, out_dir)


def case_from_signals(entry_id, config, clean, noisy, reference, input_snr_db=float("nan"), out_dir=None):
    denoised, trace = run_filter(config, noisy, reference)
    report = CaseReport(
        entry_id, config, clean, noisy, denoised,
        trace.noise_estimate, trace.effective_step, trace.burst_flag,
        evaluate(clean, noisy, denoised), float(input_snr_db),
        {name: spectrogram_db(s) for name, s in
         (("clean", clean), ("noisy", noisy), ("denoised", denoised))},
    )
    if out_dir is not None:
        report.write(out_dir)
    return report
