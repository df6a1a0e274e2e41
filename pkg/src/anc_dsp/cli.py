"""``anc-dsp`` command-line entry point.

Every subcommand writes its fully resolved arguments to ``config.json``
in its output directory (for single-file outputs: ``<output>.config.json``
next to the file). ``anc-dsp replay <config.json>`` reruns from that file
alone.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .adaptive import AdaptiveConfig, DivergenceError, Variant, average_references
from .core import AncError, ReferenceSignal, SampleRateError, Signal
from .sosfilt import COEFF_DIR_ENV, CoefficientFileError, ECG_RATE_HZ

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DIVERGED = 4

EPILOG = f"""\
exit codes:
  0  success
  2  invalid configuration or arguments
  3  input/output error (missing file, unreadable audio, bad coefficient file)
  4  adaptive filter diverged

environment:
  {COEFF_DIR_ENV}  directory of *.sos coefficient files that replaces the
                     shipped filter designs (same file names)
"""

log = logging.getLogger("anc_dsp")


# -- argument groups ------------------------------------------------------

def _add_filter_args(p, variant_default="ba-nlms"):
    d = AdaptiveConfig()
    g = p.add_argument_group("adaptive filter")
    g.add_argument("--variant", default=variant_default, choices=[v.value for v in Variant])
    g.add_argument("--filter-length", type=int, default=d.filter_length, help="taps L (default %(default)s)")
    g.add_argument("--mu0", type=float, default=d.mu0, help="base step size (default %(default)s)")
    g.add_argument("--epsilon", type=float, default=d.epsilon, help="regularizer (default %(default)s)")
    g.add_argument("--alpha", type=float, default=d.alpha, help="energy smoothing (default %(default)s)")
    g.add_argument("--eta", type=float, default=d.eta, help="burst threshold factor (default %(default)s)")
    g.add_argument("--beta", type=float, default=d.beta, help="burst step multiplier (default %(default)s)")


def _filter_config(a, variant=None) -> AdaptiveConfig:
    return AdaptiveConfig(a.filter_length, a.mu0, a.epsilon, a.alpha, a.eta, a.beta,
                          variant if variant is not None else a.variant)


def _add_pipeline_args(p, bandpass_default):
    g = p.add_argument_group("pipeline")
    g.add_argument("--input", required=True, help="primary (chest) recording, WAV")
    g.add_argument("--reference", required=True, action="append",
                   help="ambient reference WAV; repeat to average several channels")
    g.add_argument("--output", required=True, help="denoised WAV to write")
    g.add_argument("--rate", type=float, default=None, help="override the sample rate in the WAV headers")
    g.add_argument("--bandpass", action=argparse.BooleanOptionalAction, default=bandpass_default,
                   help="apply the 20-200 Hz band-pass after cancellation (default %(default)s)")
    g.add_argument("--clean", default=None, help="ground-truth clean WAV; prints metrics when given")
    _add_filter_args(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anc-dsp",
        description="Adaptive noise cancellation for heart sounds, ECG filtering and evaluation.",
        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_):
        return sub.add_parser(name, help=help_, description=help_, epilog=EPILOG,
                              formatter_class=argparse.RawDescriptionHelpFormatter)

    p = add("corpus", "write a synthetic heart-sound and ward-noise source corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-normal", type=int, default=7)
    p.add_argument("--n-abnormal", type=int, default=7)
    p.add_argument("--n-noise", type=int, default=144)
    p.add_argument("--burst-fraction", type=float, default=0.2)

    p = add("synth", "synthesize the noisy dataset from clean and noise recordings")
    p.add_argument("--clean", required=True, help="directory with normal/ and abnormal/ WAVs")
    p.add_argument("--noise", required=True, help="directory of noise WAVs")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snr-min", type=float, default=-10.0)
    p.add_argument("--snr-max", type=float, default=5.0)
    p.add_argument("--ar", type=float, nargs="+", default=None, help="noise-path AR denominator")
    p.add_argument("--ma", type=float, nargs="+", default=None, help="reference-path MA taps")
    p.add_argument("--normalization", choices=["peak", "rms"], default="peak")
    p.add_argument("--no-audio", action="store_true", help="manifest only; signals are rebuilt on demand")
    p.add_argument("--audio-format", choices=["float32", "float64", "int16"], default="float32",
                   help="float64 keeps stored entries exactly decomposable")
    p.add_argument("--workers", type=int, default=1)

    p = add("denoise", "cancel ambient noise in one recording")
    _add_pipeline_args(p, bandpass_default=False)

    p = add("stream", "run the block-streaming pipeline with timing")
    _add_pipeline_args(p, bandpass_default=True)
    p.add_argument("--block-size", type=int, default=256, help="samples per block after decimation")
    p.add_argument("--single-thread", action="store_true", help="inline producer instead of a thread")
    p.add_argument("--timing-out", default=None, help="timing JSON path (default <output>.timing.json)")

    p = add("bench", "compare filters over a synthesized dataset")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--variants", nargs="+", default=[v.value for v in Variant],
                   choices=[v.value for v in Variant])
    p.add_argument("--post-filter", action="store_true", help="band-pass signals before scoring")
    p.add_argument("--burst", action="store_true", help="restrict to the burst subset")
    p.add_argument("--burst-threshold", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--rebuild", action="store_true", help="rebuild signals from sources, ignore stored WAVs")
    _add_filter_args(p)

    p = add("ecg", "baseline, low-pass and mains-notch filtering of a 500 Hz ECG")
    p.add_argument("--input", required=True, help="WAV, or single-column CSV")
    p.add_argument("--output", required=True, help="WAV or CSV, chosen by extension")
    p.add_argument("--rate", type=float, default=None, help="sample rate (CSV default 500)")
    p.add_argument("--powerline", type=int, choices=[50, 60], default=50)

    p = add("report", "single-case report: traces, spectrograms and metrics")
    p.add_argument("--manifest", required=True)
    p.add_argument("--entry", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--rebuild", action="store_true")
    _add_filter_args(p)

    p = add("replay", "rerun a command from its echoed config.json")
    p.add_argument("config")
    return parser


# -- helpers --------------------------------------------------------------

def _echo_config(path: Path, args) -> None:
    data = {k: v for k, v in vars(args).items() if k not in ("verbose",)}
    data["anc_dsp_version"] = __version__
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _sidecar(output: str, suffix: str) -> Path:
    return Path(str(output) + suffix)


def _read_pcg_inputs(a):
    from .wavio import read_wav

    primary = read_wav(a.input, a.rate)
    refs = [read_wav(r, a.rate, cls=ReferenceSignal) for r in a.reference]
    reference = refs[0] if len(refs) == 1 else average_references(refs)
    return primary, reference


def _stream_config(a, primary: Signal, block_size=256, threaded=True):
    from .resample import decimator_for
    from .stream import StreamConfig

    dec = None
    if primary.sample_rate_hz != 2000:
        try:
            dec = decimator_for(primary.sample_rate_hz, 2000)
        except SampleRateError:
            # without the band-pass stage the canceller can run at any rate
            if a.bandpass:
                raise
    return StreamConfig(block_size, _filter_config(a), dec, a.bandpass, threaded)


def _print_metrics(a, out: Signal, primary: Signal):
    if a.clean is None:
        return None
    from .metrics import evaluate
    from .resample import decimate
    from .wavio import read_wav

    clean = read_wav(a.clean, a.rate)
    if clean.sample_rate_hz != out.sample_rate_hz:
        from .resample import decimator_for

        spec = decimator_for(clean.sample_rate_hz, out.sample_rate_hz)
        clean, primary = decimate(spec, clean), decimate(spec, primary)
    m = evaluate(clean, primary, out)
    d = m.as_dict()
    print(json.dumps(d, sort_keys=True))
    _sidecar(a.output, ".metrics.json").write_text(json.dumps(d, indent=2, sort_keys=True) + "\n")
    return m


# -- commands -------------------------------------------------------------

def cmd_corpus(a) -> int:
    from .corpus import CorpusConfig, write_corpus

    cfg = CorpusConfig(n_normal=a.n_normal, n_abnormal=a.n_abnormal, n_noise=a.n_noise,
                       burst_fraction=a.burst_fraction)
    out = Path(a.out)
    write_corpus(out, a.seed, cfg)
    _echo_config(out / "config.json", a)
    print(f"corpus written to {out}")
    return EXIT_OK


def cmd_synth(a) -> int:
    from .synth import DEFAULT_AR, DEFAULT_MA, DatasetConfig, generate_dataset

    cfg = DatasetConfig(
        snr_range_db=(a.snr_min, a.snr_max),
        ar_coeffs=tuple(a.ar) if a.ar else DEFAULT_AR,
        ma_coeffs=tuple(a.ma) if a.ma else DEFAULT_MA,
        normalization=a.normalization, write_audio=not a.no_audio,
        audio_format=a.audio_format, workers=a.workers,
    )
    a.ar, a.ma = list(cfg.ar_coeffs), list(cfg.ma_coeffs)
    for d in (a.clean, a.noise):
        if not Path(d).is_dir():
            raise FileNotFoundError(f"input directory not found: {d}")
    manifest = generate_dataset(a.clean, a.noise, a.out, a.seed, cfg)
    _echo_config(Path(a.out) / "config.json", a)
    failed = sum(not e.ok for e in manifest)
    counts = {c: len(manifest.of_class(c)) for c in ("normal", "abnormal")}
    print(f"{len(manifest)} entries ({counts['normal']} normal, {counts['abnormal']} abnormal), "
          f"{failed} failed -> {Path(a.out) / 'manifest.csv'}")
    return EXIT_OK if failed == 0 else EXIT_IO


def cmd_denoise(a) -> int:
    from .stream import batch_process
    from .wavio import write_wav

    primary, reference = _read_pcg_inputs(a)
    cfg = _stream_config(a, primary)
    a.resolved = cfg.as_dict()
    out = batch_process(cfg, primary, reference)
    write_wav(a.output, out)
    _echo_config(_sidecar(a.output, ".config.json"), a)
    _print_metrics(a, out, primary)
    return EXIT_OK


def cmd_stream(a) -> int:
    from .stream import stream_process
    from .wavio import write_wav

    primary, reference = _read_pcg_inputs(a)
    cfg = _stream_config(a, primary, a.block_size, not a.single_thread)
    a.resolved = cfg.as_dict()
    out, report = stream_process(cfg, primary, reference)
    write_wav(a.output, out)
    timing = Path(a.timing_out) if a.timing_out else _sidecar(a.output, ".timing.json")
    timing.write_text(report.to_json())
    timing.with_suffix(".csv").write_text(report.to_csv())
    _echo_config(_sidecar(a.output, ".config.json"), a)
    print(f"{report.n_blocks} blocks, real-time factor {report.real_time_factor:.4g}, "
          f"{report.deadline_misses} deadline misses")
    _print_metrics(a, out, primary)
    return EXIT_OK


def cmd_bench(a) -> int:
    from .bench import BURST_THRESHOLD, ExperimentConfig, run_experiment, select_burst_subset
    from .synth import DatasetManifest

    manifest = DatasetManifest.read(a.manifest)
    if a.burst:
        if a.burst_threshold is None:
            a.burst_threshold = BURST_THRESHOLD
        manifest = select_burst_subset(manifest, a.burst_threshold)
        if len(manifest) == 0:
            print("burst subset is empty; nothing to evaluate", file=sys.stderr)
            return EXIT_CONFIG
    filters = tuple(_filter_config(a, v) for v in a.variants)
    cfg = ExperimentConfig(str(Path(a.manifest).resolve()), filters, post_filter=a.post_filter,
                           output_dir=a.out, workers=a.workers, rebuild_audio=a.rebuild,
                           entry_ids=tuple(e.entry_id for e in manifest) if a.burst else None)
    result = run_experiment(cfg, manifest)
    _echo_config(Path(a.out) / "config.json", a)
    for row in result.summary:
        print(row)
    excluded = sum(r.n_excluded for r in result.summary)
    if excluded:
        print(f"{excluded} diverged runs excluded (see per_entry.csv)", file=sys.stderr)
    return EXIT_OK


def cmd_ecg(a) -> int:
    from .metrics import ECG_BANDS, band_snr
    from .sosfilt import ecg_pipeline
    from .wavio import read_signal, write_signal

    rate = a.rate
    if rate is None and Path(a.input).suffix.lower() != ".wav":
        rate = ECG_RATE_HZ
    sig = read_signal(a.input, rate)
    out = ecg_pipeline(sig, a.powerline)
    write_signal(a.output, out)
    _echo_config(_sidecar(a.output, ".config.json"), a)
    if sig.duration_s >= 1.0:
        before, after = band_snr(sig, ECG_BANDS), band_snr(out, ECG_BANDS)
        print(f"band SNR {before.db:.2f} dB -> {after.db:.2f} dB")
    return EXIT_OK


def cmd_report(a) -> int:
    from .bench import report_case
    from .synth import DatasetManifest

    manifest = DatasetManifest.read(a.manifest)
    rep = report_case(manifest, a.entry, _filter_config(a), a.out, rebuild=a.rebuild)
    _echo_config(Path(a.out) / "config.json", a)
    print(json.dumps(rep.metrics.as_dict(), sort_keys=True))
    return EXIT_OK


def cmd_replay(a) -> int:
    data = json.loads(Path(a.config).read_text())
    data.pop("anc_dsp_version", None)
    data.pop("resolved", None)
    ns = argparse.Namespace(verbose=a.verbose, **data)
    if ns.command == "replay":
        raise ValueError("refusing to replay a replay")
    return COMMANDS[ns.command](ns)


COMMANDS = {
    "corpus": cmd_corpus,
    "synth": cmd_synth,
    "denoise": cmd_denoise,
    "stream": cmd_stream,
    "bench": cmd_bench,
    "ecg": cmd_ecg,
    "report": cmd_report,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    parser = build_parser()
    a = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(a.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[a.command](a)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (OSError, CoefficientFileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (AncError, ValueError, KeyError) as exc:
        # audio decoding problems are I/O, everything else here is configuration
        from .wavio import AudioFormatError

        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO if isinstance(exc, AudioFormatError) else EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
