import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from anc_dsp.corpus import CorpusConfig, write_corpus  # noqa: E402
from anc_dsp.synth import DatasetConfig, generate_dataset  # noqa: E402

SMALL_CORPUS = CorpusConfig(n_normal=2, n_abnormal=2, n_noise=6, clean_duration_s=(3.0, 5.0),
                            noise_duration_s=(2.0, 4.0), burst_fraction=0.34)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    write_corpus(root, seed=3, config=SMALL_CORPUS)
    return root


@pytest.fixture(scope="session")
def small_dataset(small_corpus, tmp_path_factory):
    """12 entries with float64 audio on disk; returns the manifest path."""
    out = tmp_path_factory.mktemp("dataset")
    generate_dataset(small_corpus / "clean", small_corpus / "noise", out, seed=42,
                     config=DatasetConfig(audio_format="float64"))
    return out / "manifest.csv"


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


@pytest.fixture
def verdict():
    """Record and print one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(number: int, title: str, ok: bool, detail: str):
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
