"""Freeze expected band-SNR values for the tone-plus-noise pipeline check.

Runs the whole PCG path without the package's signal code: scipy's
``sosfilt`` with the shipped coefficient files for decimation and the
band-pass, the loop canceller and the hand-written periodogram from
``tests/oracles.py``. Writes ``tests/data/band_snr_oracle.json``.
"""

import json
import sys
from pathlib import Path

import numpy as np
import scipy.signal as ss

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "tests"))
import oracles  # noqa: E402

DATA = ROOT / "src" / "anc_dsp" / "data"
PCG = dict(lfn=(0.0, 20.0), lf=(20.0, 200.0), hf=(200.0, None))


def load_sos(name):
    rows = [line.split() for line in (DATA / f"{name}.sos").read_text().splitlines()[1:]
            if line.strip() and not line.startswith("#")]
    return np.array([[float(b0), float(b1), float(b2), 1.0, float(a1), float(a2)]
                     for b0, b1, b2, a1, a2 in rows])


def main():
    primary, reference, fs = oracles.leaked_noise_tone_case()
    aa = load_sos("decim4_8000hz")
    p2 = ss.sosfilt(aa, primary)[::4]
    r2 = ss.sosfilt(aa, reference)[::4]
    e, _, _, _ = oracles.anc_reference("ba-nlms", p2, r2)
    out = ss.sosfilt(load_sos("pcg_bandpass_20_200hz"), np.asarray(e))
    before = oracles.periodogram_band_snr(p2, 2000.0, **PCG)
    after = oracles.periodogram_band_snr(out, 2000.0, **PCG)
    result = {"input_band_snr_db": before, "output_band_snr_db": after,
              "improvement_db": after - before}
    (ROOT / "tests" / "data" / "band_snr_oracle.json").write_text(json.dumps(result, indent=2) + "\n")
    print(result)


if __name__ == "__main__":
    main()
