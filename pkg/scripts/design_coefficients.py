"""Regenerate the shipped SOS coefficient files and their oracle impulse responses.

Run once after changing a design; commit the outputs. The package itself
never designs filters.

    python scripts/design_coefficients.py [outdir]
"""

import json
import sys
from pathlib import Path

import numpy as np
import scipy.signal as ss

from anc_dsp.sosfilt import SosCascade, save_cascade

IMPULSE_LENGTH = 4096

# name: (order N passed to ellip, passband ripple dB, stopband atten dB, edges Hz, btype, fs)
DESIGNS = {
    # 65 dB: an even-order elliptic high-pass passes DC at the stopband floor
    "ecg_highpass_0p5hz": (4, 0.1, 65, 0.5, "highpass", 500),
    "ecg_lowpass_150hz": (4, 0.1, 60, 150, "lowpass", 500),
    "ecg_bandstop_50hz": (2, 0.1, 40, [49.5, 50.5], "bandstop", 500),
    "ecg_bandstop_60hz": (2, 0.1, 40, [59.5, 60.5], "bandstop", 500),
    "pcg_bandpass_20_200hz": (4, 1, 50, [20, 200], "bandpass", 2000),
    # anti-alias: cutoff 0.8 x output Nyquist (800 Hz for a 2 kHz output)
    "decim2_4000hz": (8, 1, 60, 800, "lowpass", 4000),
    "decim4_8000hz": (8, 1, 60, 800, "lowpass", 8000),
}


def main(outdir):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    meta = {}
    for name, (order, rp, rs, edges, btype, fs) in DESIGNS.items():
        sos = ss.ellip(order, rp, rs, edges, btype=btype, fs=fs, output="sos")
        cascade = SosCascade.from_scipy_sos(sos, fs, name)
        save_cascade(cascade, outdir / f"{name}.sos")
        impulse = np.zeros(IMPULSE_LENGTH)
        impulse[0] = 1.0
        h = ss.sosfilt(cascade.as_scipy_sos(), impulse)
        np.savetxt(outdir / f"{name}.impulse", h, fmt="%.17g")
        meta[name] = dict(family="elliptic", order=order, passband_ripple_db=rp,
                          stopband_atten_db=rs, edges_hz=edges, btype=btype,
                          sample_rate_hz=fs, sections=len(cascade),
                          design_tool=f"scipy.signal.ellip (scipy {__import__('scipy').__version__})")
    (outdir / "designs.json").write_text(json.dumps(meta, indent=2) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src/anc_dsp/data")
