"""Regenerate the bundled SYNTHETIC dispersion tables (not measured data).

sigma(f) = sigma_10 * (f / 10 Hz)^a  and  eps_rel(f) = eps_10 * (f / 10 Hz)^-b
on a 1-2-5 grid from 10 Hz to 50 kHz.
"""

from pathlib import Path

import numpy as np

LAWS = {
    #        sigma_10  a     eps_10  b
    "brain": (0.10, 0.05, 2.0e6, 0.70),
    "skull": (0.0045, 0.03, 3.0e4, 0.60),
    "scalp": (0.20, 0.04, 5.0e5, 0.65),
}

FREQS = np.array([10, 20, 50, 100, 200, 500, 1e3, 2e3, 5e3, 1e4, 2e4, 5e4])


def main():
    out = Path(__file__).resolve().parents[1] / "src" / "headrc" / "data"
    for name, (s10, a, e10, b) in LAWS.items():
        x = FREQS / 10.0
        sigma = s10 * x ** a
        eps = e10 * x ** -b
        lines = ["frequency_hz,sigma_s_per_m,eps_rel"]
        lines += [f"{f:.17g},{s:.6g},{e:.6g}" for f, s, e in zip(FREQS, sigma, eps)]
        (out / f"synthetic_{name}.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
