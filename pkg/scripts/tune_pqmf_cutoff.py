"""Sweep the PQMF prototype cutoff and report reconstruction quality.

The committed default (``PqmfConfig.cutoff_ratio``) is the best value found
here, rounded to three decimals. Rerun after changing taps or beta.
"""

import argparse

import numpy as np

from singgan.pqmf import design_bank, reconstruction_snr


def passband_ripple_db(bank, n_fft=8192):
    """Peak-to-peak ripple of the summed analysis/synthesis power response."""
    h = np.fft.rfft(bank.analysis_filters, n_fft, axis=1)
    total = (np.abs(h) ** 2).sum(axis=0) / 4
    db = 10 * np.log10(total)
    return float(db.max() - db.min())


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lo", type=float, default=0.10)
    ap.add_argument("--hi", type=float, default=0.18)
    ap.add_argument("--step", type=float, default=0.001)
    ap.add_argument("--taps", type=int, default=62)
    ap.add_argument("--beta", type=float, default=9.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    x = np.random.default_rng(args.seed).standard_normal(24000)
    rows = []
    for c in np.arange(args.lo, args.hi + 1e-12, args.step):
        bank = design_bank(taps=args.taps, kaiser_beta=args.beta, cutoff_ratio=float(c))
        rows.append((float(c), reconstruction_snr(bank, x), passband_ripple_db(bank)))
    print("cutoff  snr_db  ripple_db")
    for c, snr, rip in rows:
        print(f"{c:.3f}  {snr:6.2f}  {rip:.4f}")
    best = max(rows, key=lambda r: r[1])
    print(f"best cutoff={best[0]:.3f} snr={best[1]:.2f} dB")


if __name__ == "__main__":
    main()
