"""Worst-case SC-FDMA peak power against OFDM over block sizes, plus the PSD comparison.

Prints the exact peak, the brute-force peak, the logarithmic approximation and
exact/ln^2(M); then checks that OFDM and SC-FDMA have the same average spectrum.
"""
import argparse

import numpy as np

from sparseprec.cli import papr_table
from sparseprec.simulation import qpsk_symbols
from sparseprec.waveforms import OFDM, SC_FDMA, BlockModSpec, modulate


def psd(M, n_blocks, seed):
    d = qpsk_symbols(np.random.default_rng(seed), (n_blocks, M))
    return {s: np.mean(np.abs(np.fft.fft(modulate(d, BlockModSpec(M, s)), axis=-1)) ** 2, axis=0)
            for s in (OFDM, SC_FDMA)}


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("M", type=int, nargs="*", default=[8, 16, 32, 64, 128, 256, 512, 1024, 2048])
    p.add_argument("--psd-M", type=int, default=32)
    p.add_argument("--blocks", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    print(f"{'M':>6} {'exact':>10} {'brute':>10} {'approx':>10} {'exact/ln2M':>11} {'ofdm':>6}")
    for r in papr_table(args.M):
        c = r["sc_exact"] / np.log(r["M"]) ** 2
        print(f"{r['M']:>6} {r['sc_exact']:>10.4f} {r['sc_bruteforce']:>10.4f} {r['sc_bound']:>10.4f} "
              f"{c:>11.4f} {r['ofdm_worst']:>6.0f}")

    spec = psd(args.psd_M, args.blocks, args.seed)
    a, b = spec[OFDM], spec[SC_FDMA]
    on = a > 1e-9 * a.max()
    print(f"PSD M={args.psd_M}, {args.blocks} blocks: max per-bin |SC/OFDM - 1| = "
          f"{np.max(np.abs(b[on] / a[on] - 1)):.3%} over {on.sum()} occupied bins")
