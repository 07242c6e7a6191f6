"""Alternative lambda recipe: lam = K sigma^2 / N at the SNR where the ridge (l2,2) and l1,2 BER curves cross.

Runs elastic-net with lam = 0 (pure ridge) and the l1,2 design on one config,
then interpolates the crossing.
"""
import argparse
from dataclasses import replace

from _common import CONFIGS

from sparseprec import config
from sparseprec.simulation import lam_from_crossing, run_ber

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--config", default=str(CONFIGS / "fig3_desk.toml"))
    p.add_argument("--draws", type=int, default=100)
    args = p.parse_args()
    exp = config.load(args.config).experiment
    exp = replace(exp, precoders=("elastic-net", "l12"), n_channel_draws=args.draws)
    res = run_ber(exp, lams={"elastic-net": 0.0})
    l2, l1 = res["elastic-net"].y, res["l12"].y
    for x, a, b in zip(exp.snr_db, l2, l1):
        print(f"{x:6.1f} dB  ridge {a:.3e}  l12 {b:.3e}")
    lam = lam_from_crossing(exp.snr_db, l2, l1, exp.n_users, exp.n_antennas)
    print("no crossing on this grid" if lam is None else f"lam at crossing = {lam:.4g}")
