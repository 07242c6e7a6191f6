"""BER of 16-QAM superposition precoding against ZF-with-Pi under 1-bit DACs.

Desk scale uses K=4, N=100; --full runs K=8, N=400 (hours on one core).
"""
import sys

from _common import cli_args, parser

from sparseprec.cli import main

if __name__ == "__main__":
    p = parser(__doc__, "fig5")
    p.add_argument("--full", action="store_true")
    args = p.parse_args()
    quick = ("experiment.n_channel_draws=10", "calibration.n_channel_draws=5", "ista.max_iters=500")
    cfg = "fig5_full.toml" if args.full else "fig5_desk.toml"
    sys.exit(main(cli_args("ber", cfg, args, quick)))
