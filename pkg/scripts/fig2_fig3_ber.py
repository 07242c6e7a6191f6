"""BER against SNR for ZF, l1,2 and elastic-net precoding, constant-envelope and 1-bit front-ends.

The elastic-net weight is calibrated on a separate set of channel draws
before the main run (see the [calibration] section of each config).
"""
import sys
from pathlib import Path

from _common import cli_args, parser

from sparseprec.cli import main

RUNS = {"constant-envelope": "fig2_desk.toml", "one-bit": "fig3_desk.toml"}

if __name__ == "__main__":
    p = parser(__doc__, "fig2_fig3")
    p.add_argument("--only", choices=sorted(RUNS))
    args = p.parse_args()
    quick = ("experiment.n_channel_draws=20", "calibration.n_channel_draws=10", "ista.max_iters=500")
    base = args.out
    for name, cfg in RUNS.items():
        if args.only and name != args.only:
            continue
        args.out = str(Path(base) / name)
        code = main(cli_args("ber", cfg, args, quick))
        if code:
            sys.exit(code)
