"""CCDF of per-antenna output power for OFDM and SC-FDMA, unprecoded, ZF and l1,2 precoded.

Writes ccdf_<waveform>_<precoder>.csv (x = threshold in dB over average power).
"""
import sys

from _common import cli_args, parser

from sparseprec.cli import main

if __name__ == "__main__":
    args = parser(__doc__, "fig1").parse_args()
    quick = ("experiment.n_channel_draws=10",)
    sys.exit(main(cli_args("ccdf", "fig1_ccdf.toml", args, quick)))
