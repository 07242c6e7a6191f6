"""Command line: ``sparseprec design | ber | ccdf | papr``.

Data files are written atomically. Every run also writes ``manifest.json``
with the resolved configuration, the library version, the seed, the wall-clock
duration and the list of files produced.

Exit codes: 0 success, 2 configuration or argument error, 3 dimension error,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfgmod
from .config import ConfigError, RunConfig
from .io import atomic_write_text, dump_json, load_complex_matrix, save_complex_matrix
from .numerics import DimensionError, RankDeficientError
from .precoders import DesignError, design_elastic_net, design_l12, design_superposition, design_zf
from .simulation import calibrate_lambda, draw_channel, run_ber, run_ccdf, stream
from .waveforms import (
    SC_FDMA,
    BlockModSpec,
    coherent_peak_block,
    modulate,
    ofdm_worst_case_papr,
    sc_peak_power_bound,
    sc_peak_power_exact,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIMENSION = 3
EXIT_NUMERIC = 4
OUT_ENV = "SPARSEPREC_OUT"

log = logging.getLogger("sparseprec")


@dataclass
class RunManifest:
    command: str
    config: dict
    config_toml: str
    seed: int
    overrides: list
    version: str = __version__
    duration_s: float = 0.0
    outputs: list = field(default_factory=list)
    notes: dict = field(default_factory=dict)

    def write(self, out_dir: Path) -> Path:
        return atomic_write_text(out_dir / "manifest.json", dump_json(asdict(self)))


def _overrides(args) -> list:
    items = list(args.set or [])
    if args.seed is not None:
        items.append(f"experiment.seed={args.seed}")
    if getattr(args, "snr", None):
        items.append("experiment.snr_db=[" + ", ".join(repr(float(v)) for v in args.snr) + "]")
    if getattr(args, "trials", None) is not None:
        items.append(f"experiment.n_channel_draws={args.trials}")
    return items


def _load(args) -> tuple:
    cfg = cfgmod.load(args.config) if args.config else RunConfig()
    items = _overrides(args)
    return cfgmod.apply_overrides(cfg, items), items


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get(OUT_ENV) or "results")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _series_files(out: Path, prefix: str, series: dict, cfg: RunConfig) -> list:
    written = []
    for name, s in series.items():
        path = out / f"{prefix}_{name}.csv"
        atomic_write_text(path, s.to_csv())
        written.append(path.name)
    path = out / f"{prefix}.json"
    doc = {"config": asdict(cfg), "series": {k: v.to_dict() for k, v in series.items()}}
    atomic_write_text(path, dump_json(doc))
    return written + [path.name]


def _print_series(series: dict) -> None:
    for name, s in series.items():
        print(f"# {s.kind} {name}" + (f" (lam={s.meta['lam']:g})" if "lam" in s.meta else ""))
        for x, y, n, d, f in zip(s.x, s.y, s.numerator, s.denominator, s.failures):
            extra = f"  failures={f}" if f else ""
            print(f"{x:8.2f}  {y:.4e}  {n}/{d}{extra}")


# --- subcommands ------------------------------------------------------------------


def _channel_for(cfg: RunConfig, config_path) -> np.ndarray:
    ch = cfg.design.channel_file
    if ch:
        path = Path(ch)
        if not path.is_absolute() and config_path:
            path = Path(config_path).parent / path
        try:
            return load_complex_matrix(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"design.channel_file: cannot read {path}: {exc}") from None
    e = cfg.experiment
    return draw_channel(e.n_users, e.n_antennas, stream(e.seed, 0, 0))


def cmd_design(args) -> int:
    cfg, items = _load(args)
    out = _out_dir(args)
    t0 = time.perf_counter()
    H = _channel_for(cfg, args.config)
    method, ista = cfg.design.method, cfg.experiment.ista
    if method == "zf":
        rep = design_zf(H)
    elif method == "l12":
        rep = design_l12(H, ista.abs_variant)
    elif method == "elastic-net":
        rep = design_elastic_net(H, ista)
    else:
        rep = design_superposition(H, ista)
    files = [save_complex_matrix(out / "precoder.csv", rep.precoder).name]
    summary = rep.summary()
    summary["channel_shape"] = list(H.shape)
    files.append(atomic_write_text(out / "design_report.json", dump_json(summary)).name)
    notes = {"constraint_residual": summary.get("constraint_residual")}
    print(f"method={method} K={H.shape[0]} N={H.shape[1]}")
    print(f"constraint residual ||HP - T||_F = {summary['constraint_residual']:.3e}")
    print(f"sparsity fraction = {summary['sparsity_fraction']:.4f}")
    if rep.iterations_used:
        print(f"iterations = {rep.iterations_used} converged = {rep.converged}")
    if "ridge_oracle_match" in summary:
        state = "matches" if summary["ridge_oracle_match"] else "does NOT match"
        print(f"lam = 0: precoder {state} the ridge closed form (max abs diff {summary['ridge_oracle_max_abs_diff']:.3e})")
        notes["ridge_oracle_match"] = summary["ridge_oracle_match"]
    man = RunManifest("design", asdict(cfg), cfgmod.dumps(cfg), cfg.experiment.seed, items, outputs=files, notes=notes)
    man.duration_s = time.perf_counter() - t0
    man.write(out)
    return EXIT_OK


def _calibrated(cfg: RunConfig) -> dict:
    exp = cfg.experiment
    lams = {}
    if not exp.calibration.enabled:
        return lams
    for name in exp.precoders:
        if name in ("elastic-net", "superposition"):
            best, table = calibrate_lambda(exp, name)
            lams[name] = best
            log.info("calibrated %s: lam=%g from %s", name, best, table)
    return lams


def cmd_ber(args) -> int:
    cfg, items = _load(args)
    out = _out_dir(args)
    t0 = time.perf_counter()
    lams = _calibrated(cfg)
    series = run_ber(cfg.experiment, lams)
    _print_series(series)
    files = _series_files(out, "ber", series, cfg)
    man = RunManifest("ber", asdict(cfg), cfgmod.dumps(cfg), cfg.experiment.seed, items, outputs=files)
    man.notes = {"lam": {k: float(v) for k, v in lams.items()}, "failures": {k: int(s.failures.sum()) for k, s in series.items()}}
    man.duration_s = time.perf_counter() - t0
    man.write(out)
    return EXIT_OK


def cmd_ccdf(args) -> int:
    cfg, items = _load(args)
    out = _out_dir(args)
    t0 = time.perf_counter()
    exp = cfg.experiment
    lams = {}
    if exp.calibration.enabled and "elastic-net" in exp.precoders:
        lams = _calibrated(replace(cfg, experiment=replace(exp, precoders=("elastic-net",))))
    series = {}
    for wf in exp.ccdf.waveforms or (exp.waveform,):
        for name, s in run_ccdf(replace(exp, waveform=wf), lams).items():
            series[f"{wf}_{name}"] = s
    if args.verbose:
        _print_series(series)
    files = _series_files(out, "ccdf", series, cfg)
    for k, s in series.items():
        print(f"{k}: P(power > {s.x[-1]:.1f} dB) = {s.y[-1]:.3e}")
    man = RunManifest("ccdf", asdict(cfg), cfgmod.dumps(cfg), exp.seed, items, outputs=files)
    man.duration_s = time.perf_counter() - t0
    man.write(out)
    return EXIT_OK


def papr_table(Ms) -> list:
    rows = []
    for M in Ms:
        peak = float(np.max(np.abs(modulate(coherent_peak_block(M), BlockModSpec(M, SC_FDMA))) ** 2))
        rows.append(
            {
                "M": M,
                "sc_exact": sc_peak_power_exact(M),
                "sc_bruteforce": peak,
                "sc_bound": sc_peak_power_bound(M),
                "ofdm_worst": ofdm_worst_case_papr(M),
            }
        )
    return rows


def cmd_papr(args) -> int:
    rows = papr_table(args.M)
    cols = ["M", "sc_exact", "sc_bruteforce", "sc_bound", "ofdm_worst"]
    print("".join(f"{c:>16}" for c in cols))
    for r in rows:
        print(f"{r['M']:>16d}" + "".join(f"{r[c]:>16.6f}" for c in cols[1:]))
    if args.out or os.environ.get(OUT_ENV):
        out = _out_dir(args)
        text = ",".join(cols) + "\n" + "".join(
            ",".join(str(r["M"]) if c == "M" else repr(float(r[c])) for c in cols) + "\n" for r in rows
        )
        atomic_write_text(out / "papr.csv", text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparseprec", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sim=False):
        sp.add_argument("--config", help="TOML config file")
        sp.add_argument("--seed", type=int, help="overrides experiment.seed")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
        sp.add_argument("--set", action="append", metavar="SECTION.FIELD=VALUE", help="field override, repeatable")
        if sim:
            sp.add_argument("--snr", type=float, nargs="+", help="overrides experiment.snr_db")
            sp.add_argument("--trials", type=int, help="overrides experiment.n_channel_draws")

    common(sub.add_parser("design", help="design one precoder and report on it"))
    common(sub.add_parser("ber", help="Monte-Carlo BER curves"), sim=True)
    common(sub.add_parser("ccdf", help="CCDF of per-antenna output power"), sim=True)
    sp = sub.add_parser("papr", help="single-carrier peak power against OFDM")
    sp.add_argument("M", type=int, nargs="*", default=[8, 32, 128, 512, 2048])
    sp.add_argument("--out", help="write papr.csv here")
    return p


COMMANDS = {"design": cmd_design, "ber": cmd_ber, "ccdf": cmd_ccdf, "papr": cmd_papr}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DimensionError as exc:
        print(f"error: dimension: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DesignError, RankDeficientError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # invalid argument values such as a bad block size
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
