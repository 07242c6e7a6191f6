"""Shared plumbing for the figure scripts."""
import argparse
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def parser(doc: str, default_out: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=doc.strip().splitlines()[0])
    p.add_argument("--out", default=str(ROOT / "results" / default_out))
    p.add_argument("--quick", action="store_true", help="few channel draws, for a smoke run")
    p.add_argument("--seed", type=int)
    return p


def cli_args(cmd: str, config: str, args, quick_sets=()) -> list:
    argv = [cmd, "--config", str(CONFIGS / config), "--out", args.out]
    if args.seed is not None:
        argv += ["--seed", str(args.seed)]
    if args.quick:
        for item in quick_sets:
            argv += ["--set", item]
    return argv
