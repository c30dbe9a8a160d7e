"""Run the full pipeline on every config in scripts/configs and print a one-line summary per run."""

from __future__ import annotations

import argparse
from pathlib import Path

from ionize3d.cli import SUBCOMMANDS, run_pipeline
from ionize3d.config import load_config, with_output

HERE = Path(__file__).resolve().parent


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs", help="parent directory for run outputs")
    parser.add_argument("names", nargs="*", help="config names (default: all)")
    args = parser.parse_args()
    paths = sorted((HERE / "configs").glob("*.json"))
    if args.names:
        paths = [p for p in paths if p.stem in args.names]
    for path in paths:
        cfg = with_output(load_config(path), str(Path(args.out) / path.stem))
        rep = run_pipeline(cfg, SUBCOMMANDS["full"])
        fits = rep.stages.get("decayfit", {})
        exps = " ".join(f"{k}={v['exponent']:.4f}" for k, v in fits.items() if isinstance(v, dict))
        flags = " ".join(f"{k}={'PASS' if v else 'FAIL'}" for k, v in rep.flags.items())
        verdict = rep.stages.get("genericity", {}).get("verdict", "-")
        print(f"{path.stem:14s} {verdict:12s} {exps:34s} {flags}")
        for stage, msg in rep.errors.items():
            print(f"{'':14s} stage {stage} failed: {msg}")


if __name__ == "__main__":
    main()
