#!/usr/bin/env python3
"""Run the three figure sweeps at publication quality and write CSVs.

Each preset sweeps cn2 over 10 log-spaced points in [1e-16, 5e-13] m^(-2/3)
for four source-coherence ratios {1, 0.5, 0.25, 0.125}.  At the preset
defaults (n = 512, n_atm = 200, n_src = 16) this is an overnight job on a
single core; pass --n, --n-atm, or --workers to trade noise for time.

Writes <outdir>/<preset>_sweep.csv in the versioned CSV schema; point
failures land in the status column instead of aborting the sweep.
"""

import argparse
import sys
import time
from pathlib import Path

from beamwander.cli import main as cli_main

PRESETS = ("fig1", "fig3", "fig5")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="sweeps", help="output directory (default: sweeps/)")
    ap.add_argument("--presets", nargs="+", default=list(PRESETS), choices=PRESETS)
    ap.add_argument("--n", help="grid points per side (default: preset value, 512)")
    ap.add_argument("--n-atm", dest="n_atm", help="atmospheres per point (default: 200)")
    ap.add_argument("--n-src", dest="n_src", help="source realizations per atmosphere (default: 16)")
    ap.add_argument("--seed", help="master seed (default: preset value)")
    ap.add_argument("--workers", help="parallel workers or 'auto'")
    args = ap.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    overrides = []
    for flag in ("n", "n_atm", "n_src", "seed", "workers"):
        value = getattr(args, flag)
        if value is not None:
            overrides += ["--" + flag.replace("_", "-"), str(value)]

    for preset in args.presets:
        out = outdir / f"{preset}_sweep.csv"
        print(f"[{preset}] sweeping -> {out}", flush=True)
        t0 = time.perf_counter()
        code = cli_main(["sweep", "--preset", preset, "--out", str(out)] + overrides)
        dt = time.perf_counter() - t0
        if code != 0:
            print(f"[{preset}] exit code {code} after {dt:.0f} s", file=sys.stderr)
            return code
        print(f"[{preset}] done in {dt:.0f} s", flush=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
