"""Run the command-line pipeline on the bundled latent-space configurations.

``desk54`` reduces a 54-generator ring (108 states) to roughly 29 latent
coordinates and fits a cubic polynomial model there. ``large510`` reduces a
510-generator sparse network to 28 coordinates with a linear model and
compares wall-clock time of the reduced and full simulations.

    python3 demos/latent_pipeline.py [desk54|large510|three_gen_full_state] [--out DIR]
"""

import argparse
import json
import time
from pathlib import Path

from lsindy import cli

CONFIGS = Path(__file__).resolve().parent / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("config", nargs="?", default="desk54",
                    choices=sorted(p.stem for p in CONFIGS.glob("*.json")))
    ap.add_argument("--out", default=None, help="output directory (default: demo_out/<config>)")
    args = ap.parse_args()

    out = Path(args.out or Path("demo_out") / args.config)
    t0 = time.perf_counter()
    code = cli.main(["pipeline", "--config", str(CONFIGS / f"{args.config}.json"),
                     "--out", str(out), "--quiet"])
    if code:
        raise SystemExit(code)
    elapsed = time.perf_counter() - t0

    report = json.loads((out / cli.REPORT_FILE).read_text())
    timing = json.loads((out / cli.TIMING_FILE).read_text())
    print(f"\n{args.config}: r={report['r']} poly_order={report['poly_order']} lambda={report['lambda']}")
    print(f"  relative error  delta {report['err_delta']:.3e}   omega {report['err_omega']:.3e}")
    print(f"  full model {timing['fom_time_s']:.3f}s   reduced model {timing['rom_time_s']:.3f}s")
    print(f"  whole pipeline {elapsed:.1f}s, outputs in {out}")


if __name__ == "__main__":
    main()
