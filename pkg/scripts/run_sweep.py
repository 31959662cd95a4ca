#!/usr/bin/env python3
"""Sensitivity sweep over the retrieval depth k and the detection fraction rho
on the synthetic corpus, one parameter varied while the other stays fixed."""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from driftforge import synthetic


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rho", default="0.05,0.1,0.2,0.3")
    parser.add_argument("--k", default="1,2,3,4,5")
    args = parser.parse_args()

    base = synthetic.ExperimentConfig()
    for name, raw in (("rho", args.rho), ("k", args.k)):
        values = [float(v) for v in raw.split(",") if v]
        table = synthetic.run_sweep(name, values, base)
        print(table.render())
    return 0


if __name__ == "__main__":
    sys.exit(main())
