#!/usr/bin/env python3
"""Regenerate the shipped 256-entry colormap CSVs from the colorcet package.

    pip install colorcet==3.2.1
    python3 tools/gen_colormaps.py assets/colormaps

fire.csv    <- colorcet linear_kryw_0_100_c71 (CET-L03, "fire")
cet_l08.csv <- colorcet linear_bmy_10_95_c71  (CET-L08)
"""
import sys
from pathlib import Path

import colorcet as cc

TABLES = {
    "fire.csv": cc.linear_kryw_0_100_c71,
    "cet_l08.csv": cc.linear_bmy_10_95_c71,
}


def main(out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, table in TABLES.items():
        assert len(table) == 256, name
        with open(out_dir / name, "w") as f:
            for r, g, b in table:
                f.write(f"{r:.6f},{g:.6f},{b:.6f}\n")


if __name__ == "__main__":
    main(Path(sys.argv[1] if len(sys.argv) > 1 else "assets/colormaps"))
