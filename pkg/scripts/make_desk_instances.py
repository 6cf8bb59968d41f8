#!/usr/bin/env python3
"""Regenerate the synthetic desk-scale TSPLIB files in data/desk/.

Small random EUC_2D instances complement the two classic matrices so the
desk suite has enough datasets for the paired hypothesis tests.  Seeded,
so re-running reproduces the committed files byte for byte.
"""

from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "data" / "desk"
SPECS = [  # (name, n nodes, coordinate span, seed)
    ("rd10a", 11, 120, 101),
    ("rd11a", 12, 150, 102),
    ("rd12a", 13, 140, 103),
    ("rd12b", 13, 200, 104),
    ("rd13a", 14, 160, 105),
    ("rd14a", 15, 180, 106),
]


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for name, dim, span, seed in SPECS:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed])))
        pts = rng.integers(0, span, size=(dim, 2))
        lines = [
            f"NAME: {name}",
            "TYPE: TSP",
            f"COMMENT: synthetic desk-scale instance (seed {seed})",
            f"DIMENSION: {dim}",
            "EDGE_WEIGHT_TYPE: EUC_2D",
            "NODE_COORD_SECTION",
        ]
        for i, (x, y) in enumerate(pts, start=1):
            lines.append(f"{i} {x} {y}")
        lines.append("EOF")
        (OUT / f"{name}.tsp").write_text("\n".join(lines) + "\n", encoding="utf-8")
        print(f"wrote {OUT / f'{name}.tsp'}")


if __name__ == "__main__":
    main()
