"""Where can the cup be, relative to the commanded target, and still be picked?

Sweeps the cup over a 25 mm grid with the target held fixed, prints the three
success sets as text maps, and writes grid.svg next to this script.
"""

from pathlib import Path

import numpy as np

from reflexgrasp.experiments import grid_summary, grid_svg, run_grid_sweep


def text_map(res, controller):
    rows = []
    for iy in range(len(res.ys) - 1, -1, -1):
        cells = "".join("#" if res.outcomes[controller][iy, ix] else "." for ix in range(len(res.xs)))
        rows.append(f"  {res.ys[iy] * 1000:6.1f} mm  {cells}")
    return "\n".join(rows)


def main():
    res = run_grid_sweep(pitch=0.025)
    print(grid_summary(res))
    for c in res.controllers:
        n = int(np.count_nonzero(res.outcomes[c]))
        print(f"{c} ({n} cells; x from {res.xs[0] * 1000:.0f} to {res.xs[-1] * 1000:.0f} mm, left to right)")
        print(text_map(res, c))
        print()
    out = Path(__file__).with_name("grid.svg")
    out.write_text(grid_svg(res), encoding="utf-8")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
