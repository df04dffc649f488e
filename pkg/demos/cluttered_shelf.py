"""Clearing cluttered shelves from noisy synthetic depth scans.

Each episode places five objects on a shelf. The harness repeatedly scans the
closest visible object, trims the depth extremes, aims at the centroid of the
rest (biased toward the camera), and lets a controller try the pick. Both
controllers see the same scenes and scans.
"""

import argparse

from reflexgrasp.experiments import clutter_summary, run_clutter


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--episodes", type=int, default=20)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    res = run_clutter(n_episodes=args.episodes, seed=args.seed)
    print(clutter_summary(res))
    print(f"{'class':<8}{'full':>12}{'baseline':>12}")
    full, base = res.table("full"), res.table("baseline")
    for label in full:
        (sf, nf), (sb, nb) = full[label], base[label]
        print(f"{label:<8}{f'{sf}/{nf}':>12}{f'{sb}/{nb}':>12}")
    fails = [r for r in res.records if r.controller == "full" and r.outcome != "SUCCEEDED"]
    if fails:
        print("\nreflex failures:")
        for r in fails:
            print(f"  {r.object_class:<7} {r.outcome:<8} trigger={r.trigger:<9} branches={r.branches or '-'}")


if __name__ == "__main__":
    main()
