"""One fingertip approaching alongside a straight wall.

The inward proximity ray pulls the tip toward the wall when it is farther than
6 cm and pushes it away when closer, so the tip settles at the standoff.
"""

from reflexgrasp.experiments import run_contour_wall


def main():
    for d0 in (0.08, 0.045):
        r = run_contour_wall(initial_distance=d0, duration=1.5)
        print(f"start {d0 * 100:.1f} cm")
        for t, d in zip(r.times[::45], r.d_in[::45]):
            bar = "#" * int(round(d * 500))
            print(f"  t = {t:4.2f} s  d_in = {d * 100:5.2f} cm  {bar}")
        print()


if __name__ == "__main__":
    main()
