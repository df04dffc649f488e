"""The cup is 50 mm beyond where the hand was told to grasp.

The first close lands in front of the cup. The reflex controller fits a circle
to the two fingertip contacts, sees the object ahead of the tips, and picks
the pinch-and-pull re-grasp. The partial controller (no re-grasping) gives up.
"""

from reflexgrasp.core import DiskObject, PlanarVec
from reflexgrasp.experiments import CUP_RADIUS, NOMINAL_TARGET, run_trial
from reflexgrasp.sim import EventLog


def main():
    cup = DiskObject("cup", PlanarVec(NOMINAL_TARGET[0] + 0.05, 0.0), CUP_RADIUS, 0.2, "cup")
    for c in ("partial", "full"):
        log = EventLog()
        rec = run_trial(c, [cup], NOMINAL_TARGET, seed=0, event_log=log)
        print(f"{c}: {rec.outcome} after {rec.regrasp_count} re-grasp(s) {rec.branches or ''}")
        last = None
        for t, phase, prox, contacts, *_ in log.rows:
            if phase != last:
                fn = "" if contacts is None else f"  f_n = {contacts[0].f_normal:.2f} / {contacts[1].f_normal:.2f} N"
                palm = "" if prox is None else f"  d_palm = {prox[3]:.3f} m"
                print(f"  t = {t:6.3f} s  {phase:<20}{palm}{fn}")
                last = phase
        print()


if __name__ == "__main__":
    main()
