"""A cup sitting exactly at the commanded target, grasped by each controller.

Prints the phase timeline of the reflex controller and the trial records of
all three controllers. Run from the repository root:

    python demos/nominal_cup_grasp.py
"""

from reflexgrasp.core import DiskObject, PlanarVec
from reflexgrasp.experiments import CONTROLLERS, CUP_RADIUS, NOMINAL_TARGET, run_trial
from reflexgrasp.sim import EventLog


def phase_timeline(log):
    out = []
    for row in log.rows:
        if not out or out[-1][1] != row[1]:
            out.append((row[0], row[1]))
    return out


def main():
    cup = DiskObject("cup", PlanarVec(*NOMINAL_TARGET), CUP_RADIUS, 0.2, "cup")
    log = EventLog()
    rec = run_trial("full", [cup], NOMINAL_TARGET, seed=0, event_log=log)
    print("reflex controller, cup at the target:")
    for t, phase in phase_timeline(log):
        print(f"  t = {t:6.3f} s  {phase}")
    print(f"  trigger: {rec.trigger}, pick {rec.pick_time:.2f} s, place {rec.place_time:.2f} s\n")
    for c in CONTROLLERS:
        r = run_trial(c, [cup], NOMINAL_TARGET, seed=0)
        print(f"{c:>8}: {r.outcome}")


if __name__ == "__main__":
    main()
