"""Runtime window of the double-step schedule on Grover instances.

For each N the script prints the lower bound tau_lower below which no
schedule can succeed, the two ends of the upper-time interval, and the
success amplitude actually reached by the double step there. It then scans
tau to show the Rabi-like rise of the amplitude and where 1/5 is first hit.
"""
import numpy as np

from hblab import evolve, evolve_double_step, grover_instance, tau_lower_bound, tau_upper_time
from hblab.bounds import GAMMA, first_success_tau
from hblab.schedules import double_step_schedule, linear_schedule, smooth_bump_schedule


def main():
    print(f"{'N':>6} {'tau_lower':>10} {'tau+(1/3)':>10} {'tau+(2/3)':>10} {'amp(1/3)':>9} {'amp(2/3)':>9}")
    for N in (64, 256, 1024, 4096):
        inst = grover_instance(N, m=1)
        lo = tau_lower_bound(inst)
        t13, t23 = tau_upper_time(inst, 1 / 3), tau_upper_time(inst, 2 / 3)
        a13 = evolve_double_step(inst, t13).success_amplitude
        a23 = evolve_double_step(inst, t23).success_amplitude
        print(f"{N:>6} {lo:>10.4f} {t13:>10.4f} {t23:>10.4f} {a13:>9.4f} {a23:>9.4f}")

    inst = grover_instance(256, m=1)
    print("\nN=256: amplitude along tau for three schedules")
    print(f"{'tau':>8} {'double':>8} {'linear':>8} {'bump':>8}")
    scheds = [double_step_schedule(inst.E_F), linear_schedule(), smooth_bump_schedule()]
    for tau in np.geomspace(0.5, 200, 12):
        amps = [evolve(inst, s, tau, mode="double_step" if s.kind == "double_step" else "reduced").success_amplitude
                for s in scheds]
        print(f"{tau:>8.3f} " + " ".join(f"{a:>8.4f}" for a in amps))

    for s in scheds:
        mode = "double_step" if s.kind == "double_step" else "reduced"
        star = first_success_tau(inst, s, mode=mode)
        print(f"first tau with amplitude >= {GAMMA}: {s.kind:<12} {star:.4g}")


if __name__ == "__main__":
    main()
