"""Estimating the marked fraction m/N from survival amplitudes.

The estimator averages Re c_F(k) with Poisson weights over k = 0..L. Its
spectral kernel is close to 1 at frequency 0 and exponentially small at
frequencies at least g_F away, so only the ground-space weight survives.
"""
import math

import numpy as np

from hblab import estimate_overlap, evolve_double_step, grover_instance, kernel_selectivity, make_plan


def main():
    plan = make_plan(1024, 1.0)
    print(f"N=1024, g_F=1: p = {plan.p:.4f}, L = {plan.L}, total runtime = {plan.total_runtime}")
    print("kernel |K(omega)|:")
    for omega in (0.0, 0.25, 0.5, 1.0, math.pi):
        print(f"  omega = {omega:6.3f}  {abs(kernel_selectivity(omega, plan)):.3e}")

    print(f"\n{'N':>6} {'m':>4} {'estimate':>14} {'m/N':>14} {'N^2 |err|':>10} {'runtime/ln^2 N':>15}")
    for N in (64, 256, 1024, 4096):
        for m in (1, 4, math.isqrt(N)):
            inst = grover_instance(N, m=m)
            res = estimate_overlap(inst, make_plan(N, inst.g_F))
            ratio = res.plan.total_runtime / math.log(N) ** 2
            print(f"{N:>6} {m:>4} {res.estimate_delta2_squared:>14.10f} {m / N:>14.10f} "
                  f"{res.abs_error * N ** 2:>10.3g} {ratio:>15.2f}")

    rng = np.random.default_rng(0)
    print("\nThe estimate feeds the double step: tau = (1 - E_F) / (2 |E_F| sqrt(estimate))")
    for N in (256, 1024):
        inst = grover_instance(N, m=int(rng.integers(1, 6)))
        est = estimate_overlap(inst, make_plan(N, inst.g_F)).estimate_delta2
        tau = 0.5 * (1 - inst.E_F) / (abs(inst.E_F) * est)
        amp = evolve_double_step(inst, tau).success_amplitude
        print(f"  N={N} m={inst.rank_final}: tau = {tau:.3f}, success amplitude = {amp:.4f}")


if __name__ == "__main__":
    main()
