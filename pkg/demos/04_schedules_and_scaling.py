"""Schedule shape versus runtime: C-infinity bump, linear and double step.

The bump's robustness profile (J, kappa) is printed first. Then the first
tau reaching amplitude 1/5 is located for increasing N. The double step
scales like sqrt(N); the bump, which never moves fast on J, grows close to
linearly. Finally the adiabatic error at N = 16 shows the bump's faster
decay in tau.
"""
from hblab import (adiabatic_error_scan, grover_instance, robustness_profile, smooth_bump_schedule,
                   threshold_scaling)
from hblab.schedules import double_step_schedule


def main():
    prof = robustness_profile(smooth_bump_schedule())
    print(f"smooth bump: a = {prof.a:.5f}, b = {prof.b:.5f}, kappa = {prof.kappa:.5f} ({prof.branch})")

    Ns = [64, 128, 256, 512, 1024]
    bump = threshold_scaling(Ns, smooth_bump_schedule())
    dstep = threshold_scaling(Ns, double_step_schedule(-1.0), metric="success_amplitude")
    print(f"\n{'N':>6} {'tau* bump':>10} {'tau* double':>12}")
    for N, a, b in zip(Ns, bump.tau_star, dstep.tau_star):
        print(f"{N:>6} {a:>10.3f} {b:>12.3f}")
    print(f"log-log slopes: bump {bump.slope:.3f}, double step {dstep.slope:.3f}")

    scan = adiabatic_error_scan(grover_instance(16, m=1), tau_grid=(1e2, 1e3, 1e4))
    print("\nN=16 dist(psi_tau(1), ground space):")
    for kind, errs in scan.errors.items():
        print(f"  {kind:<12} " + "  ".join(f"{e:.3e}" for e in errs))


if __name__ == "__main__":
    main()
