"""Minimum gap of H(s) and its Krein-formula localization.

The gap of a Grover instance along the linear path bottoms out at
sqrt(m/N) near s = 1/2. Krein's formula places the avoided crossing at
t = s / (1 - s) from the negative eigenvalues of A^{1/2} H_F A^{1/2}, and
brackets a pair of eigenvalues of H_I + t H_F within beta of E_I.
"""
import math

from hblab import certify_gap_bound, crossing_times, gap_profile, grover_instance, instance_from_dict


def main():
    print(f"{'N':>6} {'m':>3} {'min gap':>10} {'sqrt(m/N)':>10} {'s*':>8} {'t_1':>8} {'beta':>9} {'5 delta4':>9}")
    for N, m in [(256, 1), (1024, 1), (1024, 4), (4096, 1)]:
        inst = grover_instance(N, m=m)
        rep = certify_gap_bound(inst, 129)
        print(f"{N:>6} {m:>3} {rep.dense_min_gap:>10.6f} {math.sqrt(m / N):>10.6f} {rep.dense_min_location:>8.5f} "
              f"{rep.crossing_times[0]:>8.5f} {rep.beta:>9.6f} {5 * rep.delta4:>9.6f}")
    print("beta sits just above 5 delta4 here: with g_I = 1 the gap between them is O(delta4^3).")

    inst = grover_instance(1024, m=1)
    br = certify_gap_bound(inst, 65).bracketing[0]
    print(f"\nN=1024 crossing at t = {br.t:.6f} (s = {br.s:.6f})")
    print(f"  roots {br.left_root:.8f} < E_I = {inst.E_I} < {br.right_root:.8f}")
    print(f"  (right - left) / (1 + t) = {(br.right_root - br.left_root) / (1 + br.t):.6f}")
    print(f"  negative index: {br.index_left_window} at E_I - beta, {br.index_right_limit} just above E_I")

    mixed = instance_from_dict({"dim": 48, "kind": "general", "eigenpairs": [[-1.0], [0.5]],
                                "initial": "random", "seed": 7})
    times, m_plus = crossing_times(mixed)
    print(f"\nH_F spectrum {{-1, +0.5}}: m_plus = {m_plus}, crossing times {times}")
    prof = gap_profile(mixed, grid_points=129)
    print(f"  dynamical-subspace min gap {prof.min_gap:.5f} at s = {prof.min_location:.5f}")


if __name__ == "__main__":
    main()
