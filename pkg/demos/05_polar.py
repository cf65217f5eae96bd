"""Polar code vs repetition code on a q-ary symmetric channel.

Run: python demos/05_polar.py   (about 20 s)
"""
import numpy as np

from lpnagg import coding

rng = np.random.default_rng(0)
polar = coding.polar_construct(2, 1024, 0.05, 512, mc_trials=10_000, seed=0)
print(f"polar n={polar.n} k={polar.k} rate={polar.rate}")
for P in (0.02, 0.04, 0.05, 0.06):
    print(f"  P={P:.2f} FER={coding.fer_estimate(polar, P, 500, rng):.4f}")

print("\nrepetition, rho=11, k=64:")
for P in (0.02, 0.05, 0.1):
    r = coding.repetition_factor_for(P, 64, 1e-3)
    rep = coding.repetition_code(11, 64, r)
    bound = 64 * coding.repetition_block_failure_bound(r, P)
    print(f"  P={P:.2f} r={r} rate={rep.rate:.3f} bound={bound:.1e} FER={coding.fer_estimate(rep, P, 2000, rng):.4f}")
