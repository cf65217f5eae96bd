"""Colluding server and users strip the aggregate noise off one ciphertext.

Keeping only coordinates where the summed honest error is zero leaves an
LPN instance for the first honest user whose noise rate is the solver-mode
rate.  On random ciphertexts the extracted values stay uniform.

Run: python demos/04_attack.py
"""
import numpy as np

from lpnagg import checks

rng = np.random.default_rng(3)
for z in (0, 2, 4):
    emp, pred, sigma, size = checks.attack_rate(rng, rho=2, p=0.05, N=6, z=z, min_retained=50_000)
    pval = checks.attack_drand(rng, z=z, min_retained=50_000)
    print(f"z={z}: |I|={size}  rate {emp:.5f} vs predicted {pred:.5f} ({(emp - pred) / sigma:+.2f} sigma)"
          f"  random-view uniformity p={pval:.3f}")

print("\nhybrid embedding, two-sample p-values (4 projections):")
for ell in (2, 3):
    for uniform in (False, True):
        pv = checks.hybrid_pvalues(rng, ell, uniform, samples=50_000)
        print(f"  ell={ell} {'uniform' if uniform else 'honest '}:", " ".join(f"{x:.3f}" for x in pv))
print("neighbouring hybrids differ: p =", checks.hybrid_distinct_pvalue(rng, 2, samples=50_000))
