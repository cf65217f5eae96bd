"""Sums of sparse q-ary noise, and the cover distribution that hides a hint.

Run: python demos/01_noise_sums.py
"""
import numpy as np

from lpnagg import params, prob
from lpnagg import secanalysis as sa

rho, p = 3, 0.1
print(f"Bern({p}) over F_{rho}:", np.round(prob.bern_pmf(rho, p).probs, 4))

# closed form vs brute-force convolution
acc = prob.bern_pmf(rho, p)
for users in range(2, 7):
    acc = prob.convolve(acc, prob.bern_pmf(rho, p))
    print(f"  {users} users: closed form {prob.pileup_n(rho, p, users):.10f}  convolution {acc.nonzero_mass():.10f}")
print("approaches the uniform cap", (rho - 1) / rho)

# the hint h = e + f, and what it says about e
tau = params.tau_reduction(rho, p)
print(f"\nnoise rate left after leaking e+f: tau = {tau:.6f}")
for h in range(rho):
    d = prob.cover_distribution(rho, p, tau, h)
    print(f"  D_{h} =", np.round(d.probs, 5))

gap = np.abs(sa.joint_cover_pmf(rho, p, tau) - sa.joint_noise_hint_pmf(rho, p)).max()
print(f"joint law of (e'+t, h) vs (e, e+f): max gap {gap:.2e}")

# any tau up to this bound admits a valid cover distribution
print(f"largest coverable tau at p={p}: {prob.cover_feasibility_bound(rho, p):.6f}")
