"""Parameter search: cheapest modulus set and noise rates per modulus.

Run: python demos/03_optimizer.py
"""
from lpnagg import params

setting = dict(N=10, z=5, M=8, levels=2**16, k_C=10_000)
for mode in ("reduction", "solver"):
    plan = params.optimize(**setting, mode=mode, prime_limit=2**12, per_decade=20)
    print(f"\n{mode}: q = {'*'.join(str(m.rho) for m in plan.moduli)} = {plan.q}")
    print(f"  {plan.cost_bits / 8 / 1024:.1f} KiB per user, {plan.security_bits:.1f} bits")
    for m in plan.moduli:
        print(f"  rho={m.rho:5d} p={m.p:.2e} tau={m.tau:.2e} k={m.k:9d} R={m.R:.3f} M_t={m.M}")
    assert not plan.violations()

# the rate requirement forces huge dimensions in the reduction setting
print()
for rho in (2, 3, 5, 7, 11, 13):
    print(f"rho={rho:2d}: R >= 0.5 needs k >= {params.min_dimension_for_rate(rho, 10, 0.5):,}")

# solver vs reduction noise rates as collusion grows
print("\nz   tau_solver   (reduction", f"{params.tau_reduction(251, 0.01):.3e})")
for zz in range(0, 9, 2):
    print(f"{zz}   {params.tau_solver(251, 0.01, 10, zz):.3e}")
