"""One multi-modulus aggregation session with a committee, and its traffic bill.

Run: python demos/02_session.py
"""
import numpy as np

from lpnagg import params, protocol

N, z, M, levels, k_C = 10, 1, 3, 15, 32
cfg = protocol.build_config(N, z, M, levels, k_C, moduli=[11, 13], p=0.005, k=48, rounds=3, master_seed=42)
for m in cfg.moduli:
    print(f"rho={m.rho}: k={m.kahe.k} n={m.kahe.n} code={m.kahe.code.family} R={m.kahe.code.rate:.3f} "
          f"committee={m.sharing.M}")

rng = np.random.default_rng(0)
inputs = [rng.integers(0, levels, size=k_C * cfg.rounds) for _ in range(N)]
res = protocol.run_session(cfg, inputs)
truth = sum(inputs)
print("\nexact:", res.ok and res.aggregate.tolist() == truth.tolist())
print("first entries:", res.aggregate[:8].tolist(), "expected", truth[:8].tolist())

s = res.stats
print("\nmessages:", dict(s.counts()))
print("bytes per round:", s.by_round())
print("decryptor path bytes (setup only):", s.decryptor_path_bytes())
print("user 0 uplink:", s.uplink(0), "bytes,", s.uplink(0, payload_only=True), "of them ring elements")

# cost formula (log2(rho) bits per element) vs one executed round.  Elements
# travel as whole bytes, so the two agree only when rho is close to 2^8.
for moduli in ([11, 13], [251]):
    one = protocol.build_config(N, z, M, levels, k_C, moduli, 0.005, 48, master_seed=42)
    r1 = protocol.run_session(one, [x[:k_C] for x in inputs])
    measured, formula = 8 * r1.stats.uplink(0, True), protocol.predicted_uplink_bits(one)
    print(f"moduli {moduli}: measured {measured} bits, formula {formula:.0f} bits, ratio {measured / formula:.3f}")
print(f"hand case cost: {params.modulus_cost(11, 1000, 0.5, 5, 2, 10_000):.1f} bits")
