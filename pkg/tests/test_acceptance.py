"""Acceptance criteria 1-13; each test carries its criterion number."""

import itertools
import math
import time

import numpy as np
import pytest

from lpnagg import checks, coding, committee, params, protocol, ring
from lpnagg.committee import SharingParams
from lpnagg.prob import pileup_n

crit = pytest.mark.criterion
SEED = 20240601


def two_of_three(flags):
    return sum(bool(f) for f in flags) >= 2


@crit(1)
def test_pileup_exact():
    t0 = time.perf_counter()
    err = checks.pileup_exact(rhos=(2, 3, 5, 7), tuples=50, max_m=5, seed=SEED)
    assert err <= 1e-12
    assert time.perf_counter() - t0 < 10


@crit(2)
def test_cover_joint_identity():
    t0 = time.perf_counter()
    gap = checks.cover_identity_gap(rhos=(2, 3, 5, 7), grid=checks.P_GRID)
    assert len(checks.P_GRID) == 23 and checks.P_GRID[0] == 0.01 and checks.P_GRID[-1] == 0.45
    assert gap <= 1e-12
    assert time.perf_counter() - t0 < 30


@crit(3)
def test_tau_coincidence_and_order():
    worst, ordered = checks.tau_order(trials=1000, seed=SEED)
    assert worst <= 1e-12
    assert ordered


@crit(4)
def test_reduction_exact():
    gap = checks.cover_identity_gap(rhos=(2, 3, 5, 7))
    assert gap <= 1e-12


@crit(4)
@pytest.mark.parametrize("rho,uniform", [(2, False), (3, False), (5, False), (7, False), (3, True)])
def test_reduction_sampled(rho, uniform):
    res = checks._two_of_three(
        f"accept_reduction_{rho}_{uniform}", SEED,
        lambda g: checks.reduction_pvalue(g, rho, coords=100_000, uniform=uniform),
    )
    print(res)
    assert res.passed


@crit(5)
@pytest.mark.parametrize("z", [0, 2, 4])
def test_attack_conditional_rate(z):
    runs = [checks.attack_rate(g, rho=2, p=0.05, N=6, z=z) for g in checks._seeds(SEED, f"accept_attack_{z}")]
    for emp, pred, sigma, size in runs:
        assert size >= 100_000
        print(f"z={z} emp={emp:.6f} pred={pred:.6f} sigma={sigma:.2e} |I|={size}")
    assert two_of_three(abs(e - p) <= 3 * s for e, p, s, _ in runs)


@crit(5)
@pytest.mark.parametrize("z", [0, 2, 4])
def test_attack_random_control(z):
    res = checks._two_of_three(f"accept_drand_{z}", SEED, lambda g: checks.attack_drand(g, z=z))
    print(res)
    assert res.passed


@crit(6)
@pytest.mark.parametrize("ell", [2, 3])
@pytest.mark.parametrize("uniform", [False, True])
def test_hybrid_embedding(ell, uniform):
    runs = [checks.hybrid_pvalues(g, ell, uniform, 100_000) for g in checks._seeds(SEED, f"accept_hyb_{ell}_{uniform}")]
    print([min(r) for r in runs])
    assert two_of_three(min(r) > 0.01 for r in runs)


def trusted_config(p, seed, k_C=64, k=64):
    return protocol.build_config(10, 0, 0, 2, k_C, [11], p, k, master_seed=seed, target_fer=1e-3)


@crit(7)
def test_kahe_end_to_end():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    cfg = trusted_config(0.005, 0)
    r = cfg.moduli[0].kahe.code.n // cfg.k_C
    P = pileup_n(11, 0.005, 10)
    assert r == coding.repetition_factor_for(P, cfg.k_C, 1e-3)
    assert cfg.k_C * coding.repetition_block_failure_bound(r, P) <= 1e-3
    ok = 0
    for i in range(100):
        cfg = trusted_config(0.005, i)
        inp = [rng.integers(0, 2, cfg.k_C) for _ in range(10)]
        res = protocol.run_session(cfg, inp)
        ok += res.ok and res.aggregate.tolist() == sum(inp).tolist()
    exact = 0
    for i in range(100):
        cfg = trusted_config(0.0, 1000 + i)
        inp = [rng.integers(0, 2, cfg.k_C) for _ in range(10)]
        res = protocol.run_session(cfg, inp)
        exact += res.ok and res.aggregate.tolist() == sum(inp).tolist()
    print(f"noisy {ok}/100 noiseless {exact}/100")
    assert ok >= 99
    assert exact == 100
    assert time.perf_counter() - t0 < 120


@crit(8)
def test_committee_reconstruction_random():
    rng = np.random.default_rng(SEED)
    primes = [7, 11, 13, 17, 31, 251]
    for _ in range(1000):
        M = int(rng.integers(3, 7))
        z = int(rng.integers(0, M - 1))
        N = int(rng.integers(1, 11))
        rho = int(rng.choice([r for r in primes if r - 1 >= M]))
        k = int(rng.integers(1, 20))
        sp = SharingParams(rho, M, z, k)
        keys = [sp.ring.uniform(k, rng) for _ in range(N)]
        per_user = [committee.share_key(s, sp, rng) for s in keys]
        agg = [committee.aggregate_shares([u[l] for u in per_user], sp) for l in range(M)]
        got = committee.reconstruct(agg, sp).s
        assert np.array_equal(got, sum(keys) % rho)


@crit(8)
def test_committee_privacy_exhaustive():
    sp = SharingParams(5, 3, 1, 2)
    secrets = [np.array([0, 0]), np.array([3, 1])]
    for idx in range(3):
        counts = []
        for s in secrets:
            c = np.zeros(5, dtype=int)
            for mask in range(5):
                sh = committee.share_key(s, sp, masks=[[mask]])
                c[int(sh[idx].value[0])] += 1
            counts.append(c)
        assert np.array_equal(counts[0], counts[1])


@crit(9)
@pytest.mark.parametrize("moduli", [(2, 3, 5, 7, 11), (7, 11, 13), (97, 101), (9973,)])
def test_crt_exhaustive(moduli):
    basis = ring.CrtBasis(moduli)
    assert basis.q <= 10**4
    xs = np.arange(basis.q)
    res = ring.crt_decompose(xs, basis)
    for r, m in zip(res, moduli):
        assert np.array_equal(r, xs % m)
    assert np.array_equal(ring.crt_recombine(res, basis).astype(np.int64), xs)


@crit(9)
def test_crt_homomorphism():
    basis = ring.CrtBasis((11, 13, 17, 19))
    rng = np.random.default_rng(SEED)
    a, b = rng.integers(0, basis.q, 10_000), rng.integers(0, basis.q, 10_000)
    ra, rb = ring.crt_decompose(a, basis), ring.crt_decompose(b, basis)
    summed = tuple((x + y) % m for x, y, m in zip(ra, rb, basis.moduli))
    assert np.array_equal(ring.crt_recombine(summed, basis).astype(np.int64), (a + b) % basis.q)


@crit(9)
def test_sessions_exact_integer_sum():
    rng = np.random.default_rng(SEED)
    bases = [(11, 13), (7, 11, 13), (251,), (13, 17), (5, 7, 11)]
    for i in range(100):
        moduli = bases[i % len(bases)]
        q = math.prod(moduli)
        N = int(rng.integers(1, 8))
        levels = int(rng.integers(2, (q - 1) // N + 2))
        assert q > N * (levels - 1)
        M = int(rng.integers(0, 4))
        z = int(rng.integers(0, M - 1)) if M >= 3 else 0
        M = M if M >= 3 else 0
        cfg = protocol.build_config(N, z, M, levels, 4, moduli, 0.0, 6, r=1, master_seed=i)
        inp = [rng.integers(0, levels, 4) for _ in range(N)]
        res = protocol.run_session(cfg, inp)
        assert res.ok and res.aggregate.tolist() == sum(inp).tolist()


@crit(10)
def test_cost_hand_case():
    m = params.ModulusPlan(11, 0.0, 0.1, 1000, 0.5, 20000, 5, 0.0, 0.0, 0.0)
    plan = params.ParamPlan((m,), 10, 2, 5, 2, 10_000, 128, 0.1, params.SecurityMode.REDUCTION)
    assert abs(params.comm_cost(plan, 2, 10_000) - 74954) <= 1


@crit(10)
def test_measured_uplink_matches_cost():
    cfg = protocol.build_config(3, 2, 5, 16, 10_000, [251], 0.0, 1000, r=2)
    rng = np.random.default_rng(SEED)
    res = protocol.run_session(cfg, [rng.integers(0, 16, 10_000) for _ in range(3)])
    assert res.ok
    m = cfg.moduli[0]
    plan = params.ParamPlan(
        (params.ModulusPlan(251, 0.0, 0.0, m.kahe.k, m.kahe.code.rate, m.kahe.n, m.sharing.M, 0.0, 0.0, 0.0),),
        3, 2, 5, 16, 10_000, 128, 0.1, params.SecurityMode.REDUCTION,
    )
    predicted = params.comm_cost(plan, 2, 10_000)
    for j in range(3):
        ratio = 8 * res.stats.uplink(j, payload_only=True) / predicted
        print(f"user {j} measured/formula = {ratio:.5f}")
        assert abs(ratio - 1) <= 0.05


@crit(11)
def test_dimension_anchor():
    t0 = time.perf_counter()
    for rho in (2, 3, 5, 7, 11, 13):
        k = params.min_dimension_for_rate(rho, 10, 0.5, lam=128, mode="reduction")
        p = params.max_noise_for_rate(rho, 10, 0.5)
        assert params.rate_bound(rho, 10, p) >= 0.5 - 1e-9
        assert k == params.lpn_dimension(params.tau_reduction(rho, p), 128)
        print(f"rho={rho} k_min={k}")
        assert k > 10**5
    assert time.perf_counter() - t0 < 1


@crit(12)
@pytest.mark.parametrize("M", [0, 4])
def test_decryptor_bytes_constant(M):
    totals = set()
    for rounds in (1, 5, 10):
        cfg = protocol.build_config(4, 1 if M else 0, M, 4, 8, [11, 13], 0.0, 8, r=1, rounds=rounds, master_seed=7)
        rng = np.random.default_rng(0)
        res = protocol.run_session(cfg, [rng.integers(0, 4, 8 * rounds) for _ in range(4)])
        assert res.ok
        totals.add((res.stats.decryptor_path_bytes(), res.stats.decryptor_messages()))
    assert len(totals) == 1


@crit(13)
def test_polar_fer():
    t0 = time.perf_counter()
    spec = coding.polar_construct(2, 1024, 0.05, 512, mc_trials=10_000, seed=0)
    assert spec.rate == 0.5
    fer = coding.fer_estimate(spec, 0.05, 1000, np.random.default_rng(SEED))
    print(f"polar FER {fer}")
    assert fer < 1e-2
    msgs = np.random.default_rng(1).integers(0, 2, size=(200, 512))
    assert np.array_equal(coding.decode(spec, coding.encode(spec, msgs)), msgs)
    assert time.perf_counter() - t0 < 180
