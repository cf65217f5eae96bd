"""Packaged check suites behind ``lpnagg attack-check`` and ``lpnagg selftest``.

Statistical checks draw three independent seeds and pass when at least two
of them pass at the 0.01 significance level (or inside a 3-sigma band).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import coding, committee, params, prob, protocol, ring
from . import secanalysis as sa

ALPHA = 0.01


@dataclass
class CheckResult:
    name: str
    statistic: str
    threshold: str
    passed: bool


def _seeds(seed: int, name: str) -> list[np.random.Generator]:
    tag = int.from_bytes(name.encode()[:8].ljust(8, b"\0"), "little")
    return [np.random.default_rng([seed, tag, i]) for i in range(3)]


def _two_of_three(name: str, seed: int, run: Callable[[np.random.Generator], float], lo=ALPHA):
    pvals = [run(rng) for rng in _seeds(seed, name)]
    ok = sum(p > lo for p in pvals) >= 2
    return CheckResult(name, "p=" + ",".join(f"{p:.3g}" for p in pvals), f"2/3 > {lo}", ok)


# --- distribution-level checks ---------------------------------------------


def pileup_exact(rhos=(2, 3, 5, 7), tuples=50, max_m=5, seed=0) -> float:
    """Max deviation of the closed form from exhaustive PMF convolution."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for rho in rhos:
        for _ in range(tuples):
            m = int(rng.integers(1, max_m + 1))
            rates = rng.uniform(0, prob.max_rate(rho), size=m)
            acc = prob.bern_pmf(rho, rates[0])
            for r in rates[1:]:
                acc = prob.convolve(acc, prob.bern_pmf(rho, r))
            worst = max(worst, abs(acc.nonzero_mass() - prob.pileup(rho, rates)))
    return worst


P_GRID = tuple(np.round(np.arange(0.01, 0.451, 0.02), 2))


def cover_identity_gap(rhos=(2, 3, 5, 7), grid=P_GRID) -> float:
    """Max per-cell gap between the joint laws of (e'+t, h) and (e, e+f)."""
    worst = 0.0
    for rho in rhos:
        for p in grid:
            tau = params.tau_reduction(rho, float(p))
            gap = np.abs(sa.joint_cover_pmf(rho, float(p), tau) - sa.joint_noise_hint_pmf(rho, float(p)))
            worst = max(worst, float(gap.max()))
    return worst


def tau_order(trials=1000, seed=0) -> tuple[float, bool]:
    """(max |tau_solver(z=N-2) - tau_reduction|, strict ordering for z < N-2)."""
    rng = np.random.default_rng(seed)
    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 31, 101, 251]
    worst, ordered = 0.0, True
    for _ in range(trials):
        rho = int(rng.choice(primes))
        p = float(rng.uniform(1e-4, 0.999 * prob.max_rate(rho)))
        N = int(rng.integers(3, 40))
        z = int(rng.integers(0, N - 2))
        base = params.tau_reduction(rho, p)
        worst = max(worst, abs(params.tau_solver(rho, p, N, N - 2) - base))
        ordered &= params.tau_solver(rho, p, N, z) > base
    return worst, ordered


def reduction_pvalue(rng, rho=3, p=0.1, coords=100_000, uniform=False) -> float:
    """Chi-square p-value of the transformed Hint-LPN samples.

    Honest input: joint of (noise, hint) per coordinate against the exact
    Hint-LPN law.  Uniform input: the output ``b`` against uniform.
    """
    tau = params.tau_reduction(rho, p)
    inst = sa.sample_lpn(rho, 4, coords, tau, rng, uniform=uniform)
    out = sa.lpn_to_hintlpn(inst, tau, p, rng)
    if uniform:
        return sa.chi_square_uniform(out.b, rho)
    noise = (out.b - ring.mat_vec(out.s, out.A, ring.RingParams(rho))) % rho
    codes = noise * rho + out.h
    return sa.chi_square_gof(codes, sa.joint_noise_hint_pmf(rho, p).ravel())


def attack_view(rng, rho, p, N, z, min_retained=100_000, k=8):
    """Honest users' ciphertexts as the attacker sees them, with n sized for |I|."""
    honest = N - z
    zero = 1 - prob.pileup_n(rho, p, honest)
    n = int(math.ceil(min_retained / zero * 1.1 + 50 * math.sqrt(min_retained)))
    return sa.kahe_view(rho, k, n, p, honest, rng), n


def attack_rate(rng, rho=2, p=0.05, N=6, z=0, min_retained=100_000):
    """(empirical per-value rate, predicted, sigma, |I|) on the extracted coordinates."""
    view, _ = attack_view(rng, rho, p, N, z, min_retained)
    ext = sa.attack_extract(view.A, view.s_bar, view.ys, rho)
    resid = (ext.b - ring.mat_vec(view.keys[0], ext.A, ring.RingParams(rho))) % rho
    emp = sa.per_value_rate(resid, rho)
    pred = params.tau_solver(rho, p, N, z)
    total = pred * (rho - 1)
    sigma = math.sqrt(total * (1 - total) / resid.size) / (rho - 1)
    return emp, pred, sigma, resid.size


def attack_drand(rng, rho=2, p=0.05, N=6, z=0, min_retained=100_000) -> float:
    honest = N - z
    zero = 1 - prob.pileup_n(rho, p, honest)
    n = int(math.ceil(min_retained / zero * 1.1 + 50 * math.sqrt(min_retained)))
    view = sa.rand_view(rho, 8, n, p, honest, rng)
    ext = sa.attack_extract(view.A, view.s_bar, view.ys, rho)
    return sa.chi_square_uniform(ext.b, rho)


HYB = dict(rho=2, k=2, n=4, N=3, p=0.1)
HYB_MESSAGES = [np.array([1, 0]), np.array([0, 1]), np.array([1, 1])]


def _view_features(v: sa.KaheView) -> list[np.ndarray]:
    """Projections tested for equality: (A, y_j) for each j and (A, s_bar, e_bar)."""
    rho = v.rho
    feats = [sa.pack_codes([v.A, y], rho) for y in v.ys]
    feats.append(sa.pack_codes([v.A, v.s_bar, v.e_bar], rho))
    return feats


def hybrid_pvalues(rng, ell: int, uniform: bool, samples=100_000) -> list[float]:
    """Two-sample p-values: embedded view vs the direct hybrid it should match."""
    h = HYB
    code = coding.repetition_code(h["rho"], 2, h["n"] // 2)
    inst = sa.sample_hintlpn(h["rho"], h["k"], h["n"], h["p"], h["p"], rng, batch=samples, uniform=uniform)
    emb = sa.hybrid_embed(ell, inst, h["N"], HYB_MESSAGES, code, h["p"], rng)
    target = ell if uniform else ell - 1
    ref = sa.hybrid_sample(target, h["rho"], h["k"], h["n"], h["N"], h["p"], HYB_MESSAGES, code, rng, batch=samples)
    return [sa.chi_square_two_sample(a, b) for a, b in zip(_view_features(emb), _view_features(ref))]


def hybrid_distinct_pvalue(rng, ell: int, samples=100_000) -> float:
    """Power check: direct Hyb_{ell-1} vs Hyb_ell on the (A, y_ell) projection."""
    h = HYB
    code = coding.repetition_code(h["rho"], 2, h["n"] // 2)
    a = sa.hybrid_sample(ell - 1, h["rho"], h["k"], h["n"], h["N"], h["p"], HYB_MESSAGES, code, rng, batch=samples)
    b = sa.hybrid_sample(ell, h["rho"], h["k"], h["n"], h["N"], h["p"], HYB_MESSAGES, code, rng, batch=samples)
    return sa.chi_square_two_sample(_view_features(a)[ell - 1], _view_features(b)[ell - 1])


def hint_swap_rates(rng, rho=3, p_e=0.05, p_f=0.2, n=100_000):
    """Swapped instance: (rate of new e, rate of new f, sigma_e, sigma_f, consistent)."""
    inst = sa.sample_hintlpn(rho, 4, n, p_e, p_f, rng)
    sw = sa.hint_swap(inst)
    F = ring.RingParams(rho)
    consistent = np.array_equal((ring.mat_vec(sw.s, sw.A, F) + sw.e) % rho, sw.b) and np.array_equal(
        (sw.e + sw.f) % rho, sw.h
    )
    se = math.sqrt(p_f * (1 - p_f) / n)
    sf = math.sqrt(p_e * (1 - p_e) / n)
    return sa.empirical_rate(sw.e), sa.empirical_rate(sw.f), se, sf, consistent


# --- suites ----------------------------------------------------------------


def attack_checks(seed: int = 0, samples: int = 100_000) -> list[CheckResult]:
    """Every statistical security check, in report order."""
    out = []
    gap = cover_identity_gap()
    out.append(CheckResult("cover_joint_exact", f"{gap:.2e}", "<= 1e-12", gap <= 1e-12))
    for rho in (2, 3, 5):
        out.append(_two_of_three(f"reduction_joint_rho{rho}", seed, lambda g, r=rho: reduction_pvalue(g, r, coords=samples)))
    out.append(
        _two_of_three("reduction_uniform_rho3", seed, lambda g: reduction_pvalue(g, 3, coords=samples, uniform=True))
    )
    e_rate, f_rate, se, sf, consistent = hint_swap_rates(np.random.default_rng(seed), n=samples)
    ok = consistent and abs(e_rate - 0.2) <= 3 * se and abs(f_rate - 0.05) <= 3 * sf
    out.append(CheckResult("hint_swap_roles", f"e={e_rate:.4f} f={f_rate:.4f}", "3 sigma of (0.2, 0.05)", ok))
    for z in (0, 2, 4):
        runs = [attack_rate(g, z=z, min_retained=samples) for g in _seeds(seed, f"attack_z{z}")]
        hits = sum(abs(e - p) <= 3 * s for e, p, s, _ in runs)
        stat = ",".join(f"{e:.5f}" for e, *_ in runs) + f" vs {runs[0][1]:.5f}"
        out.append(CheckResult(f"attack_rate_z{z}", stat, "2/3 within 3 sigma", hits >= 2))
    for z in (0, 2, 4):
        out.append(_two_of_three(f"attack_drand_z{z}", seed, lambda g, z=z: attack_drand(g, z=z, min_retained=samples)))
    for ell in (2, 3):
        for uniform in (False, True):
            name = f"hybrid_l{ell}_{'uniform' if uniform else 'honest'}"
            runs = [hybrid_pvalues(g, ell, uniform, samples) for g in _seeds(seed, name)]
            ok = sum(min(r) > ALPHA for r in runs) >= 2
            stat = "min p=" + ",".join(f"{min(r):.3g}" for r in runs)
            out.append(CheckResult(name, stat, f"2/3 all > {ALPHA}", ok))
    return out


def selftest_checks(seed: int = 0) -> list[CheckResult]:
    """Fast deterministic invariants across all modules."""
    out = []

    def add(name, ok, stat="", thr=""):
        out.append(CheckResult(name, stat, thr, bool(ok)))

    err = pileup_exact(tuples=10, seed=seed)
    add("prob.pileup_vs_convolution", err <= 1e-12, f"{err:.1e}", "<= 1e-12")
    gap = cover_identity_gap(grid=(0.05, 0.2, 0.4))
    add("prob.cover_identity", gap <= 1e-12, f"{gap:.1e}", "<= 1e-12")
    worst, ordered = tau_order(trials=100, seed=seed)
    add("params.tau_coincide_and_order", worst <= 1e-12 and ordered, f"{worst:.1e}", "<= 1e-12")
    add("params.prange_examples", params.lpn_dimension(0.5, 128) == 128 and params.lpn_dimension(0.75, 128) == 64)
    plan_cost = params.modulus_cost(11, 1000, 0.5, 5, 2, 10_000)
    add("params.cost_hand_case", abs(plan_cost - 74954) <= 1, f"{plan_cost:.1f}", "74954 +- 1")

    basis = ring.CrtBasis((3, 5, 7))
    xs = np.arange(basis.q)
    back = ring.crt_recombine(ring.crt_decompose(xs, basis), basis)
    add("ring.crt_round_trip", np.array_equal(back.astype(np.int64), xs))

    rep = coding.repetition_code(5, 2, 3)
    add("code.repetition_examples", list(coding.decode(rep, [2, 2, 1, 4, 0, 4])) == [2, 4])
    polar = coding.polar_construct(2, 64, 0.05, 32, mc_trials=200, seed=seed)
    rng = np.random.default_rng(seed)
    m = rng.integers(0, 2, size=(50, 32))
    add("code.polar_noiseless", np.array_equal(coding.decode(polar, coding.encode(polar, m)), m))

    sp = committee.SharingParams(7, 3, 1, 2)
    shares = committee.share_key(np.array([4, 2]), sp, masks=[[5]])
    add(
        "committee.hand_example",
        [int(s.value[0]) for s in shares] == [4, 0, 6]
        and list(committee.reconstruct(shares, sp).s) == [4, 2],
    )

    frame = protocol.wire_encode(protocol.Message(protocol.MsgType.CIPHERTEXT, b"abc"))
    add("protocol.wire_round_trip", protocol.wire_decode(frame).payload == b"abc" and len(frame) == 8)
    cfg = protocol.build_config(3, 1, 4, 4, 8, (11, 13), 0.0, 8, rounds=2, master_seed=seed)
    ins = [rng.integers(0, 4, size=16) for _ in range(3)]
    res = protocol.run_session(cfg, ins)
    add("protocol.noiseless_session", res.ok and np.array_equal(res.aggregate.astype(np.int64), sum(ins)))
    return out


def format_report(results: list[CheckResult]) -> str:
    w = max(len(r.name) for r in results)
    sw = max(len(r.statistic) for r in results)
    tw = max(len(r.threshold) for r in results)
    lines = [f"{'test':<{w}}  {'statistic':<{sw}}  {'threshold':<{tw}}  result"]
    for r in results:
        lines.append(f"{r.name:<{w}}  {r.statistic:<{sw}}  {r.threshold:<{tw}}  {'PASS' if r.passed else 'FAIL'}")
    return "\n".join(lines)
