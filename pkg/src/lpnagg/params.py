"""Parameter planning: noise-rate maps, Prange sizing, code rate, and cost search.

Security sizing uses the Prange (plain information-set decoding) cost
``(1 - tau)^-k``; BKW is reported only as an asymptotic figure.  The
communication cost per user of a plan over moduli ``rho_t`` is::

    sum_t (k_t * M_t / (M_t - z) + k_C / R_t) * log2(rho_t)  bits

where ``M_t`` is the per-modulus committee size (``M_t = 0`` denotes a single
trusted decryptor, contributing ``k_t`` key symbols).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .errors import InfeasibleError, ParameterError
from .prob import check_rate, max_rate, pileup_n, qary_entropy
from .ring import primes_between


class SecurityMode(str, Enum):
    REDUCTION = "reduction"
    SOLVER = "solver"


def tau_reduction(rho: int, p: float) -> float:
    """LPN noise rate under which the scheme is provably secure for noise rate ``p``."""
    p = check_rate(rho, p)
    q1 = rho - 1
    den = q1**2 * (1 - p) ** 2 + q1 * p**2
    return p**2 / den if den > 0 else 0.0


def tau_solver(rho: int, p: float, N: int, z: int) -> float:
    """LPN noise rate faced by the concrete attack with ``z`` colluding users."""
    p = check_rate(rho, p)
    if z > N - 2:
        raise ParameterError(f"solver mode needs z <= N - 2, got z={z}, N={N}")
    p2 = pileup_n(rho, p, N - z - 1)
    q1 = rho - 1
    den = q1**2 * (1 - p) * (1 - p2) + q1 * p * p2
    return p * p2 / den if den > 0 else 0.0


def noise_rate(rho: int, p: float, mode: SecurityMode | str, N: int = 2, z: int = 0) -> float:
    if SecurityMode(mode) is SecurityMode.REDUCTION:
        return tau_reduction(rho, p)
    return tau_solver(rho, p, N, z)


def prange_bits(tau: float, k: int) -> float:
    """log2 of the Prange cost ``(1 - tau)^-k``."""
    return -k * math.log1p(-tau) / math.log(2)


def lpn_dimension(tau: float, lam: float) -> int:
    """Smallest k with ``(1 - tau)^-k >= 2^lam``."""
    if not 0 < tau < 1:
        raise InfeasibleError(f"noise rate {tau} gives no security for any dimension", "tau")
    if lam < 1:
        raise ParameterError("security level must be >= 1 bit")
    per = -math.log1p(-tau) / math.log(2)
    k = max(1, math.ceil(lam / per))
    while k > 1 and (k - 1) * per >= lam:
        k -= 1
    while k * per < lam:
        k += 1
    return k


def bkw_estimate(k: int) -> str:
    """Asymptotic BKW cost, for context only (the hidden constant is unknown)."""
    if k < 2:
        raise ParameterError("BKW estimate needs k >= 2")
    return f"2^O(k/log k), k/log2(k) = {k / math.log2(k):.6g}"


def rate_bound(rho: int, N: int, p: float, eps: float = 0.1) -> float:
    """Code rate ``max(0, 1 - H_rho(P) - eps)`` for the aggregate noise ``P`` of N users."""
    P = pileup_n(rho, p, N)
    if P >= max_rate(rho) - 1e-12:
        raise InfeasibleError(f"aggregate noise {P} saturates the channel", "rate")
    return max(0.0, 1.0 - qary_entropy(rho, P) - eps)


def committee_size(rho: int, M: int) -> int:
    """Per-modulus committee: distinct nonzero evaluation points cap it at rho - 1."""
    if M <= 0:
        return 0
    return min(rho - 1, M)


def share_factor(M_t: int, z: int) -> float:
    if M_t == 0:
        return 1.0
    if M_t <= z:
        raise InfeasibleError(f"committee of {M_t} cannot tolerate z={z} collusions", "committee")
    return M_t / (M_t - z)


def modulus_cost(rho: int, k: int, R: float, M_t: int, z: int, k_C: int) -> float:
    if R <= 0:
        raise InfeasibleError("code rate must be positive", "rate")
    return (k * share_factor(M_t, z) + k_C / R) * math.log2(rho)


@dataclass(frozen=True)
class ModulusPlan:
    rho: int
    p: float
    tau: float
    k: int
    R: float
    n: int
    M: int
    P: float
    cost_bits: float
    security_bits: float


@dataclass
class ParamPlan:
    moduli: tuple[ModulusPlan, ...]
    N: int
    z: int
    M: int
    levels: int
    k_C: int
    lam: float
    eps: float
    mode: SecurityMode
    sweeps: dict[int, list[dict]] = field(default_factory=dict, repr=False)

    @property
    def cost_bits(self) -> float:
        return comm_cost(self, self.z, self.k_C)

    @property
    def security_bits(self) -> float:
        return min(m.security_bits for m in self.moduli)

    @property
    def q(self) -> int:
        return math.prod(m.rho for m in self.moduli)

    def violations(self) -> list[str]:
        """Plan invariants that do not hold (empty when the plan is valid)."""
        bad = []
        for m in self.moduli:
            if m.k * (-math.log1p(-m.tau) / math.log(2)) < self.lam - 1e-9:
                bad.append(f"rho={m.rho}: k below Prange bound")
            rmax = 1 - qary_entropy(m.rho, pileup_n(m.rho, m.p, self.N)) - self.eps
            if m.R > rmax + 1e-12:
                bad.append(f"rho={m.rho}: rate above capacity bound")
            if m.rho <= self.z:
                bad.append(f"rho={m.rho}: modulus not above z")
            if m.M and m.M <= self.z:
                bad.append(f"rho={m.rho}: committee too small")
        if self.q <= self.N * (self.levels - 1):
            bad.append("product of moduli does not exceed N(levels - 1)")
        return bad


def comm_cost(plan: ParamPlan, z: int, k_C: int) -> float:
    """Per-user communication in bits."""
    return sum(modulus_cost(m.rho, m.k, m.R, m.M, z, k_C) for m in plan.moduli)


def p_grid(rho: int, per_decade: int = 40, lo: float = 1e-6) -> np.ndarray:
    hi = 0.5 * max_rate(rho)
    count = int(math.floor(per_decade * math.log10(hi / lo))) + 1
    return lo * 10 ** (np.arange(count) / per_decade)


def _entropy(rho: int, x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        h = x * np.log(rho - 1) - np.where(x > 0, x * np.log(x), 0.0)
        h -= np.where(x < 1, (1 - x) * np.log1p(-x), 0.0)
    return h / np.log(rho)


def _sweep_arrays(rho, N, z, M, k_C, lam, eps, mode, min_rate, grid):
    ps = np.asarray(grid, dtype=float)
    c = max_rate(rho)
    P = c - c * (1 - ps / c) ** N
    R = 1 - _entropy(rho, P) - eps
    if mode is SecurityMode.REDUCTION:
        tau = ps**2 / ((rho - 1) ** 2 * (1 - ps) ** 2 + (rho - 1) * ps**2)
    else:
        if z > N - 2:
            raise ParameterError(f"solver mode needs z <= N - 2, got z={z}, N={N}")
        p2 = c - c * (1 - ps / c) ** (N - z - 1)
        tau = ps * p2 / ((rho - 1) ** 2 * (1 - ps) * (1 - p2) + (rho - 1) * ps * p2)
    ok = (R > 0) & (R >= min_rate) & (tau > 0) & (tau < 1)
    per = np.where(ok, -np.log1p(-np.where(ok, tau, 0.5)) / math.log(2), 1.0)
    # dimensions beyond 2**53 are not representable exactly; treat as infeasible
    ok &= lam / per < 2.0**53
    ps, P, R, tau, per = ps[ok], P[ok], R[ok], tau[ok], per[ok]
    k = np.maximum(1, np.ceil(lam / per))
    k = np.where((k > 1) & ((k - 1) * per >= lam), k - 1, k)
    k = np.where(k * per < lam, k + 1, k).astype(np.int64)
    factor = share_factor(committee_size(rho, M), z)
    cost = (k * factor + k_C / R) * math.log2(rho)
    return ps, P, tau, k, R, cost


def sweep_modulus(
    rho: int,
    N: int,
    z: int,
    M: int,
    k_C: int,
    lam: float,
    eps: float,
    mode: SecurityMode | str,
    min_rate: float = 0.0,
    grid: np.ndarray | None = None,
) -> list[dict]:
    """All feasible p-grid points for one modulus, as dicts (p, P, tau, k, R, cost)."""
    mode = SecurityMode(mode)
    grid = p_grid(rho) if grid is None else grid
    cols = _sweep_arrays(rho, N, z, M, k_C, lam, eps, mode, min_rate, grid)
    rows = [
        dict(rho=rho, p=float(p), P=float(P), tau=float(t), k=int(k), R=float(R), cost=float(c))
        for p, P, t, k, R, c in zip(*cols)
    ]
    for i, r in enumerate(rows):
        # pareto in (higher R, lower k): larger p lowers both
        r["pareto"] = int(i + 1 == len(rows) or rows[i + 1]["k"] < r["k"])
    return rows


def _best_point(rho, N, z, M, k_C, lam, eps, mode, min_rate, grid) -> dict | None:
    ps, P, tau, k, R, cost = _sweep_arrays(rho, N, z, M, k_C, lam, eps, mode, min_rate, grid)
    if ps.size == 0:
        return None
    # argmin returns the first minimum, i.e. the smallest p on ties
    i = int(np.argmin(cost))
    return dict(
        rho=rho, p=float(ps[i]), P=float(P[i]), tau=float(tau[i]), k=int(k[i]), R=float(R[i]),
        cost=float(cost[i]),
    )


def _eligible(rho: int, M: int, z: int) -> bool:
    if rho <= z:
        return False
    M_t = committee_size(rho, M)
    return M_t == 0 or M_t - 1 > z


def optimize(
    N: int,
    z: int,
    M: int,
    levels: int,
    k_C: int,
    lam: float = 128,
    eps: float = 0.1,
    mode: SecurityMode | str = SecurityMode.REDUCTION,
    min_rate: float = 0.0,
    prime_limit: int = 2**16,
    max_candidates: int = 16,
    per_decade: int = 40,
) -> ParamPlan:
    """Cheapest plan over candidate modulus sets and per-modulus noise rates.

    Every prime in ``(z, prime_limit)`` admitting a committee is swept over
    the p-grid; the ``max_candidates`` primes with the lowest best cost per
    modulus bit form the candidate pool, and every subset of the pool whose
    product exceeds ``N (levels - 1)`` is scored.  Ties break on the sorted
    moduli tuple.
    """
    mode = SecurityMode(mode)
    if N < 2:
        raise ParameterError("need at least two users")
    if levels < 2:
        raise ParameterError("need at least two quantization levels")
    if mode is SecurityMode.SOLVER and z > N - 2:
        raise InfeasibleError(f"solver mode needs z <= N - 2 (z={z}, N={N})", "z")
    need = N * (levels - 1)
    best_rows: dict[int, dict] = {}
    for rho in primes_between(z, prime_limit):
        if not _eligible(rho, M, z):
            continue
        b = _best_point(rho, N, z, M, k_C, lam, eps, mode, min_rate, p_grid(rho, per_decade))
        if b is not None:
            best_rows[rho] = b
    if not best_rows:
        raise InfeasibleError(
            "no modulus admits a positive rate with the requested security", "rate"
        )
    pool = sorted(best_rows, key=lambda r: (best_rows[r]["cost"] / math.log2(r), r))
    pool = sorted(pool[:max_candidates])
    if math.prod(pool) <= need:
        raise InfeasibleError(
            f"candidate moduli cannot exceed N(levels-1) = {need}; raise prime_limit", "product"
        )
    choice = best_subset(pool, {r: best_rows[r]["cost"] for r in pool}, need)
    mods = []
    for rho in choice:
        b = best_rows[rho]
        mods.append(
            ModulusPlan(
                rho=rho,
                p=b["p"],
                tau=b["tau"],
                k=b["k"],
                R=b["R"],
                n=math.ceil(k_C / b["R"]),
                M=committee_size(rho, M),
                P=b["P"],
                cost_bits=b["cost"],
                security_bits=prange_bits(b["tau"], b["k"]),
            )
        )
    return ParamPlan(
        moduli=tuple(mods),
        N=N,
        z=z,
        M=M,
        levels=levels,
        k_C=k_C,
        lam=lam,
        eps=eps,
        mode=mode,
        sweeps={
            r: sweep_modulus(r, N, z, M, k_C, lam, eps, mode, min_rate, p_grid(r, per_decade))
            for r in choice
        },
    )


def best_subset(pool: list[int], cost: dict[int, float], need: int) -> tuple[int, ...]:
    """Minimum-cost subset of ``pool`` with product > ``need`` (branch and bound)."""
    pool = sorted(pool)
    best: list = [math.inf, ()]

    def visit(i: int, prod: int, total: float, chosen: tuple[int, ...]):
        if total > best[0]:
            return
        if prod > need:
            if (total, chosen) < (best[0], best[1]):
                best[0], best[1] = total, chosen
            return
        for j in range(i, len(pool)):
            r = pool[j]
            visit(j + 1, prod * r, total + cost[r], chosen + (r,))

    visit(0, 1, 0.0, ())
    if not best[1]:
        raise InfeasibleError("no subset of the candidate moduli is large enough", "product")
    return best[1]


def max_noise_for_rate(rho: int, N: int, R_min: float, eps: float = 0.1) -> float:
    """Largest per-user rate p with ``rate_bound(rho, N, p, eps) >= R_min``."""
    if 1 - eps < R_min:
        raise InfeasibleError(f"rate {R_min} unreachable with eps={eps}", "rate")
    hi = max_rate(rho) * (1 - 1e-9)
    f = lambda p: 1 - qary_entropy(rho, pileup_n(rho, p, N)) - eps - R_min  # noqa: E731
    if f(hi) >= 0:
        return hi
    return brentq(f, 0.0, hi, xtol=1e-15, rtol=1e-13)


def min_dimension_for_rate(
    rho: int,
    N: int,
    R_min: float,
    lam: float = 128,
    eps: float = 0.1,
    mode: SecurityMode | str = SecurityMode.REDUCTION,
    z: int = 0,
) -> int:
    """Smallest LPN dimension compatible with code rate ``>= R_min``.

    Both the rate and the security noise rate are monotone in p, so the
    optimum sits at the largest admissible p.
    """
    p = max_noise_for_rate(rho, N, R_min, eps)
    return lpn_dimension(noise_rate(rho, p, mode, N, z), lam)
