"""Exact q-ary Bernoulli machinery.

A q-ary Bernoulli distribution ``Bern(p)`` over F_rho puts mass ``1 - p`` on
zero and ``p / (rho - 1)`` on every nonzero residue, so its *rate* ``p`` is the
total nonzero mass.  All distributions here are small dense probability
vectors indexed by residue.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.linalg import solve_circulant

from .errors import ConditioningError, InfeasibleError, ParameterError

TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function over F_rho, ``probs[x] = Pr[X = x]``."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim != 1 or p.size < 2:
            raise ParameterError("a Pmf needs a 1-D probability vector of length >= 2")
        if p.min() < 0 or abs(p.sum() - 1.0) > TOL:
            raise ParameterError(f"not a probability vector: min={p.min()}, sum={p.sum()}")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def rho(self) -> int:
        return self.probs.size

    def __getitem__(self, x):
        return self.probs[x]

    def __len__(self):
        return self.probs.size

    def nonzero_mass(self) -> float:
        return float(1.0 - self.probs[0])

    def allclose(self, other: "Pmf", tol: float = TOL) -> bool:
        return self.rho == other.rho and float(np.max(np.abs(self.probs - other.probs))) <= tol

    @classmethod
    def point(cls, rho: int, x: int = 0) -> "Pmf":
        p = np.zeros(rho)
        p[x % rho] = 1.0
        return cls(p)

    @classmethod
    def uniform(cls, rho: int) -> "Pmf":
        return cls(np.full(rho, 1.0 / rho))


def max_rate(rho: int) -> float:
    return (rho - 1) / rho


def check_rate(rho: int, p: float) -> float:
    if rho < 2:
        raise ParameterError(f"modulus must be >= 2, got {rho}")
    # allow rounding slack at the saturation point
    if not (0.0 <= p <= max_rate(rho) + TOL):
        raise ParameterError(f"rate {p} outside [0, {max_rate(rho)}] for rho={rho}")
    return min(float(p), max_rate(rho))


def bern_pmf(rho: int, p: float) -> Pmf:
    p = check_rate(rho, p)
    probs = np.full(rho, p / (rho - 1))
    probs[0] = 1.0 - p
    return Pmf(probs)


def pileup(rho: int, rates: Iterable[float]) -> float:
    """Rate of the sum of independent ``Bern(p_i)`` variables over F_rho."""
    rates = [check_rate(rho, p) for p in rates]
    if not rates:
        raise ParameterError("pileup needs at least one rate")
    c = max_rate(rho)
    prod = math.prod(1.0 - p / c for p in rates)
    return c - c * prod


def pileup_n(rho: int, p: float, m: int) -> float:
    """Rate of the sum of ``m`` i.i.d. ``Bern(p)`` variables (``m = 0`` gives 0)."""
    p = check_rate(rho, p)
    if m < 0:
        raise ParameterError("number of summands must be nonnegative")
    c = max_rate(rho)
    return c - c * (1.0 - p / c) ** m


def convolve(a: Pmf, b: Pmf) -> Pmf:
    """Distribution of ``X + Y mod rho`` for independent X ~ a, Y ~ b."""
    if a.rho != b.rho:
        raise ParameterError(f"modulus mismatch: {a.rho} vs {b.rho}")
    rho = a.rho
    out = np.zeros(rho)
    for x in range(rho):
        out += a.probs[x] * np.roll(b.probs, x)
    return Pmf(out / out.sum())


def qary_entropy(rho: int, x: float) -> float:
    """The rho-ary entropy function H_rho(x), in units of log_rho."""
    x = check_rate(rho, x)
    log = lambda v: math.log(v, rho)  # noqa: E731
    h = x * log(rho - 1)
    if x > 0:
        h -= x * log(x)
    if x < 1:
        h -= (1 - x) * log(1 - x)
    return h


def cond_error_given_hint(rho: int, p: float, h: int) -> Pmf:
    """Law of ``e`` given ``e + f = h`` for independent e, f ~ Bern(p).

    Computed by enumerating the joint law of (e, f).
    """
    bern = bern_pmf(rho, p).probs
    h %= rho
    joint = np.array([bern[e] * bern[(h - e) % rho] for e in range(rho)])
    total = joint.sum()
    if total <= 0:
        raise ConditioningError(f"Pr[e + f = {h}] = 0 for p={p}")
    return Pmf(joint / total)


def hint_zero_rate(rho: int, p: float) -> float:
    """Closed-form nonzero mass of ``e | e + f = 0``; the law is ``Bern`` of this rate."""
    num = (rho - 1) * (1 - p) ** 2
    return 1.0 - num / (num + p**2)


def hint_nonzero_masses(rho: int, p: float) -> tuple[float, float]:
    """Closed-form masses ``(u, v)`` of ``e | e + f = h`` for ``h != 0``.

    ``u`` is the mass at each of ``{0, h}``; ``v`` the mass everywhere else.
    """
    den = 2 * (rho - 1) * (1 - p) + (rho - 2) * p
    return (rho - 1) * (1 - p) / den, p / den


def cover_distribution(rho: int, p: float, tau: float, h: int) -> Pmf:
    """The unique D with ``Bern(tau) * D = law(e | e + f = h)``, by deconvolution.

    Raises :class:`InfeasibleError` when the deconvolved vector has negative
    mass beyond tolerance, i.e. when ``tau`` is too large for this ``p``.
    """
    tau = check_rate(rho, tau)
    target = cond_error_given_hint(rho, p, h).probs
    if tau == 0:
        return Pmf(target)
    if abs(tau - max_rate(rho)) < TOL:
        raise InfeasibleError("Bern(tau) is uniform and cannot be deconvolved", "tau")
    # first column of the circulant C with C[z, x] = Bern_tau[z - x]
    d = solve_circulant(bern_pmf(rho, tau).probs, target)
    if d.min() < -TOL:
        raise InfeasibleError(
            f"tau={tau} infeasible for p={p}, h={h}: deconvolution mass {d.min():.3e} < 0", "tau"
        )
    d = np.clip(d, 0.0, None)
    return Pmf(d / d.sum())


def cover_closed_form(rho: int, p: float, tau: float, h: int) -> np.ndarray:
    """Closed-form cover masses, ``((rho-1) w - tau) / ((rho-1) - rho*tau)`` per residue.

    ``w`` is the conditional law of ``e`` given the hint.  Returned as a raw
    vector (no validation) so callers can inspect infeasible regimes.
    """
    h %= rho
    if h == 0:
        pz = hint_zero_rate(rho, p)
        w = np.full(rho, pz / (rho - 1))
        w[0] = 1 - pz
    else:
        u, v = hint_nonzero_masses(rho, p)
        w = np.full(rho, v)
        w[0] = w[h] = u
    return ((rho - 1) * w - tau) / ((rho - 1) - rho * tau)


def cover_rate_h0(rho: int, p: float, tau: float) -> float:
    """Rate of the (Bernoulli) cover distribution for hint zero, via inverse piling-up."""
    c = max_rate(rho)
    r = c - c * (1 - hint_zero_rate(rho, p) / c) / (1 - tau / c)
    # at rho = 2 and the reduction tau the exact value is 0; absorb rounding
    return max(r, 0.0) if r > -TOL else r


def cover_feasibility_bound(rho: int, p: float) -> float:
    """Largest tau keeping the ``h != 0`` cover masses nonnegative."""
    return (rho - 1) * p / (2 * (rho - 1) * (1 - p) + (rho - 2) * p)


def sample(pmf: Pmf, rng: np.random.Generator, size=None):
    """Inverse-CDF sampling from ``pmf``; returns an int or an int64 array."""
    cdf = np.cumsum(pmf.probs)
    # guard against the last entry rounding below 1
    cdf[-1] = np.inf
    u = rng.random(size)
    out = np.searchsorted(cdf, u, side="right")
    if size is None:
        return int(out)
    return out.astype(np.int64)


def sample_bernoulli(rho: int, p: float, size, rng: np.random.Generator) -> np.ndarray:
    return sample(bern_pmf(rho, p), rng, size)
