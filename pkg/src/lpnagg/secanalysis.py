"""Executable security artifacts: samplers, reductions, hybrids and the concrete attack.

Every sampler keeps the ground truth (secrets and noise) so that the
distributional claims can be checked statistically.  Samplers accept an
optional ``batch`` shape which is prepended to every array; this is how the
Monte Carlo checks draw 10^5 tiny instances at once.

Rates follow the package convention: a rate is the total nonzero mass of a
q-ary Bernoulli distribution.  The concrete attack's conditional noise is
quoted per nonzero value, so :func:`per_value_rate` divides by ``rho - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from . import coding
from .coding import CodeSpec
from .errors import DimensionError, ParameterError
from .params import tau_reduction, tau_solver
from .prob import cover_distribution, pileup, pileup_n, sample, sample_bernoulli


def _matvec(s: np.ndarray, A: np.ndarray, rho: int) -> np.ndarray:
    if s.shape[:-1] != A.shape[:-2] or s.shape[-1] != A.shape[-2]:
        raise DimensionError(f"cannot multiply {s.shape} by {A.shape}")
    if (rho - 1) ** 2 * s.shape[-1] >= 2**62:
        raise ParameterError("batched product would overflow int64; use ring.mat_vec")
    return np.einsum("...k,...kn->...n", s, A) % rho


def _shape(batch, *dims):
    if batch is None:
        return tuple(dims)
    batch = (batch,) if np.isscalar(batch) else tuple(batch)
    return batch + tuple(dims)


@dataclass
class LpnInstance:
    rho: int
    A: np.ndarray
    b: np.ndarray
    s: np.ndarray | None = None
    e: np.ndarray | None = None


@dataclass
class HintLpnInstance:
    rho: int
    A: np.ndarray
    b: np.ndarray
    h: np.ndarray
    s: np.ndarray | None = None
    e: np.ndarray | None = None
    f: np.ndarray | None = None


def sample_lpn(rho, k, n, tau, rng, batch=None, uniform=False) -> LpnInstance:
    """Honest ``(A, sA + e)`` or, with ``uniform``, ``(A, u)``."""
    A = rng.integers(0, rho, size=_shape(batch, k, n), dtype=np.int64)
    s = rng.integers(0, rho, size=_shape(batch, k), dtype=np.int64)
    e = sample_bernoulli(rho, tau, _shape(batch, n), rng)
    if uniform:
        b = rng.integers(0, rho, size=_shape(batch, n), dtype=np.int64)
        return LpnInstance(rho, A, b)
    return LpnInstance(rho, A, (_matvec(s, A, rho) + e) % rho, s, e)


def sample_hintlpn(rho, k, n, p_e, p_f, rng, batch=None, uniform=False) -> HintLpnInstance:
    """Honest ``(A, sA + e, e + f)`` or, with ``uniform``, ``(A, u, e + f)``."""
    A = rng.integers(0, rho, size=_shape(batch, k, n), dtype=np.int64)
    s = rng.integers(0, rho, size=_shape(batch, k), dtype=np.int64)
    e = sample_bernoulli(rho, p_e, _shape(batch, n), rng)
    f = sample_bernoulli(rho, p_f, _shape(batch, n), rng)
    h = (e + f) % rho
    if uniform:
        u = rng.integers(0, rho, size=_shape(batch, n), dtype=np.int64)
        return HintLpnInstance(rho, A, u, h, None, e, f)
    return HintLpnInstance(rho, A, (_matvec(s, A, rho) + e) % rho, h, s, e, f)


def sample_cover(rho: int, p: float, tau: float, h: np.ndarray, rng) -> np.ndarray:
    """Draw ``t_i ~ D_{h_i}`` independently for every entry of ``h``."""
    h = np.asarray(h, dtype=np.int64)
    t = np.zeros(h.shape, dtype=np.int64)
    for value in np.unique(h):
        where = h == value
        t[where] = sample(cover_distribution(rho, p, tau, int(value)), rng, int(where.sum()))
    return t


def lpn_to_hintlpn(inst: LpnInstance, tau: float, p: float, rng) -> HintLpnInstance:
    """Turn LPN samples of rate ``tau`` into Hint-LPN samples with rates (p, p).

    Samples ``h ~ Bern(p + p)`` and ``t ~ D_h`` per coordinate and outputs
    ``(A, b + t, h)``.  Ground truth, when present, is carried through with
    noise ``e + t``.
    """
    rho = inst.rho
    h = sample_bernoulli(rho, pileup(rho, [p, p]), inst.b.shape, rng)
    t = sample_cover(rho, p, tau, h, rng)
    b = (inst.b + t) % rho
    e = None if inst.e is None else (inst.e + t) % rho
    f = None if e is None else (h - e) % rho
    return HintLpnInstance(rho, inst.A, b, h, inst.s, e, f)


def hint_swap(inst: HintLpnInstance) -> HintLpnInstance:
    """``(A, h - b, h)``: exchanges the roles of the LPN noise and the hint noise.

    With ``b = sA + e`` and ``h = e + f`` the new instance has secret ``-s``,
    LPN noise ``f`` and hint noise ``e``.
    """
    rho = inst.rho
    s = None if inst.s is None else (-inst.s) % rho
    return HintLpnInstance(rho, inst.A, (inst.h - inst.b) % rho, inst.h, s, inst.f, inst.e)


# --- KAHE views ------------------------------------------------------------


@dataclass
class KaheView:
    """``(A, s_bar, e_bar, y_1..y_N)``; ``keys`` and ``errors`` are harness-only truth."""

    rho: int
    A: np.ndarray
    s_bar: np.ndarray
    e_bar: np.ndarray | None
    ys: list[np.ndarray]
    keys: list[np.ndarray] | None = None
    errors: list[np.ndarray] | None = None


def kahe_view(rho, k, n, p, users, rng, batch=None) -> KaheView:
    """Real ciphertexts of zero messages from ``users`` honest users."""
    A = rng.integers(0, rho, size=_shape(batch, k, n), dtype=np.int64)
    keys = [rng.integers(0, rho, size=_shape(batch, k), dtype=np.int64) for _ in range(users)]
    errs = [sample_bernoulli(rho, p, _shape(batch, n), rng) for _ in range(users)]
    ys = [(_matvec(s, A, rho) + e) % rho for s, e in zip(keys, errs)]
    return KaheView(rho, A, sum(keys) % rho, sum(errs) % rho, ys, keys, errs)


def rand_view(rho, k, n, p, users, rng, batch=None) -> KaheView:
    """Random counterpart: all but the last ciphertext uniform, last one fixes the sum.

    The sum of ciphertexts is distributed as in the real view (``s_bar A + e_bar``
    for zero messages), which is all the aggregate reveals.
    """
    real = kahe_view(rho, k, n, p, users, rng, batch)
    v = (_matvec(real.s_bar, real.A, rho) + real.e_bar) % rho
    ys = [rng.integers(0, rho, size=v.shape, dtype=np.int64) for _ in range(users - 1)]
    ys.append((v - sum(ys)) % rho if ys else v)
    return KaheView(rho, real.A, real.s_bar, real.e_bar, ys, real.keys, None)


@dataclass
class AttackExtract:
    A: np.ndarray
    b: np.ndarray
    index: np.ndarray


def attack_extract(A: np.ndarray, s_bar: np.ndarray, ys: Sequence[np.ndarray], rho: int):
    """Keep the coordinates where the aggregate error is zero.

    The aggregate error is ``sum_j y_j - s_bar A``; on its zero set the first
    ciphertext is an LPN sample under ``s_1`` with reduced noise.
    """
    if not ys:
        raise ParameterError("need at least one ciphertext")
    e_bar = (sum(ys) - _matvec(np.asarray(s_bar), np.asarray(A), rho)) % rho
    index = np.flatnonzero(e_bar == 0)
    if index.size == 0:
        raise ParameterError("degenerate instance: aggregate error has no zero coordinate")
    return AttackExtract(A[:, index], ys[0][index], index)


def attack_conditional_rate(rho: int, p: float, users: int) -> float:
    """Per-value rate of ``e_1`` given that the ``users`` errors sum to zero."""
    N, z = users, 0
    return tau_solver(rho, p, N, z) if users >= 2 else 0.0


# --- hybrids ---------------------------------------------------------------


def _encode_all(code: CodeSpec, messages, batch) -> list[np.ndarray]:
    cs = []
    for m in messages:
        c = coding.encode(code, m)
        cs.append(np.broadcast_to(c, _shape(batch, code.n)).copy())
    return cs


def hybrid_embed(
    ell: int,
    inst: HintLpnInstance,
    N: int,
    messages,
    code: CodeSpec,
    p: float,
    rng,
) -> KaheView:
    """Embed a Hint-LPN challenge into a KAHE view between hybrids ell-1 and ell.

    An honest challenge yields hybrid ``ell - 1``, a uniform one hybrid ``ell``.
    Users are 1-indexed as in the hybrid definition; ``messages[j - 1]`` is
    user j's message.
    """
    if not 2 <= ell <= N:
        raise ParameterError(f"need 2 <= ell <= N, got ell={ell}, N={N}")
    if len(messages) != N:
        raise ParameterError("need one message per user")
    rho = inst.rho
    A, b, h = inst.A, inst.b, inst.h
    batch = b.shape[:-1]
    k, n = A.shape[-2], A.shape[-1]
    c = _encode_all(code, messages, batch)
    others = [j for j in range(1, N + 1) if j not in (1, ell)]
    e = {j: sample_bernoulli(rho, p, batch + (n,), rng) for j in others}
    s = {j: rng.integers(0, rho, size=batch + (k,), dtype=np.int64) for j in others}
    s1 = rng.integers(0, rho, size=batch + (k,), dtype=np.int64)
    u = {j: rng.integers(0, rho, size=batch + (n,), dtype=np.int64) for j in range(2, ell)}

    y = [None] * (N + 1)
    acc = _matvec(s1, A, rho) + h - b + c[0]
    for j in range(2, ell):
        acc = acc + _matvec(s[j], A, rho) + e[j] - u[j]
    y[1] = acc % rho
    for j in range(2, ell):
        y[j] = (u[j] + c[j - 1]) % rho
    y[ell] = (b + c[ell - 1]) % rho
    for j in range(ell + 1, N + 1):
        y[j] = (_matvec(s[j], A, rho) + e[j] + c[j - 1]) % rho
    s_bar = (s1 + sum((s[j] for j in others), np.zeros_like(s1))) % rho
    e_bar = (h + sum((e[j] for j in others), np.zeros_like(h))) % rho
    return KaheView(rho, A, s_bar, e_bar, y[1:])


def hybrid_sample(
    ell: int, rho: int, k: int, n: int, N: int, p: float, messages, code: CodeSpec, rng, batch=None
) -> KaheView:
    """Direct sampler of hybrid ``ell`` (ell = 1 is the real distribution)."""
    if not 1 <= ell <= N:
        raise ParameterError(f"need 1 <= ell <= N, got ell={ell}, N={N}")
    A = rng.integers(0, rho, size=_shape(batch, k, n), dtype=np.int64)
    sh = A.shape[:-2]
    c = _encode_all(code, messages, sh)
    s = [rng.integers(0, rho, size=sh + (k,), dtype=np.int64) for _ in range(N)]
    e = [sample_bernoulli(rho, p, sh + (n,), rng) for _ in range(N)]
    u = [np.zeros(sh + (n,), dtype=np.int64)] + [
        rng.integers(0, rho, size=sh + (n,), dtype=np.int64) for _ in range(1, ell)
    ]
    real = [(_matvec(s[j], A, rho) + e[j]) % rho for j in range(N)]
    y1 = sum(real[j] - u[j] for j in range(ell)) + c[0]
    ys = [y1 % rho]
    ys += [(u[j] + c[j]) % rho for j in range(1, ell)]
    ys += [(real[j] + c[j]) % rho for j in range(ell, N)]
    return KaheView(rho, A, sum(s) % rho, sum(e) % rho, ys, s, e)


# --- statistics ------------------------------------------------------------


def empirical_rate(samples) -> float:
    """Fraction of nonzero entries."""
    x = np.asarray(samples)
    if x.size == 0:
        return 0.0
    return float(np.count_nonzero(x) / x.size)


def per_value_rate(samples, rho: int) -> float:
    return empirical_rate(samples) / (rho - 1)


def chi_square_uniform(samples, rho: int) -> float:
    """Pearson goodness-of-fit p-value of ``samples`` against uniform on F_rho."""
    x = np.asarray(samples, dtype=np.int64).ravel()
    if x.size < 5 * rho:
        raise ParameterError(f"need at least {5 * rho} samples, got {x.size}")
    counts = np.bincount(x, minlength=rho)
    return float(stats.chisquare(counts).pvalue)


def chi_square_gof(codes, probs) -> float:
    """Goodness-of-fit p-value of integer category codes against ``probs``.

    Categories with zero expected mass must not occur (p-value 0 if they do).
    """
    probs = np.asarray(probs, dtype=float).ravel()
    counts = np.bincount(np.asarray(codes, dtype=np.int64).ravel(), minlength=probs.size)
    if counts.size > probs.size or np.any(counts[probs == 0] > 0):
        return 0.0
    keep = probs > 0
    expected = probs[keep] / probs[keep].sum() * counts.sum()
    return float(stats.chisquare(counts[keep], expected).pvalue)


def chi_square_two_sample(a_codes, b_codes) -> float:
    """Homogeneity p-value for two samples of integer category codes."""
    a = np.asarray(a_codes, dtype=np.int64).ravel()
    b = np.asarray(b_codes, dtype=np.int64).ravel()
    size = int(max(a.max(initial=0), b.max(initial=0))) + 1
    table = np.vstack([np.bincount(a, minlength=size), np.bincount(b, minlength=size)])
    table = table[:, table.sum(0) > 0]
    if table.shape[1] < 2:
        return 1.0
    return float(stats.chi2_contingency(table, correction=False).pvalue)


def pack_codes(columns: Sequence[np.ndarray], rho: int) -> np.ndarray:
    """Mixed-radix code of the residue columns (last axes flattened) of a batch."""
    code = None
    for col in columns:
        col = np.asarray(col, dtype=np.int64)
        flat = col.reshape(col.shape[0], -1) if col.ndim > 1 else col[:, None]
        for i in range(flat.shape[1]):
            code = flat[:, i] if code is None else code * rho + flat[:, i]
    return code


def joint_noise_hint_pmf(rho: int, p: float) -> np.ndarray:
    """Exact joint law of ``(e, e + f)`` for e, f ~ Bern(p), as a rho x rho table."""
    from .prob import bern_pmf

    b = bern_pmf(rho, p).probs
    out = np.zeros((rho, rho))
    for e in range(rho):
        for f in range(rho):
            out[e, (e + f) % rho] += b[e] * b[f]
    return out


def joint_cover_pmf(rho: int, p: float, tau: float) -> np.ndarray:
    """Exact joint law of ``(e' + t, h)`` with e' ~ Bern(tau), h ~ Bern(p + p), t ~ D_h."""
    from .prob import bern_pmf, convolve

    noise = bern_pmf(rho, tau)
    hint = bern_pmf(rho, pileup(rho, [p, p])).probs
    out = np.zeros((rho, rho))
    for h in range(rho):
        if hint[h] == 0:
            continue
        out[:, h] = hint[h] * convolve(noise, cover_distribution(rho, p, tau, h)).probs
    return out


__all__ = [
    "AttackExtract",
    "HintLpnInstance",
    "KaheView",
    "LpnInstance",
    "attack_conditional_rate",
    "attack_extract",
    "chi_square_gof",
    "chi_square_two_sample",
    "chi_square_uniform",
    "empirical_rate",
    "hint_swap",
    "hybrid_embed",
    "hybrid_sample",
    "joint_cover_pmf",
    "joint_noise_hint_pmf",
    "kahe_view",
    "lpn_to_hintlpn",
    "pack_codes",
    "per_value_rate",
    "pileup_n",
    "rand_view",
    "sample_cover",
    "sample_hintlpn",
    "sample_lpn",
    "tau_reduction",
]
