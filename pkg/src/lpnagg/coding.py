"""Linear codes over F_rho: a repetition baseline and q-ary polar codes.

Both families encode a length-``k`` message into a length-``n`` codeword and
decode deterministically.  Encoders and decoders accept a single word of
shape ``(len,)`` or a batch of shape ``(frames, len)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binom

from .errors import DimensionError, ParameterError
from .prob import check_rate, max_rate, sample_bernoulli

REPETITION = "repetition"
POLAR = "polar"


@dataclass(frozen=True)
class CodeSpec:
    family: str
    rho: int
    n: int
    k: int
    frozen: tuple[int, ...] = ()
    design_rate: float = 0.0
    seed: int | None = None
    info: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in (REPETITION, POLAR):
            raise ParameterError(f"unknown code family {self.family!r}")
        if not 1 <= self.k <= self.n:
            raise ParameterError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        frozen = tuple(sorted(int(i) for i in self.frozen))
        if self.family == REPETITION:
            if self.n % self.k:
                raise ParameterError(f"repetition code needs k | n, got n={self.n}, k={self.k}")
            info = tuple(range(self.k))
        else:
            if self.n & (self.n - 1):
                raise ParameterError(f"polar length must be a power of two, got {self.n}")
            if len(frozen) != self.n - self.k or len(set(frozen)) != len(frozen):
                raise ParameterError(f"polar code needs {self.n - self.k} distinct frozen indices")
            if frozen and not (0 <= frozen[0] and frozen[-1] < self.n):
                raise ParameterError("frozen index out of range")
            fs = set(frozen)
            info = tuple(i for i in range(self.n) if i not in fs)
        object.__setattr__(self, "frozen", frozen)
        object.__setattr__(self, "info", info)

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def repetition_factor(self) -> int:
        return self.n // self.k

    def to_config(self, prefix: str = "code") -> dict[str, str]:
        out = {
            f"{prefix}.family": self.family,
            f"{prefix}.n": str(self.n),
            f"{prefix}.k": str(self.k),
        }
        if self.family == POLAR:
            out[f"{prefix}.frozen"] = ",".join(map(str, self.frozen))
            out[f"{prefix}.design_rate"] = repr(self.design_rate)
            out[f"{prefix}.seed"] = "" if self.seed is None else str(self.seed)
        return out

    @classmethod
    def from_config(cls, rho: int, cfg: dict[str, str], prefix: str = "code") -> "CodeSpec":
        family = cfg[f"{prefix}.family"]
        n, k = int(cfg[f"{prefix}.n"]), int(cfg[f"{prefix}.k"])
        if family == REPETITION:
            return cls(REPETITION, rho, n, k)
        frozen_s = cfg.get(f"{prefix}.frozen", "")
        frozen = tuple(int(x) for x in frozen_s.split(",") if x.strip())
        seed_s = cfg.get(f"{prefix}.seed", "")
        return cls(
            POLAR,
            rho,
            n,
            k,
            frozen=frozen,
            design_rate=float(cfg.get(f"{prefix}.design_rate", "0")),
            seed=int(seed_s) if seed_s else None,
        )


def repetition_code(rho: int, k: int, r: int) -> CodeSpec:
    return CodeSpec(REPETITION, rho, k * r, k)


# --- repetition ------------------------------------------------------------


def _plurality(blocks: np.ndarray, rho: int) -> tuple[np.ndarray, np.ndarray]:
    """Plurality vote along the last axis; ties go to the smallest residue.

    Returns the winners and the vote margin (winner count minus runner-up count).
    """
    counts = (blocks[..., :, None] == blocks[..., None, :]).sum(-1)
    best = counts.max(-1, keepdims=True)
    winner = np.where(counts == best, blocks, rho).min(-1)
    runner_up = np.where(blocks != winner[..., None], counts, 0).max(-1)
    return winner, best[..., 0] - runner_up


def repetition_block_failure_bound(r: int, P: float) -> float:
    """Probability that at least half of the ``r`` copies are corrupted.

    Upper-bounds the plurality failure probability on the rho-ary symmetric
    channel of rate ``P``; exact for rho = 2 and odd ``r``.
    """
    return float(binom.sf(math.ceil(r / 2) - 1, r, P))


def repetition_factor_for(P: float, k: int, target_fer: float, r_max: int = 255) -> int:
    """Smallest ``r`` with ``k * block_failure_bound(r, P) <= target_fer``."""
    for r in range(1, r_max + 1):
        if k * repetition_block_failure_bound(r, P) <= target_fer:
            return r
    raise ParameterError(f"no repetition factor <= {r_max} reaches FER {target_fer} at P={P}")


# --- polar -----------------------------------------------------------------


def polar_transform(u: np.ndarray, rho: int) -> np.ndarray:
    """Apply the n-fold Kronecker power of [[1, 0], [1, 1]] over F_rho."""
    x = np.array(u, dtype=np.int64, copy=True)
    n = x.shape[-1]
    lead = x.shape[:-1]
    h = 1
    while h < n:
        v = x.reshape(*lead, n // (2 * h), 2, h)
        v[..., 0, :] += v[..., 1, :]
        v[..., 0, :] %= rho
        h *= 2
    return x


def _normalize(L: np.ndarray) -> np.ndarray:
    s = L.sum(-1, keepdims=True)
    bad = s <= 0
    if np.any(bad):
        L = np.where(bad, 1.0, L)
        s = L.sum(-1, keepdims=True)
    return L / s


def _check_node(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    # Pr[a] = sum_b left[a + b] * right[b]
    rho = left.shape[-1]
    out = np.zeros_like(left)
    for b in range(rho):
        out += np.roll(left, -b, axis=-1) * right[..., b : b + 1]
    return _normalize(out)


def _var_node(left: np.ndarray, right: np.ndarray, v_a: np.ndarray) -> np.ndarray:
    # Pr[b] = left[v_a + b] * right[b]
    rho = left.shape[-1]
    idx = (v_a[..., None] + np.arange(rho)) % rho
    return _normalize(np.take_along_axis(left, idx, axis=-1) * right)


class _SC:
    """Recursive successive-cancellation decoder over a batch of frames.

    With ``genie`` set, decisions are replaced by the true symbols and the
    per-index hard errors and soft log-losses are accumulated instead.
    """

    def __init__(self, frozen_mask: np.ndarray, rho: int, genie: np.ndarray | None = None):
        self.frozen = frozen_mask
        self.rho = rho
        self.genie = genie
        n = frozen_mask.size
        self.errors = np.zeros(n, dtype=np.int64)
        self.loss = np.zeros(n)

    def run(self, L: np.ndarray, lo: int = 0) -> tuple[np.ndarray, np.ndarray]:
        n = L.shape[1]
        if n == 1:
            probs = L[:, 0, :]
            if self.genie is not None:
                truth = self.genie[:, lo]
                wrong = probs.argmax(-1) != truth
                self.errors[lo] += int(wrong.sum())
                p_true = np.take_along_axis(probs, truth[:, None], axis=-1)[:, 0]
                self.loss[lo] += float(-np.log(np.maximum(p_true, 1e-300)).sum())
                u = truth
            elif self.frozen[lo]:
                u = np.zeros(L.shape[0], dtype=np.int64)
            else:
                u = probs.argmax(-1).astype(np.int64)
            return u[:, None], u[:, None]
        h = n // 2
        left, right = L[:, :h], L[:, h:]
        u_a, v_a = self.run(_check_node(left, right), lo)
        u_b, v_b = self.run(_var_node(left, right, v_a), lo + h)
        x = np.concatenate([(v_a + v_b) % self.rho, v_b], axis=1)
        return np.concatenate([u_a, u_b], axis=1), x


def _channel_likelihoods(y: np.ndarray, rho: int, P: float) -> np.ndarray:
    """Pr[y | x] on the rho-ary symmetric channel, shape (frames, n, rho)."""
    L = np.full(y.shape + (rho,), P / (rho - 1))
    np.put_along_axis(L, y[..., None], 1.0 - P, axis=-1)
    return L


def polar_construct(
    rho: int,
    n: int,
    design_rate: float,
    k: int,
    mc_trials: int = 2000,
    seed: int = 0,
    batch: int = 500,
) -> CodeSpec:
    """Choose the ``n - k`` least reliable synthetic channels as frozen.

    Reliability is estimated by genie-aided SC decoding of uniformly random
    input words over ``mc_trials`` transmissions on the rho-ary symmetric
    channel of rate ``design_rate``.  Ranking is by hard error count, then by
    mean log-loss of the true symbol, then by index (lower is less reliable).
    """
    if k > n:
        raise ParameterError(f"k={k} exceeds n={n}")
    if n < 1 or n & (n - 1):
        raise ParameterError(f"polar length must be a power of two, got {n}")
    P = check_rate(rho, design_rate)
    rng = np.random.default_rng(seed)
    errors = np.zeros(n, dtype=np.int64)
    loss = np.zeros(n)
    if P > 0:
        done = 0
        while done < mc_trials:
            b = min(batch, mc_trials - done)
            # random inputs rather than all-zero so argmax ties do not fall on the truth
            u = rng.integers(0, rho, size=(b, n), dtype=np.int64)
            y = (polar_transform(u, rho) + sample_bernoulli(rho, P, (b, n), rng)) % rho
            sc = _SC(np.zeros(n, dtype=bool), rho, genie=u)
            sc.run(_channel_likelihoods(y, rho, P))
            errors += sc.errors
            loss += sc.loss
            done += b
    order = sorted(range(n), key=lambda i: (-errors[i], -loss[i], i))
    frozen = tuple(sorted(order[: n - k]))
    return CodeSpec(POLAR, rho, n, k, frozen=frozen, design_rate=P, seed=seed)


def polar_reliability_order(spec: CodeSpec) -> tuple[int, ...]:
    """Information indices of ``spec`` (most reliable channels)."""
    return spec.info


# --- generic interface -----------------------------------------------------


def _as_word(x, length: int, rho: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    if x.shape[-1:] != (length,):
        raise DimensionError(f"expected trailing length {length}, got shape {x.shape}")
    return x % rho


def encode(spec: CodeSpec, m) -> np.ndarray:
    m = _as_word(m, spec.k, spec.rho)
    if spec.family == REPETITION:
        return np.repeat(m, spec.repetition_factor, axis=-1)
    u = np.zeros(m.shape[:-1] + (spec.n,), dtype=np.int64)
    u[..., list(spec.info)] = m
    return polar_transform(u, spec.rho)


def decode(spec: CodeSpec, y) -> np.ndarray:
    return decode_with_margin(spec, y)[0]


def decode_with_margin(spec: CodeSpec, y) -> tuple[np.ndarray, np.ndarray | None]:
    """Decode ``y``; also return the minimum plurality margin for repetition codes.

    The margin is ``None`` for polar codes.
    """
    y = _as_word(y, spec.n, spec.rho)
    if spec.family == REPETITION:
        blocks = y.reshape(y.shape[:-1] + (spec.k, spec.repetition_factor))
        winner, margin = _plurality(blocks, spec.rho)
        return winner, margin.min(-1)
    single = y.ndim == 1
    Y = y[None] if single else y.reshape(-1, spec.n)
    # decode as if on the design channel; noiseless designs still need strictly positive likelihoods
    P_dec = spec.design_rate if spec.design_rate > 0 else min(1e-3, max_rate(spec.rho) / 2)
    mask = np.zeros(spec.n, dtype=bool)
    mask[list(spec.frozen)] = True
    u, _ = _SC(mask, spec.rho).run(_channel_likelihoods(Y, spec.rho, P_dec))
    m = u[:, list(spec.info)]
    if single:
        return m[0], None
    return m.reshape(y.shape[:-1] + (spec.k,)), None


def fer_estimate(
    spec: CodeSpec, P: float, trials: int, rng: np.random.Generator, batch: int = 500
) -> float:
    """Fraction of frames with ``decode(encode(m) + e) != m``, e ~ Bern(P)^n."""
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    P = check_rate(spec.rho, P)
    failures, done = 0, 0
    while done < trials:
        b = min(batch, trials - done)
        m = rng.integers(0, spec.rho, size=(b, spec.k), dtype=np.int64)
        e = sample_bernoulli(spec.rho, P, (b, spec.n), rng)
        m_hat = decode(spec, (encode(spec, m) + e) % spec.rho)
        failures += int(np.any(m_hat != m, axis=-1).sum())
        done += b
    return failures / trials
