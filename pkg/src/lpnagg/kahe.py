"""LPN-based key- and message-additive homomorphic encryption.

Encryption of ``m`` under ``s`` is ``y = s A + e + C.enc(m)`` with
``e ~ Bern(p)^n``.  Summing ciphertexts sums both the keys and the messages,
so the aggregate decrypts under the aggregate key as long as the code
corrects the piled-up noise.
"""

from __future__ import annotations

import hashlib
import secrets
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from . import coding, ring
from .coding import CodeSpec
from .errors import DimensionError, ParameterError
from .prob import max_rate, pileup_n, sample_bernoulli
from .ring import RingParams


@dataclass(frozen=True)
class KaheParams:
    rho: int
    k: int
    n: int
    p: float
    code: CodeSpec
    a_seed: bytes = b"\x00" * 32

    def __post_init__(self):
        RingParams(self.rho)
        if self.k < 1:
            raise ParameterError(f"LPN dimension must be >= 1, got {self.k}")
        if self.code.n != self.n or self.code.rho != self.rho:
            raise ParameterError("code length and alphabet must match (n, rho)")
        if not 0 <= self.p <= max_rate(self.rho):
            raise ParameterError(f"noise rate {self.p} outside [0, {max_rate(self.rho)}]")
        if len(self.a_seed) != 32:
            raise ParameterError("a_seed must be 32 bytes")

    @property
    def ring(self) -> RingParams:
        return RingParams(self.rho)

    @property
    def message_length(self) -> int:
        return self.code.k

    def aggregate_rate(self, users: int) -> float:
        """Noise rate of the sum of ``users`` independent ciphertext errors."""
        return pileup_n(self.rho, self.p, users)

    @cached_property
    def A(self) -> np.ndarray:
        return derive_matrix(self)


def new_seed() -> bytes:
    return secrets.token_bytes(32)


def expand_uniform(seed: bytes, rho: int, count: int, domain: bytes = b"lpnagg/A") -> np.ndarray:
    """``count`` uniform residues mod ``rho`` from SHAKE-256 with rejection sampling.

    Each candidate is the little-endian integer of ``byte_width`` output bytes,
    masked to the bit length of ``rho - 1``; candidates >= rho are discarded.
    """
    bits = (rho - 1).bit_length()
    width = max(1, (bits + 7) // 8)
    mask = (1 << bits) - 1
    xof = hashlib.shake_256(domain + rho.to_bytes(8, "little") + seed)
    accept = rho / (mask + 1)
    want = int(count / accept * 1.05) + 64
    while True:
        raw = np.frombuffer(xof.digest(want * width), dtype=np.uint8).reshape(want, width)
        padded = np.zeros((want, 8), dtype=np.uint8)
        padded[:, :width] = raw
        cand = padded.view("<u8").reshape(want) & np.uint64(mask)
        good = cand[cand < rho]
        if good.size >= count:
            return good[:count].astype(np.int64)
        # shake output is prefix-stable, so asking for more extends the same stream
        want *= 2


def derive_matrix(params: KaheParams) -> np.ndarray:
    """The public k x n matrix A, deterministic in (a_seed, rho, k, n)."""
    domain = b"lpnagg/A" + params.k.to_bytes(8, "little") + params.n.to_bytes(8, "little")
    A = expand_uniform(params.a_seed, params.rho, params.k * params.n, domain).reshape(
        params.k, params.n
    )
    A.setflags(write=False)
    return A


@dataclass(frozen=True, eq=False)
class SecretKey:
    s: np.ndarray

    def __eq__(self, other):
        return isinstance(other, SecretKey) and np.array_equal(self.s, other.s)

    def to_bytes(self, params: RingParams) -> bytes:
        return ring.encode_vector(self.s, params)

    @classmethod
    def from_bytes(cls, buf: bytes, params: RingParams) -> "SecretKey":
        s, _ = ring.decode_vector(buf, params)
        return cls(s)


@dataclass(frozen=True, eq=False)
class Ciphertext:
    y: np.ndarray

    def __eq__(self, other):
        return isinstance(other, Ciphertext) and np.array_equal(self.y, other.y)

    def to_bytes(self, params: RingParams) -> bytes:
        return ring.encode_vector(self.y, params)

    @classmethod
    def from_bytes(cls, buf: bytes, params: RingParams) -> "Ciphertext":
        y, _ = ring.decode_vector(buf, params)
        return cls(y)


def keygen(params: KaheParams, rng: np.random.Generator) -> SecretKey:
    return SecretKey(params.ring.uniform(params.k, rng))


def encrypt(
    m,
    key: SecretKey,
    params: KaheParams,
    rng: np.random.Generator | None = None,
    noise=None,
) -> Ciphertext:
    """``s A + e + C.enc(m)``.  Pass ``noise`` to fix ``e`` instead of sampling it."""
    F = params.ring
    m = np.asarray(m, dtype=np.int64)
    if m.shape != (params.code.k,):
        raise DimensionError(f"message must have length {params.code.k}, got {m.shape}")
    if noise is None:
        if rng is None:
            raise ParameterError("either rng or noise is required")
        noise = sample_bernoulli(params.rho, params.p, params.n, rng)
    noise = F.vector(noise)
    if noise.shape != (params.n,):
        raise DimensionError(f"noise must have length {params.n}")
    y = ring.mat_vec(key.s, params.A, F)
    y = (y + noise + coding.encode(params.code, m)) % params.rho
    return Ciphertext(y)


def add(ciphertexts: Sequence[Ciphertext], params: KaheParams) -> Ciphertext:
    if not ciphertexts:
        raise ParameterError("cannot add an empty list of ciphertexts")
    return Ciphertext(ring.vec_sum([c.y for c in ciphertexts], params.ring))


def add_keys(keys: Sequence[SecretKey], params: KaheParams) -> SecretKey:
    return SecretKey(ring.vec_sum([k.s for k in keys], params.ring))


def residual(ct: Ciphertext, key: SecretKey, params: KaheParams) -> np.ndarray:
    """``y - s A``: the noisy codeword the decoder sees."""
    return ring.vec_sub(ct.y, ring.mat_vec(key.s, params.A, params.ring), params.ring)


def decrypt(ct: Ciphertext, key: SecretKey, params: KaheParams) -> np.ndarray:
    return coding.decode(params.code, residual(ct, key, params))


def decrypt_with_margin(ct: Ciphertext, key: SecretKey, params: KaheParams):
    """Decrypt and also return the decoder's confidence (repetition: minimum vote margin)."""
    return coding.decode_with_margin(params.code, residual(ct, key, params))
