"""Exact arithmetic over prime fields and CRT decomposition over Z_q.

Vectors and matrices are plain ``numpy.int64`` arrays holding canonical
residues in ``[0, rho)``.  Every operation reduces explicitly; no floating
point is involved.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DecodeError, DimensionError, ParameterError, RangeError

# moduli are kept below 2**31 so that a product of two residues fits in int64
MAX_MODULUS = 2**31

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for all n < 3.3e24."""
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def primes_between(lo: int, hi: int) -> list[int]:
    """All primes p with lo < p < hi."""
    if hi <= 2:
        return []
    sieve = np.ones(hi, dtype=bool)
    sieve[:2] = False
    for i in range(2, math.isqrt(hi - 1) + 1):
        if sieve[i]:
            sieve[i * i :: i] = False
    return [int(p) for p in np.flatnonzero(sieve) if p > lo]


@dataclass(frozen=True)
class RingParams:
    """A prime field F_rho."""

    modulus: int

    def __post_init__(self):
        rho = self.modulus
        if not isinstance(rho, (int, np.integer)) or rho < 2:
            raise ParameterError(f"modulus must be an integer >= 2, got {rho!r}")
        if rho >= MAX_MODULUS:
            raise ParameterError(f"modulus {rho} exceeds the supported bound 2**31")
        if not is_prime(int(rho)):
            raise ParameterError(f"modulus {rho} is not prime")
        object.__setattr__(self, "modulus", int(rho))

    @property
    def rho(self) -> int:
        return self.modulus

    @cached_property
    def byte_width(self) -> int:
        return max(1, ((self.modulus - 1).bit_length() + 7) // 8)

    @cached_property
    def bits(self) -> float:
        return math.log2(self.modulus)

    def vector(self, values) -> np.ndarray:
        """Validate ``values`` as an FVec and return it as an int64 array."""
        v = np.asarray(values, dtype=np.int64)
        if v.ndim != 1:
            raise DimensionError(f"expected a 1-D vector, got shape {v.shape}")
        self.check(v)
        return v

    def matrix(self, values) -> np.ndarray:
        m = np.asarray(values, dtype=np.int64)
        if m.ndim != 2:
            raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
        self.check(m)
        return m

    def check(self, arr: np.ndarray) -> None:
        if arr.size and (arr.min() < 0 or arr.max() >= self.modulus):
            raise RangeError(f"entries must lie in [0, {self.modulus})")

    def reduce(self, values) -> np.ndarray:
        return np.mod(np.asarray(values, dtype=np.int64), self.modulus)

    def zeros(self, n: int) -> np.ndarray:
        return np.zeros(n, dtype=np.int64)

    def uniform(self, shape, rng: np.random.Generator) -> np.ndarray:
        return rng.integers(0, self.modulus, size=shape, dtype=np.int64)

    def inv(self, a: int) -> int:
        a = int(a) % self.modulus
        if a == 0:
            raise ZeroDivisionError("0 has no inverse")
        return pow(a, -1, self.modulus)


def _same_length(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")


def vec_add(a, b, params: RingParams) -> np.ndarray:
    a, b = np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)
    _same_length(a, b)
    return (a + b) % params.modulus


def vec_sub(a, b, params: RingParams) -> np.ndarray:
    a, b = np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)
    _same_length(a, b)
    return (a - b) % params.modulus


def vec_neg(a, params: RingParams) -> np.ndarray:
    return (-np.asarray(a, dtype=np.int64)) % params.modulus


def scalar_mul(c: int, a, params: RingParams) -> np.ndarray:
    return (int(c) % params.modulus) * np.asarray(a, dtype=np.int64) % params.modulus


def vec_sum(vectors: Sequence, params: RingParams) -> np.ndarray:
    """Componentwise sum of a nonempty sequence of equal-length vectors."""
    if len(vectors) == 0:
        raise DimensionError("cannot sum an empty list of vectors")
    acc = np.asarray(vectors[0], dtype=np.int64).copy()
    for v in vectors[1:]:
        v = np.asarray(v, dtype=np.int64)
        _same_length(acc, v)
        acc += v
        acc %= params.modulus
    return acc


def mat_vec(s, A, params: RingParams) -> np.ndarray:
    """Row-vector times matrix, ``s @ A mod rho`` for s of length k and A of shape (k, n)."""
    s = np.asarray(s, dtype=np.int64)
    A = np.asarray(A, dtype=np.int64)
    if s.ndim != 1 or A.ndim != 2 or A.shape[0] != s.shape[0]:
        raise DimensionError(f"cannot multiply {s.shape} by {A.shape}")
    rho = params.modulus
    # rows per partial sum so that accumulation never overflows int64
    step = max(1, (2**63 - 1) // max(1, (rho - 1) ** 2) - 1)
    out = np.zeros(A.shape[1], dtype=np.int64)
    for lo in range(0, s.shape[0], step):
        out += s[lo : lo + step] @ A[lo : lo + step] % rho
        out %= rho
    return out


def mat_mul(A, B, params: RingParams) -> np.ndarray:
    """Matrix product ``A @ B mod rho`` with overflow-safe accumulation."""
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0]:
        raise DimensionError(f"cannot multiply {A.shape} by {B.shape}")
    rho = params.modulus
    step = max(1, (2**63 - 1) // max(1, (rho - 1) ** 2) - 1)
    out = np.zeros((A.shape[0], B.shape[1]), dtype=np.int64)
    for lo in range(0, A.shape[1], step):
        out += A[:, lo : lo + step] @ B[lo : lo + step] % rho
        out %= rho
    return out


def mat_inv(A, params: RingParams) -> np.ndarray:
    """Inverse of a square matrix over F_rho by Gauss-Jordan elimination."""
    rho = params.modulus
    A = np.asarray(A, dtype=np.int64)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError(f"expected a square matrix, got {A.shape}")
    aug = [[int(x) % rho for x in row] + [int(i == j) for j in range(n)] for i, row in enumerate(A)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col]), None)
        if pivot is None:
            raise ParameterError("matrix is singular")
        aug[col], aug[pivot] = aug[pivot], aug[col]
        inv = pow(aug[col][col], -1, rho)
        aug[col] = [x * inv % rho for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [(x - f * y) % rho for x, y in zip(aug[r], aug[col])]
    return np.array([row[n:] for row in aug], dtype=np.int64)


# --- serialization ---------------------------------------------------------


def encode_element(x: int, params: RingParams) -> bytes:
    x = int(x)
    if not 0 <= x < params.modulus:
        raise RangeError(f"{x} is not a residue mod {params.modulus}")
    return x.to_bytes(params.byte_width, "little")


def decode_element(buf: bytes, params: RingParams, offset: int = 0) -> tuple[int, int]:
    end = offset + params.byte_width
    if end > len(buf):
        raise DecodeError("truncated element")
    x = int.from_bytes(buf[offset:end], "little")
    if x >= params.modulus:
        raise DecodeError(f"element {x} out of range for modulus {params.modulus}")
    return x, end


def encode_vector(v, params: RingParams) -> bytes:
    v = params.vector(v)
    bw = params.byte_width
    body = v.astype("<u8").view(np.uint8).reshape(-1, 8)[:, :bw].tobytes()
    return struct.pack("<Q", v.shape[0]) + body


def decode_vector(buf: bytes, params: RingParams, offset: int = 0) -> tuple[np.ndarray, int]:
    if offset + 8 > len(buf):
        raise DecodeError("truncated vector length")
    (n,) = struct.unpack_from("<Q", buf, offset)
    bw = params.byte_width
    start = offset + 8
    end = start + n * bw
    if end > len(buf):
        raise DecodeError(f"truncated vector: need {n * bw} bytes, have {len(buf) - start}")
    raw = np.frombuffer(buf, dtype=np.uint8, count=n * bw, offset=start).reshape(n, bw)
    padded = np.zeros((n, 8), dtype=np.uint8)
    padded[:, :bw] = raw
    v = padded.view("<u8").reshape(n).astype(np.int64)
    if n and v.max() >= params.modulus:
        raise DecodeError("vector element out of range")
    return v, end


# --- CRT -------------------------------------------------------------------


@dataclass(frozen=True)
class CrtBasis:
    """Pairwise-coprime prime moduli rho_1 .. rho_alpha with product q."""

    moduli: tuple[int, ...]

    def __post_init__(self):
        moduli = tuple(int(m) for m in self.moduli)
        if not moduli:
            raise ParameterError("a CRT basis needs at least one modulus")
        for m in moduli:
            RingParams(m)
        for i in range(len(moduli)):
            for j in range(i + 1, len(moduli)):
                if math.gcd(moduli[i], moduli[j]) != 1:
                    raise ParameterError(f"moduli {moduli[i]} and {moduli[j]} are not coprime")
        object.__setattr__(self, "moduli", moduli)

    @cached_property
    def q(self) -> int:
        return math.prod(self.moduli)

    @cached_property
    def rings(self) -> tuple[RingParams, ...]:
        return tuple(RingParams(m) for m in self.moduli)

    @cached_property
    def _coefficients(self) -> tuple[int, ...]:
        q = self.q
        return tuple((q // m) * pow(q // m, -1, m) % q for m in self.moduli)

    def __len__(self):
        return len(self.moduli)


def crt_decompose(x, basis: CrtBasis):
    """Residues of ``x`` modulo each basis element.

    ``x`` may be a Python int (returns a tuple of ints) or an integer array
    (returns a tuple of int64 arrays, one per modulus).
    """
    if np.ndim(x) == 0:
        x = int(x)
        if not 0 <= x < basis.q:
            raise RangeError(f"{x} not in [0, {basis.q})")
        return tuple(x % m for m in basis.moduli)
    arr = np.asarray(x, dtype=object)
    if arr.size and (min(arr) < 0 or max(arr) >= basis.q):
        raise RangeError(f"values must lie in [0, {basis.q})")
    return tuple((arr % m).astype(np.int64) for m in basis.moduli)


def crt_recombine(residues, basis: CrtBasis):
    """Inverse of :func:`crt_decompose`."""
    if len(residues) != len(basis):
        raise DimensionError(f"expected {len(basis)} residues, got {len(residues)}")
    scalar = all(np.ndim(r) == 0 for r in residues)
    parts = []
    for r, m in zip(residues, basis.moduli):
        r = np.asarray(r, dtype=object) if not scalar else int(r)
        if scalar:
            if not 0 <= r < m:
                raise RangeError(f"residue {r} not in [0, {m})")
        elif r.size and (min(r) < 0 or max(r) >= m):
            raise RangeError(f"residues must lie in [0, {m})")
        parts.append(r)
    q = basis.q
    acc = 0
    for r, c in zip(parts, basis._coefficients):
        acc = acc + r * c
    acc = acc % q
    if scalar:
        return int(acc)
    return np.asarray(acc, dtype=object)
