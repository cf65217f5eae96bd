"""Committee decryptor: packed (McEliece-Sarwate) sharing of KAHE keys.

A key of length ``k`` is zero-padded and cut into ``M - z`` parts of length
``chunk``.  Those parts are the low coefficients of a degree ``M - 1``
polynomial whose top ``z`` coefficients are uniform masks; member ``l``
receives the evaluation at its point ``beta_l``.  Summing the shares of all
users gives shares of the summed key, which the server interpolates.

Also defines the PKE interface used to transport shares, with an explicitly
insecure mock implementation for simulation.
"""

from __future__ import annotations

import hashlib
import hmac
import math
import secrets
import struct
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from . import ring
from .errors import InsufficientSharesError, ParameterError, PkeError, ProtocolError
from .kahe import SecretKey
from .ring import RingParams


def default_eval_points(M: int) -> tuple[int, ...]:
    return tuple(range(1, M + 1))


@dataclass(frozen=True)
class SharingParams:
    rho: int
    M: int
    z: int
    k: int
    evals: tuple[int, ...] = ()
    chunk: int = field(init=False)
    padding: int = field(init=False)

    def __post_init__(self):
        RingParams(self.rho)
        if self.k < 1:
            raise ParameterError("key length must be >= 1")
        if not (0 <= self.z < self.M - 1):
            raise ParameterError(f"need 0 <= z < M - 1, got z={self.z}, M={self.M}")
        if self.M > self.rho - 1:
            raise ParameterError(
                f"M={self.M} members need distinct nonzero points, but rho={self.rho}"
            )
        evals = tuple(int(b) % self.rho for b in (self.evals or default_eval_points(self.M)))
        if len(evals) != self.M or len(set(evals)) != self.M or 0 in evals:
            raise ParameterError("evaluation points must be M distinct nonzero residues")
        parts = self.M - self.z
        chunk = math.ceil(self.k / parts)
        object.__setattr__(self, "evals", evals)
        object.__setattr__(self, "chunk", chunk)
        object.__setattr__(self, "padding", chunk * parts - self.k)

    @property
    def ring(self) -> RingParams:
        return RingParams(self.rho)

    @property
    def parts(self) -> int:
        return self.M - self.z

    def vandermonde(self, points: Sequence[int] | None = None) -> np.ndarray:
        pts = self.evals if points is None else points
        return np.array(
            [[pow(int(b), i, self.rho) for i in range(self.M)] for b in pts], dtype=np.int64
        )


@dataclass(frozen=True, eq=False)
class Share:
    beta: int
    value: np.ndarray

    def __eq__(self, other):
        return (
            isinstance(other, Share)
            and self.beta == other.beta
            and np.array_equal(self.value, other.value)
        )

    def to_bytes(self, params: RingParams) -> bytes:
        return ring.encode_element(self.beta, params) + ring.encode_vector(self.value, params)

    @classmethod
    def from_bytes(cls, buf: bytes, params: RingParams, offset: int = 0) -> tuple["Share", int]:
        beta, off = ring.decode_element(buf, params, offset)
        value, off = ring.decode_vector(buf, params, off)
        return cls(beta, value), off


def coefficients(s, params: SharingParams, masks) -> np.ndarray:
    """Coefficient matrix (M, chunk): padded key parts on top of the masks."""
    s = np.asarray(s, dtype=np.int64)
    if s.shape != (params.k,):
        raise ParameterError(f"key must have length {params.k}")
    padded = np.concatenate([s, np.zeros(params.padding, dtype=np.int64)])
    masks = np.asarray(masks, dtype=np.int64).reshape(params.z, params.chunk)
    return np.vstack([padded.reshape(params.parts, params.chunk), masks])


def share_key(
    key: SecretKey | np.ndarray,
    params: SharingParams,
    rng: np.random.Generator | None = None,
    masks=None,
) -> list[Share]:
    """Shares of ``key`` for every committee member, in evaluation-point order."""
    s = key.s if isinstance(key, SecretKey) else key
    if masks is None:
        if rng is None:
            raise ParameterError("either rng or masks is required")
        masks = params.ring.uniform((params.z, params.chunk), rng)
    C = coefficients(s, params, masks)
    values = ring.mat_mul(params.vandermonde(), C, params.ring)
    return [Share(b, values[i]) for i, b in enumerate(params.evals)]


def aggregate_shares(shares: Sequence[Share], params: SharingParams) -> Share:
    """Sum of shares held by one member (one share per user)."""
    if not shares:
        raise ProtocolError("no shares to aggregate")
    beta = shares[0].beta
    if any(sh.beta != beta for sh in shares):
        raise ProtocolError("cannot aggregate shares at different evaluation points")
    return Share(beta, ring.vec_sum([sh.value for sh in shares], params.ring))


def reconstruct(shares: Sequence[Share], params: SharingParams) -> SecretKey:
    """Interpolate the shared polynomial and return the (un-padded) key."""
    betas = [sh.beta for sh in shares]
    if len(set(betas)) != len(betas):
        raise ProtocolError("duplicate evaluation point among shares")
    if set(betas) - set(params.evals):
        raise ProtocolError("share at an unknown evaluation point")
    if len(shares) < params.M:
        raise InsufficientSharesError(f"need {params.M} shares, got {len(shares)}")
    Vinv = ring.mat_inv(params.vandermonde(betas), params.ring)
    Y = np.vstack([sh.value for sh in shares])
    C = ring.mat_mul(Vinv, Y, params.ring)
    s = C[: params.parts].reshape(-1)[: params.k]
    return SecretKey(s)


# --- PKE transport ---------------------------------------------------------


@dataclass(frozen=True)
class PkeKeyPair:
    public: bytes
    secret: bytes


class Pke(Protocol):
    def keygen(self) -> PkeKeyPair: ...

    def encrypt(self, plaintext: bytes, public: bytes) -> bytes: ...

    def decrypt(self, ciphertext: bytes, secret: bytes) -> bytes: ...


class MockPke:
    """INSECURE stand-in for a post-quantum PKE: plaintext travels in the clear.

    The envelope is ``MAGIC | recipient tag (16) | length (4) | plaintext | mac (16)``.
    Decryption checks that the tag belongs to the presented secret key and
    that the MAC matches, so misrouted or corrupted envelopes are rejected.
    It provides no confidentiality whatsoever.
    """

    MAGIC = b"MPK1"
    OVERHEAD = 4 + 16 + 4 + 16

    def __init__(self, rng: np.random.Generator | None = None):
        self._rng = rng

    @staticmethod
    def _public_of(secret: bytes) -> bytes:
        return hashlib.sha256(b"mockpke/pk" + secret).digest()

    def keygen(self) -> PkeKeyPair:
        if self._rng is None:
            sk = secrets.token_bytes(32)
        else:
            sk = self._rng.bytes(32)
        return PkeKeyPair(self._public_of(sk), sk)

    def encrypt(self, plaintext: bytes, public: bytes) -> bytes:
        tag = public[:16]
        mac = hmac.new(public, plaintext, hashlib.sha256).digest()[:16]
        return self.MAGIC + tag + struct.pack("<I", len(plaintext)) + plaintext + mac

    def decrypt(self, ciphertext: bytes, secret: bytes) -> bytes:
        if len(ciphertext) < self.OVERHEAD or ciphertext[:4] != self.MAGIC:
            raise PkeError("malformed envelope")
        public = self._public_of(secret)
        if not hmac.compare_digest(ciphertext[4:20], public[:16]):
            raise PkeError("envelope is addressed to a different key")
        (length,) = struct.unpack_from("<I", ciphertext, 20)
        if len(ciphertext) != self.OVERHEAD + length:
            raise PkeError("envelope length mismatch")
        body = ciphertext[24 : 24 + length]
        mac = hmac.new(public, body, hashlib.sha256).digest()[:16]
        if not hmac.compare_digest(mac, ciphertext[24 + length :]):
            raise PkeError("envelope MAC mismatch")
        return body
