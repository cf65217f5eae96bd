"""Simulated secure-aggregation sessions over a serializing in-process bus.

Parties are ``server``, ``user:<j>`` and either ``decryptor`` (trusted
single decryptor, ``M = 0``) or ``member:<l>`` (committee).  Every message
goes through :func:`wire_encode` and is decoded by the recipient, so the
byte counts in :class:`TranscriptStats` are what a network would carry.

Message flow of one session:

* setup: server sends CONFIG to every user and decryptor party; each user
  sends one KEY_SHARE per decryptor party to the server, which relays it.
  Decryptor parties answer with AGG_SHARE (committee) or AGG_KEY (trusted).
* every round: each user sends one CIPHERTEXT frame holding the ciphertexts
  for all CRT moduli; the server adds, decrypts and recombines.

Key material is generated once and reused for every round.
"""

from __future__ import annotations

import csv
import io
import json
import math
import struct
from collections import Counter, defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Sequence

import numpy as np

from . import coding, committee, kahe, ring
from .coding import CodeSpec
from .committee import MockPke, Share, SharingParams
from .errors import DecodeError, LpnAggError, ParameterError, ProtocolError, SessionError
from .kahe import Ciphertext, KaheParams, SecretKey
from .params import committee_size, modulus_cost
from .prob import pileup_n
from .ring import CrtBasis

SERVER = "server"
DECRYPTOR = "decryptor"

# domain tags for seed derivation
_D_SERVER, _D_KEY, _D_MASK, _D_NOISE, _D_PKE = 1, 2, 3, 4, 5


class MsgType(IntEnum):
    KEY_SHARE = 1
    CIPHERTEXT = 2
    AGG_SHARE = 3
    AGG_KEY = 4
    CONFIG = 5


HEADER = struct.Struct("<IB")
HEADER_SIZE = HEADER.size  # 5


@dataclass(frozen=True)
class Message:
    type: MsgType
    payload: bytes


def wire_encode(msg: Message) -> bytes:
    return HEADER.pack(len(msg.payload), int(msg.type)) + msg.payload


def wire_decode(frame: bytes) -> Message:
    """Exact inverse of :func:`wire_encode`; rejects truncated or trailing bytes."""
    if len(frame) < HEADER_SIZE:
        raise DecodeError("truncated frame header")
    length, tag = HEADER.unpack_from(frame)
    try:
        mtype = MsgType(tag)
    except ValueError:
        raise DecodeError(f"unknown message tag {tag}") from None
    if len(frame) != HEADER_SIZE + length:
        raise DecodeError(f"frame declares {length} payload bytes, carries {len(frame) - HEADER_SIZE}")
    return Message(mtype, bytes(frame[HEADER_SIZE:]))


# --- configuration ---------------------------------------------------------


def user(j: int) -> str:
    return f"user:{j}"


def member(l: int) -> str:
    return f"member:{l}"


@dataclass(frozen=True)
class ModulusSetup:
    kahe: KaheParams
    sharing: SharingParams | None

    @property
    def rho(self) -> int:
        return self.kahe.rho


@dataclass(frozen=True)
class ProtocolConfig:
    N: int
    z: int
    M: int
    levels: int
    k_C: int
    basis: CrtBasis
    moduli: tuple[ModulusSetup, ...]
    rounds: int = 1
    master_seed: int = 0
    collude: bool = False

    def __post_init__(self):
        if self.N < 1:
            raise ParameterError("need at least one user")
        if self.levels < 1 or self.k_C < 1 or self.rounds < 1:
            raise ParameterError("levels, k_C and rounds must be >= 1")
        if self.basis.q <= self.N * (self.levels - 1):
            raise ParameterError(
                f"q={self.basis.q} must exceed N(levels - 1) = {self.N * (self.levels - 1)}"
            )
        if len(self.moduli) != len(self.basis) or any(
            m.rho != r for m, r in zip(self.moduli, self.basis.moduli)
        ):
            raise ParameterError("per-modulus setups must follow the CRT basis order")
        for m in self.moduli:
            if m.rho <= self.z:
                raise ParameterError(f"modulus {m.rho} must exceed z={self.z}")
            if m.kahe.message_length != self.k_C:
                raise ParameterError(f"code on modulus {m.rho} must carry k_C={self.k_C} symbols")
            if (m.sharing is None) != (self.M == 0):
                raise ParameterError("sharing parameters are required exactly when M > 0")
            if m.sharing is not None:
                if m.sharing.M != committee_size(m.rho, self.M) or m.sharing.z != self.z:
                    raise ParameterError(f"committee on modulus {m.rho} has the wrong size")
                if m.sharing.k != m.kahe.k:
                    raise ParameterError("sharing key length must match the LPN dimension")
        if self.collude and self.z > self.N:
            raise ParameterError("cannot corrupt more than N users")

    @property
    def alpha(self) -> int:
        return len(self.basis)

    @property
    def decryptors(self) -> list[str]:
        return [DECRYPTOR] if self.M == 0 else [member(l) for l in range(self.M)]

    def members_for(self, t: int) -> list[int]:
        """Committee members (global indices) serving modulus ``t``: the first M_t."""
        sh = self.moduli[t].sharing
        return list(range(sh.M)) if sh is not None else []

    def seed(self, *path: int) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.master_seed, spawn_key=tuple(path))

    def rng(self, *path: int) -> np.random.Generator:
        return np.random.default_rng(self.seed(*path))


def build_config(
    N: int,
    z: int,
    M: int,
    levels: int,
    k_C: int,
    moduli: Sequence[int],
    p,
    k,
    *,
    rounds: int = 1,
    master_seed: int = 0,
    code: str = coding.REPETITION,
    r=None,
    target_fer: float = 1e-3,
    polar_n=None,
    collude: bool = False,
) -> ProtocolConfig:
    """Assemble a :class:`ProtocolConfig`.

    ``p``, ``k`` and ``r`` may be scalars or per-modulus sequences.  When the
    repetition factor ``r`` is omitted it is sized from the plurality bound so
    that each modulus reaches ``target_fer`` at the aggregate noise rate.
    Public seeds for A are drawn by the server from the master seed.
    """
    basis = CrtBasis(tuple(moduli))
    alpha = len(basis)

    def per(x):
        if x is None or np.ndim(x) == 0:
            return [x] * alpha
        if len(x) != alpha:
            raise ParameterError("per-modulus values must match the number of moduli")
        return list(x)

    ps, ks, rs, ns = per(p), per(k), per(r), per(polar_n)
    srv = np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(_D_SERVER,)))
    setups = []
    for t, rho in enumerate(basis.moduli):
        P = pileup_n(rho, float(ps[t]), N)
        if code == coding.REPETITION:
            rt = rs[t] if rs[t] is not None else coding.repetition_factor_for(P, k_C, target_fer)
            spec = coding.repetition_code(rho, k_C, int(rt))
        elif code == coding.POLAR:
            n = ns[t] or 1 << max(1, math.ceil(math.log2(2 * k_C)))
            spec = coding.polar_construct(rho, int(n), P, k_C, seed=master_seed)
        else:
            raise ParameterError(f"unknown code family {code!r}")
        kp = KaheParams(rho, int(ks[t]), spec.n, float(ps[t]), spec, a_seed=srv.bytes(32))
        sh = SharingParams(rho, committee_size(rho, M), z, int(ks[t])) if M > 0 else None
        setups.append(ModulusSetup(kp, sh))
    return ProtocolConfig(N, z, M, levels, k_C, basis, tuple(setups), rounds, master_seed, collude)


def config_payload(cfg: ProtocolConfig) -> bytes:
    """JSON body of the CONFIG message: everything a party needs besides its secrets."""
    body = {
        "N": cfg.N,
        "z": cfg.z,
        "M": cfg.M,
        "levels": cfg.levels,
        "k_C": cfg.k_C,
        "rounds": cfg.rounds,
        "moduli": [
            {
                "rho": m.rho,
                "k": m.kahe.k,
                "n": m.kahe.n,
                "p": m.kahe.p,
                "a_seed": m.kahe.a_seed.hex(),
                "evals": list(m.sharing.evals) if m.sharing else [],
                "code": m.kahe.code.to_config("code"),
            }
            for m in cfg.moduli
        ],
    }
    return json.dumps(body, sort_keys=True, separators=(",", ":")).encode()


def parse_config_payload(payload: bytes) -> dict:
    try:
        return json.loads(payload.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DecodeError(f"bad CONFIG payload: {exc}") from None


# --- transcript accounting -------------------------------------------------


@dataclass(frozen=True)
class FrameRecord:
    round: int
    sender: str
    recipient: str
    type: MsgType
    bytes: int
    payload_bytes: int  # ring-element data only (no lengths, points, envelopes, headers)


@dataclass
class TranscriptStats:
    records: list[FrameRecord] = field(default_factory=list)

    def sent(self, party: str) -> int:
        return sum(r.bytes for r in self.records if r.sender == party)

    def received(self, party: str) -> int:
        return sum(r.bytes for r in self.records if r.recipient == party)

    @property
    def parties(self) -> list[str]:
        return sorted({r.sender for r in self.records} | {r.recipient for r in self.records})

    def counts(self) -> Counter:
        return Counter(r.type.name for r in self.records)

    def receive_order(self, party: str = SERVER) -> list[tuple[int, str, str]]:
        return [(r.round, r.sender, r.type.name) for r in self.records if r.recipient == party]

    def decryptor_path_bytes(self) -> int:
        """Bytes of all key-sharing and key-aggregation traffic (both legs of relays)."""
        kinds = {MsgType.KEY_SHARE, MsgType.AGG_SHARE, MsgType.AGG_KEY}
        return sum(r.bytes for r in self.records if r.type in kinds)

    def decryptor_messages(self) -> int:
        return sum(1 for r in self.records if r.sender.startswith(("member:", DECRYPTOR)))

    def uplink(self, j: int, payload_only: bool = False) -> int:
        party = user(j)
        return sum(r.payload_bytes if payload_only else r.bytes for r in self.records if r.sender == party)

    def by_round(self) -> dict[int, int]:
        out: dict[int, int] = defaultdict(int)
        for r in self.records:
            out[r.round] += r.bytes
        return dict(out)

    def to_csv(self) -> str:
        """Rows (party, msg_type, bytes, round), one per party/type/round, sender side."""
        agg: dict[tuple, int] = defaultdict(int)
        for r in self.records:
            agg[(r.sender, r.type.name, r.round)] += r.bytes
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["party", "msg_type", "bytes", "round"])
        for (party, mtype, rnd), b in sorted(agg.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1])):
            w.writerow([party, mtype, b, rnd])
        return buf.getvalue()


class Bus:
    """FIFO delivery of serialized frames; every send is recorded."""

    def __init__(self):
        self.stats = TranscriptStats()
        self._queues: dict[str, list[tuple[str, bytes]]] = defaultdict(list)
        self.round = 0

    def send(self, sender: str, recipient: str, msg: Message, payload_bytes: int = 0) -> None:
        frame = wire_encode(msg)
        self.stats.records.append(
            FrameRecord(self.round, sender, recipient, msg.type, len(frame), payload_bytes)
        )
        self._queues[recipient].append((sender, frame))

    def receive(self, recipient: str) -> list[tuple[str, Message]]:
        frames, self._queues[recipient] = self._queues[recipient], []
        return [(s, wire_decode(f)) for s, f in frames]

    def pending(self) -> int:
        return sum(len(q) for q in self._queues.values())


# --- payload layouts -------------------------------------------------------

_U32 = struct.Struct("<I")


def _pack_vectors(vectors, rings) -> bytes:
    return b"".join(ring.encode_vector(v, F) for v, F in zip(vectors, rings))


def _unpack_vectors(buf: bytes, rings, offset: int = 0):
    out = []
    for F in rings:
        v, offset = ring.decode_vector(buf, F, offset)
        out.append(v)
    return out, offset


def _pack_shares(shares: Sequence[Share], rings) -> bytes:
    return b"".join(sh.to_bytes(F) for sh, F in zip(shares, rings))


def _unpack_shares(buf: bytes, rings, offset: int = 0):
    out = []
    for F in rings:
        sh, offset = Share.from_bytes(buf, F, offset)
        out.append(sh)
    return out, offset


def _expect_end(buf: bytes, offset: int) -> None:
    if offset != len(buf):
        raise DecodeError(f"{len(buf) - offset} trailing payload bytes")


# --- actors ----------------------------------------------------------------


@dataclass
class UserInput:
    u: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=np.int64)
        if self.u.ndim != 1:
            raise ParameterError("user input must be a 1-d integer vector")


def pad_blocks(u: np.ndarray, k_C: int, rounds: int) -> np.ndarray:
    """Zero-pad ``u`` to ``rounds * k_C`` entries and cut into blocks."""
    if u.size > k_C * rounds:
        raise ParameterError(f"input of length {u.size} exceeds rounds * k_C = {k_C * rounds}")
    padded = np.zeros(k_C * rounds, dtype=np.int64)
    padded[: u.size] = u
    return padded.reshape(rounds, k_C)


@dataclass
class UserState:
    index: int
    keys: list[SecretKey]
    blocks: np.ndarray
    noise_rng: np.random.Generator


def step_user_encrypt(state: UserState, cfg: ProtocolConfig, rnd: int) -> tuple[Message, list[Ciphertext], int]:
    """Encrypt block ``rnd`` under every modulus; all ciphertexts share one frame.

    Returns the message, the ciphertexts (harness use) and the number of
    ring-element payload bytes.
    """
    block = state.blocks[rnd]
    if block.shape != (cfg.k_C,):
        raise ParameterError(f"block must have length {cfg.k_C}")
    residues = ring.crt_decompose(block, cfg.basis)
    cts = [
        kahe.encrypt(residues[t], state.keys[t], m.kahe, state.noise_rng)
        for t, m in enumerate(cfg.moduli)
    ]
    rings = cfg.basis.rings
    payload = _U32.pack(rnd) + _pack_vectors([c.y for c in cts], rings)
    elems = sum(m.kahe.n * F.byte_width for m, F in zip(cfg.moduli, rings))
    return Message(MsgType.CIPHERTEXT, payload), cts, elems


def step_server_aggregate(cts_per_modulus, keys_per_modulus, cfg: ProtocolConfig):
    """Add and decrypt per modulus, then CRT-recombine.

    Returns the integer aggregate (object array) and the per-modulus decoded
    residue vectors.
    """
    if len(cts_per_modulus) != cfg.alpha or len(keys_per_modulus) != cfg.alpha:
        raise ProtocolError("need ciphertexts and a key for every modulus")
    decoded = []
    for t, m in enumerate(cfg.moduli):
        cts = cts_per_modulus[t]
        if len(cts) != cfg.N:
            raise ProtocolError(f"modulus {m.rho}: expected {cfg.N} ciphertexts, got {len(cts)}")
        total = kahe.add(cts, m.kahe)
        decoded.append(kahe.decrypt(total, keys_per_modulus[t], m.kahe))
    return ring.crt_recombine(tuple(decoded), cfg.basis), decoded


@dataclass
class CollusionView:
    """What the server and the first ``z`` users jointly see."""

    corrupted: list[int]
    keys: dict[int, list[np.ndarray]]
    inputs: dict[int, np.ndarray]
    ciphertexts: list[dict[int, list[np.ndarray]]]  # per round: user -> per-modulus y
    aggregate_keys: list[np.ndarray]
    public_seeds: list[bytes]


@dataclass
class SessionResult:
    aggregate: np.ndarray
    stats: TranscriptStats
    mismatches: list[list[int]]  # [round][modulus] wrong residues in the decoded aggregate
    expected: np.ndarray
    view: CollusionView | None = None

    def __iter__(self):
        yield self.aggregate
        yield self.stats

    @property
    def ok(self) -> bool:
        return all(c == 0 for row in self.mismatches for c in row)


def _decryptor_setup(bus: Bus, cfg: ProtocolConfig, pke: MockPke, pairs):
    """Steps 4-5: decrypt envelopes, aggregate keys or shares, answer the server."""
    rings = cfg.basis.rings
    for name in cfg.decryptors:
        got = bus.receive(name)
        cfg_msgs = [m for _, m in got if m.type == MsgType.CONFIG]
        if len(cfg_msgs) != 1:
            raise ProtocolError(f"{name}: expected exactly one CONFIG")
        info = parse_config_payload(cfg_msgs[0].payload)
        if cfg.M == 0:
            ts = list(range(cfg.alpha))
        else:
            l = int(name.split(":")[1])
            ts = [t for t in range(cfg.alpha) if l < len(info["moduli"][t]["evals"])]
        my_rings = [rings[t] for t in ts]
        collected: list[list] = [[] for _ in ts]
        for _, msg in got:
            if msg.type != MsgType.KEY_SHARE:
                continue
            body = pke.decrypt(msg.payload[4:], pairs[name].secret)
            if cfg.M == 0:
                vecs, off = _unpack_vectors(body, my_rings)
            else:
                vecs, off = _unpack_shares(body, my_rings)
            _expect_end(body, off)
            for i, v in enumerate(vecs):
                collected[i].append(v)
        if any(len(c) != cfg.N for c in collected):
            raise ProtocolError(f"{name}: missing key material from some users")
        if cfg.M == 0:
            agg = [ring.vec_sum(c, F) for c, F in zip(collected, my_rings)]
            payload = _pack_vectors(agg, my_rings)
            elems = sum(a.size * F.byte_width for a, F in zip(agg, my_rings))
            bus.send(name, SERVER, Message(MsgType.AGG_KEY, payload), elems)
        else:
            agg = [committee.aggregate_shares(c, cfg.moduli[t].sharing) for c, t in zip(collected, ts)]
            payload = _pack_shares(agg, my_rings)
            elems = sum(a.value.size * F.byte_width for a, F in zip(agg, my_rings))
            bus.send(name, SERVER, Message(MsgType.AGG_SHARE, payload), elems)


STEPS = {
    1: "key setup and sharing",
    2: "input encryption",
    3: "user-to-server transmission",
    4: "individual key recovery",
    5: "key aggregation",
    6: "aggregate input recovery",
}


@contextmanager
def _step(n: int):
    try:
        yield
    except SessionError:
        raise
    except (LpnAggError, ValueError, struct.error) as exc:
        raise SessionError(n, f"{STEPS[n]}: {exc}") from exc


def run_session(cfg: ProtocolConfig, inputs: Sequence, pke: MockPke | None = None) -> SessionResult:
    """Execute the full protocol; returns the aggregate (integers) and the transcript.

    ``inputs`` holds one length ``<= rounds * k_C`` vector (or :class:`UserInput`)
    per user with entries in ``[0, levels)``.  The result unpacks as
    ``aggregate, stats``; per-round per-modulus decode mismatches are kept on
    the result for test harnesses.
    """
    if len(inputs) != cfg.N:
        raise ParameterError(f"expected {cfg.N} inputs, got {len(inputs)}")
    us = [x.u if isinstance(x, UserInput) else np.asarray(x, dtype=np.int64) for x in inputs]
    for u in us:
        if u.size and (u.min() < 0 or u.max() >= cfg.levels):
            raise ParameterError(f"inputs must lie in [0, {cfg.levels})")
    blocks = [pad_blocks(u, cfg.k_C, cfg.rounds) for u in us]
    rings = cfg.basis.rings
    pke = pke or MockPke(cfg.rng(_D_PKE))
    bus = Bus()

    # setup: decryptor key pairs, CONFIG broadcast
    pairs = {name: pke.keygen() for name in cfg.decryptors}
    cfg_msg = Message(MsgType.CONFIG, config_payload(cfg))
    for j in range(cfg.N):
        bus.send(SERVER, user(j), cfg_msg)
    for name in cfg.decryptors:
        bus.send(SERVER, name, cfg_msg)

    # step 1: key generation and sharing, relayed by the server
    with _step(1):
        states = []
        for j in range(cfg.N):
            got = bus.receive(user(j))
            if [m.type for _, m in got] != [MsgType.CONFIG]:
                raise ProtocolError(f"user {j}: expected CONFIG")
            keys = [kahe.keygen(m.kahe, cfg.rng(_D_KEY, j, t)) for t, m in enumerate(cfg.moduli)]
            states.append(UserState(j, keys, blocks[j], cfg.rng(_D_NOISE, j)))
            for d, name in enumerate(cfg.decryptors):
                if cfg.M == 0:
                    body = _pack_vectors([k.s for k in keys], rings)
                    elems = sum(k.s.size * F.byte_width for k, F in zip(keys, rings))
                else:
                    parts = []
                    elems = 0
                    for t, m in enumerate(cfg.moduli):
                        if d in cfg.members_for(t):
                            shares = committee.share_key(keys[t], m.sharing, cfg.rng(_D_MASK, j, t))
                            parts.append(shares[d].to_bytes(rings[t]))
                            elems += shares[d].value.size * rings[t].byte_width
                    body = b"".join(parts)
                envelope = pke.encrypt(body, pairs[name].public)
                bus.send(user(j), SERVER, Message(MsgType.KEY_SHARE, _U32.pack(d) + envelope), elems)

    with _step(3):
        names = cfg.decryptors
        for sender, msg in bus.receive(SERVER):
            if msg.type != MsgType.KEY_SHARE:
                raise ProtocolError(f"server: unexpected {msg.type.name} during setup")
            (d,) = _U32.unpack_from(msg.payload)
            if d >= len(names):
                raise ProtocolError(f"server: share addressed to unknown party {d}")
            bus.send(SERVER, names[d], msg)

    with _step(4):
        _decryptor_setup(bus, cfg, pke, pairs)

    # server obtains the aggregate key per modulus
    with _step(5):
        replies = bus.receive(SERVER)
        if cfg.M == 0:
            if len(replies) != 1 or replies[0][1].type != MsgType.AGG_KEY:
                raise ProtocolError("server: expected one AGG_KEY")
            body = replies[0][1].payload
            vecs, off = _unpack_vectors(body, rings)
            _expect_end(body, off)
            agg_keys = [SecretKey(v) for v in vecs]
        else:
            per_t: list[list[Share]] = [[] for _ in range(cfg.alpha)]
            for sender, msg in replies:
                if msg.type != MsgType.AGG_SHARE:
                    raise ProtocolError(f"server: unexpected {msg.type.name} from {sender}")
                l = int(sender.split(":")[1])
                ts = [t for t in range(cfg.alpha) if l in cfg.members_for(t)]
                shares, off = _unpack_shares(msg.payload, [rings[t] for t in ts])
                _expect_end(msg.payload, off)
                for t, sh in zip(ts, shares):
                    per_t[t].append(sh)
            agg_keys = [committee.reconstruct(per_t[t], m.sharing) for t, m in enumerate(cfg.moduli)]

    corrupted = list(range(cfg.z)) if cfg.collude else []
    seen_cts: list[dict[int, list[np.ndarray]]] = []

    # rounds: steps 2, 3 and 6
    aggregate = np.zeros(cfg.rounds * cfg.k_C, dtype=object)
    expected = np.zeros(cfg.rounds * cfg.k_C, dtype=object)
    mismatches = []
    for rnd in range(cfg.rounds):
        bus.round = rnd + 1
        with _step(2):
            for st in states:
                msg, _, elems = step_user_encrypt(st, cfg, rnd)
                bus.send(user(st.index), SERVER, msg, elems)
        with _step(3):
            cts = [[None] * cfg.N for _ in range(cfg.alpha)]
            raw = {}
            for sender, msg in bus.receive(SERVER):
                if msg.type != MsgType.CIPHERTEXT:
                    raise ProtocolError(f"server: unexpected {msg.type.name} in round {rnd + 1}")
                j = int(sender.split(":")[1])
                (r_idx,) = _U32.unpack_from(msg.payload)
                if r_idx != rnd:
                    raise ProtocolError(f"server: ciphertext for round {r_idx + 1} during round {rnd + 1}")
                vecs, off = _unpack_vectors(msg.payload, rings, 4)
                _expect_end(msg.payload, off)
                raw[j] = vecs
                for t, v in enumerate(vecs):
                    cts[t][j] = Ciphertext(v)
            if any(c is None for row in cts for c in row):
                raise ProtocolError(f"server: missing ciphertexts in round {rnd + 1}")
            if cfg.collude:
                seen_cts.append(raw)
        with _step(6):
            out, decoded = step_server_aggregate(cts, agg_keys, cfg)
            true_sum = sum(b[rnd] for b in blocks)
            true_res = ring.crt_decompose(np.asarray(true_sum, dtype=object), cfg.basis)
            mismatches.append([int(np.count_nonzero(d != tr)) for d, tr in zip(decoded, true_res)])
        sl = slice(rnd * cfg.k_C, (rnd + 1) * cfg.k_C)
        aggregate[sl] = out
        expected[sl] = np.asarray(true_sum, dtype=object)

    if bus.pending():
        raise ProtocolError("undelivered messages at end of session")

    view = None
    if cfg.collude:
        view = CollusionView(
            corrupted=corrupted,
            keys={j: [k.s.copy() for k in states[j].keys] for j in corrupted},
            inputs={j: us[j].copy() for j in corrupted},
            ciphertexts=seen_cts,
            aggregate_keys=[k.s.copy() for k in agg_keys],
            public_seeds=[m.kahe.a_seed for m in cfg.moduli],
        )
    n_in = max((u.size for u in us), default=0)
    return SessionResult(aggregate[:n_in], bus.stats, mismatches, expected[:n_in], view)


def predicted_uplink_bits(cfg: ProtocolConfig) -> float:
    """Per-user cost formula (key sharing plus one round) on the executed parameters."""
    z = cfg.z if cfg.M else 0
    total = 0.0
    for m in cfg.moduli:
        M_t = m.sharing.M if m.sharing else 0
        total += modulus_cost(m.rho, m.kahe.k, m.kahe.code.rate, M_t, z, cfg.k_C)
    return total
