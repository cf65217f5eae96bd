import itertools
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpnagg import committee, ring
from lpnagg.committee import MockPke, Share, SharingParams
from lpnagg.errors import InsufficientSharesError, ParameterError, PkeError, ProtocolError


def poly_eval(coeffs, x, rho):
    return sum(c * pow(x, i, rho) for i, c in enumerate(coeffs)) % rho


def test_hand_example():
    sp = SharingParams(7, 3, 1, 2)
    shares = committee.share_key(np.array([4, 2]), sp, masks=[[5]])
    assert [s.beta for s in shares] == [1, 2, 3]
    assert [int(s.value[0]) for s in shares] == [4, 0, 6]
    assert [poly_eval([4, 2, 5], b, 7) for b in (1, 2, 3)] == [4, 0, 6]
    assert list(committee.reconstruct(shares, sp).s) == [4, 2]


def test_params_validation():
    with pytest.raises(ParameterError):
        SharingParams(7, 3, 2, 4)  # z must be < M - 1
    with pytest.raises(ParameterError):
        SharingParams(5, 5, 1, 4)  # M > rho - 1 nonzero points
    with pytest.raises(ParameterError):
        SharingParams(7, 3, 1, 4, evals=(1, 1, 2))
    with pytest.raises(ParameterError):
        SharingParams(7, 3, 1, 4, evals=(0, 1, 2))
    sp = SharingParams(11, 5, 2, 10)
    assert sp.chunk == 4 and sp.padding == 2 and sp.evals == (1, 2, 3, 4, 5)


def test_zero_key_zero_masks():
    sp = SharingParams(11, 4, 1, 6)
    shares = committee.share_key(np.zeros(6, dtype=np.int64), sp, masks=np.zeros((1, 2)))
    assert all(not s.value.any() for s in shares)
    assert not committee.reconstruct(shares, sp).s.any()


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from([7, 11, 13, 251]),
    st.integers(3, 6),
    st.integers(0, 4),
    st.integers(1, 30),
    st.integers(1, 10),
    st.integers(0, 2**32),
)
def test_sum_of_shares_reconstructs_sum_of_keys(rho, M, z, k, N, seed):
    if z >= M - 1 or M > rho - 1:
        return
    sp = SharingParams(rho, M, z, k)
    rng = np.random.default_rng(seed)
    keys = [sp.ring.uniform(k, rng) for _ in range(N)]
    per_user = [committee.share_key(s, sp, rng) for s in keys]
    agg = [committee.aggregate_shares([u[l] for u in per_user], sp) for l in range(M)]
    order = rng.permutation(M)
    assert np.array_equal(committee.reconstruct([agg[i] for i in order], sp).s, sum(keys) % rho)


def test_linearity_with_matched_masks():
    sp = SharingParams(13, 5, 2, 7)
    rng = np.random.default_rng(0)
    s1, s2 = sp.ring.uniform(7, rng), sp.ring.uniform(7, rng)
    m1, m2 = sp.ring.uniform((2, sp.chunk), rng), sp.ring.uniform((2, sp.chunk), rng)
    a = committee.share_key(s1, sp, masks=m1)
    b = committee.share_key(s2, sp, masks=m2)
    c = committee.share_key((s1 + s2) % 13, sp, masks=(m1 + m2) % 13)
    for x, y, w in zip(a, b, c):
        assert np.array_equal((x.value + y.value) % 13, w.value)


def test_aggregate_errors():
    sp = SharingParams(7, 3, 1, 2)
    with pytest.raises(ProtocolError):
        committee.aggregate_shares([], sp)
    with pytest.raises(ProtocolError):
        committee.aggregate_shares([Share(1, np.zeros(1)), Share(2, np.zeros(1))], sp)
    s = Share(2, np.array([3]))
    assert committee.aggregate_shares([s], sp) == s


def test_reconstruct_errors():
    sp = SharingParams(7, 3, 1, 2)
    shares = committee.share_key(np.array([1, 2]), sp, np.random.default_rng(0))
    with pytest.raises(InsufficientSharesError):
        committee.reconstruct(shares[:2], sp)
    with pytest.raises(ProtocolError):
        committee.reconstruct([shares[0], shares[0], shares[1]], sp)
    with pytest.raises(ProtocolError):
        committee.reconstruct([shares[0], shares[1], Share(5, shares[2].value)], sp)


@pytest.mark.parametrize(
    "rho,M,z", [(r, M, z) for r in (5, 7) for M in (3, 4) for z in (1, 2) if z < M - 1 and M <= r - 1]
)
def test_privacy_exhaustive(rho, M, z):
    """Any z shares are uniform on F^z whatever the secret, over all mask tuples."""
    k = M - z  # one symbol per part
    sp = SharingParams(rho, M, z, k)
    secrets = [np.zeros(k, dtype=np.int64), np.arange(1, k + 1) % rho]
    for subset in itertools.combinations(range(M), z):
        dists = []
        for s in secrets:
            cnt = Counter()
            for masks in itertools.product(range(rho), repeat=z):
                sh = committee.share_key(s, sp, masks=np.array(masks).reshape(z, 1))
                cnt[tuple(int(sh[i].value[0]) for i in subset)] += 1
            dists.append(cnt)
        assert dists[0] == dists[1]
        assert len(dists[0]) == rho**z and set(dists[0].values()) == {1}


def test_share_serialization():
    F = ring.RingParams(251)
    sh = Share(7, np.array([0, 250, 3]))
    buf = sh.to_bytes(F)
    assert len(buf) == 1 + 8 + 3
    back, off = Share.from_bytes(buf + b"tail", F)
    assert back == sh and off == len(buf)


def test_mock_pke():
    pke = MockPke(np.random.default_rng(0))
    a, b = pke.keygen(), pke.keygen()
    rng = np.random.default_rng(1)
    for size in (0, 1, 100):
        msg = rng.bytes(size)
        env = pke.encrypt(msg, a.public)
        assert len(env) == size + MockPke.OVERHEAD
        assert pke.decrypt(env, a.secret) == msg
    env = pke.encrypt(b"secret share", a.public)
    with pytest.raises(PkeError):
        pke.decrypt(env, b.secret)
    with pytest.raises(PkeError):
        pke.decrypt(env[:-1], a.secret)
    tampered = bytearray(env)
    tampered[30] ^= 1
    with pytest.raises(PkeError):
        pke.decrypt(bytes(tampered), a.secret)
    with pytest.raises(PkeError):
        pke.decrypt(b"XXXX" + env[4:], a.secret)
    assert len(MockPke().keygen().secret) == 32
