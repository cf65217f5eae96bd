import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpnagg import prob
from lpnagg.errors import ConditioningError, InfeasibleError, ParameterError
from lpnagg.params import tau_reduction
from lpnagg.prob import Pmf


def brute_sum_law(rho, rates):
    """Law of a sum of independent Bernoullis by enumerating every outcome tuple."""
    pmfs = [prob.bern_pmf(rho, p).probs for p in rates]
    out = np.zeros(rho)
    for xs in itertools.product(range(rho), repeat=len(rates)):
        out[sum(xs) % rho] += math.prod(pm[x] for pm, x in zip(pmfs, xs))
    return out


def test_bern_pmf_examples():
    assert np.allclose(prob.bern_pmf(3, 0.3).probs, [0.7, 0.15, 0.15], atol=1e-15)
    assert prob.bern_pmf(5, 0).allclose(Pmf.point(5))
    assert prob.bern_pmf(7, 6 / 7).allclose(Pmf.uniform(7))
    with pytest.raises(ParameterError):
        prob.bern_pmf(3, 0.7)
    with pytest.raises(ParameterError):
        prob.bern_pmf(3, -0.1)


def test_pmf_validation():
    with pytest.raises(ParameterError):
        Pmf([0.5, 0.6])
    with pytest.raises(ParameterError):
        Pmf([1.2, -0.2])


def test_pileup_examples():
    assert prob.pileup(2, [0.25, 0.25]) == pytest.approx(0.375, abs=1e-15)
    assert prob.pileup(5, [0.13]) == pytest.approx(0.13, abs=1e-15)
    assert prob.pileup(3, [0.1, 2 / 3, 0.2]) == pytest.approx(2 / 3, abs=1e-15)
    with pytest.raises(ParameterError):
        prob.pileup(3, [])
    # exact rational evaluation of the closed form for rho=3
    c = Fraction(2, 3)
    rates = [Fraction(1, 10), Fraction(1, 5)]
    exact = c - c * math.prod(1 - p / c for p in rates)
    assert prob.pileup(3, [0.1, 0.2]) == pytest.approx(float(exact), abs=1e-15)


@pytest.mark.parametrize("rho", [2, 3, 5, 7])
def test_pileup_matches_enumeration(rho):
    rng = np.random.default_rng(rho)
    for _ in range(30):
        m = int(rng.integers(1, 5))
        rates = rng.uniform(0, prob.max_rate(rho), m)
        law = brute_sum_law(rho, rates)
        assert abs((1 - law[0]) - prob.pileup(rho, rates)) <= 1e-12
        # the sum of Bernoullis is again Bernoulli
        assert np.max(np.abs(law - prob.bern_pmf(rho, prob.pileup(rho, rates)).probs)) <= 1e-12


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from([2, 3, 5, 7, 11]),
    st.lists(st.floats(0, 1), min_size=1, max_size=5),
    st.randoms(use_true_random=False),
)
def test_pileup_commutative_associative(rho, us, rnd):
    rates = [u * prob.max_rate(rho) for u in us]
    shuffled = rates[:]
    rnd.shuffle(shuffled)
    assert prob.pileup(rho, rates) == pytest.approx(prob.pileup(rho, shuffled), abs=1e-12)
    split = len(rates) // 2
    if split:
        nested = prob.pileup(rho, [prob.pileup(rho, rates[:split]), prob.pileup(rho, rates[split:])])
        assert nested == pytest.approx(prob.pileup(rho, rates), abs=1e-12)


def test_pileup_n_matches_pileup():
    assert prob.pileup_n(7, 0.05, 0) == 0
    assert prob.pileup_n(7, 0.05, 4) == pytest.approx(prob.pileup(7, [0.05] * 4), abs=1e-15)


def test_convolve_examples():
    b = prob.bern_pmf(5, 0.2)
    assert prob.convolve(Pmf.point(5), b).allclose(b)
    assert prob.convolve(Pmf.uniform(5), b).allclose(Pmf.uniform(5))
    for rho in (2, 3, 5, 7):
        c = prob.convolve(prob.bern_pmf(rho, 0.1), prob.bern_pmf(rho, 0.3))
        assert c.allclose(prob.bern_pmf(rho, prob.pileup(rho, [0.1, 0.3])))
    with pytest.raises(ParameterError):
        prob.convolve(Pmf.point(3), Pmf.point(5))


def test_qary_entropy():
    assert prob.qary_entropy(5, 0) == 0
    for rho in (2, 3, 7, 11):
        assert prob.qary_entropy(rho, prob.max_rate(rho)) == pytest.approx(1.0, abs=1e-12)
    assert prob.qary_entropy(2, 0.11) == pytest.approx(0.49992, abs=1e-4)
    with pytest.raises(ParameterError):
        prob.qary_entropy(2, 0.6)


@pytest.mark.parametrize("rho", [2, 3, 5, 13])
def test_qary_entropy_concave(rho):
    xs = np.linspace(1e-4, prob.max_rate(rho) - 1e-4, 200)
    h = np.array([prob.qary_entropy(rho, x) for x in xs])
    assert np.all(h[:-2] + h[2:] - 2 * h[1:-1] <= 1e-12)


def test_cond_error_given_hint_examples():
    assert prob.cond_error_given_hint(5, 0, 0).allclose(Pmf.point(5))
    assert np.allclose(prob.cond_error_given_hint(2, 0.5, 0).probs, [0.5, 0.5])
    for p in (0.05, 0.3, 0.6):
        c = prob.cond_error_given_hint(3, p, 1).probs
        assert c[0] == pytest.approx(c[1], abs=1e-15)
    with pytest.raises(ConditioningError):
        prob.cond_error_given_hint(5, 0, 2)


@pytest.mark.parametrize("rho", [2, 3, 5, 7])
def test_cond_closed_forms(rho):
    for p in (0.01, 0.1, 0.3):
        c0 = prob.cond_error_given_hint(rho, p, 0)
        assert c0.allclose(prob.bern_pmf(rho, prob.hint_zero_rate(rho, p)))
        u, v = prob.hint_nonzero_masses(rho, p)
        for h in range(1, rho):
            expect = np.full(rho, v)
            expect[0] = expect[h] = u
            assert np.max(np.abs(prob.cond_error_given_hint(rho, p, h).probs - expect)) <= 1e-12


def test_cover_tau_zero_is_conditional():
    for h in range(3):
        assert prob.cover_distribution(3, 0.2, 0.0, h).allclose(prob.cond_error_given_hint(3, 0.2, h))


@pytest.mark.parametrize("rho", [2, 3, 5, 7])
def test_cover_deconvolution_round_trip(rho):
    for p in (0.02, 0.1, 0.3, 0.45):
        tau = tau_reduction(rho, p)
        for h in range(rho):
            d = prob.cover_distribution(rho, p, tau, h)
            back = prob.convolve(prob.bern_pmf(rho, tau), d)
            assert back.allclose(prob.cond_error_given_hint(rho, p, h))
            assert np.max(np.abs(d.probs - prob.cover_closed_form(rho, p, tau, h))) <= 1e-12
        # hint zero: the cover law is Bernoulli with the inverse piling-up rate
        d0 = prob.cover_distribution(rho, p, tau, 0)
        assert d0.nonzero_mass() == pytest.approx(prob.cover_rate_h0(rho, p, tau), abs=1e-12)
        assert d0.allclose(prob.bern_pmf(rho, prob.cover_rate_h0(rho, p, tau)))


def test_uncorrected_cover_denominator_fails_to_normalize():
    # Normalizing by (rho - 1) - tau instead of (rho - 1) - rho*tau gives masses
    # that do not sum to one once rho > 2.
    rho, p = 5, 0.1
    tau = tau_reduction(rho, p)
    u, v = prob.hint_nonzero_masses(rho, p)
    w = np.full(rho, v)
    w[0] = w[1] = u
    printed = ((rho - 1) * w - tau) / ((rho - 1) - tau)
    assert abs(printed.sum() - 1) > 1e-4
    assert prob.cover_closed_form(rho, p, tau, 1).sum() == pytest.approx(1, abs=1e-12)


def test_cover_feasibility():
    rho, p = 5, 0.1
    bound = prob.cover_feasibility_bound(rho, p)
    ok = prob.cover_distribution(rho, p, bound * 0.999, 1)
    assert ok.probs.min() >= 0
    with pytest.raises(InfeasibleError):
        prob.cover_distribution(rho, p, min(bound * 1.2, prob.max_rate(rho) - 0.01), 1)


def test_sampling():
    rng = np.random.default_rng(0)
    assert np.all(prob.sample(Pmf.point(7, 3), rng, 1000) == 3)
    x = prob.sample_bernoulli(2, 0.25, 100_000, rng)
    sigma = math.sqrt(0.25 * 0.75 / 1e5)
    assert abs(x.mean() - 0.25) <= 3 * sigma
    a = prob.sample_bernoulli(5, 0.3, 50, np.random.default_rng(9))
    b = prob.sample_bernoulli(5, 0.3, 50, np.random.default_rng(9))
    assert np.array_equal(a, b)
    assert isinstance(prob.sample(Pmf.point(3, 1), rng), int)
