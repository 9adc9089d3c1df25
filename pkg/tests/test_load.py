import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randcache.content import zipf_popularity
from randcache.load import (
    asymptotic_load_pmf,
    backhaul_load_pmf,
    backhaul_load_pmf_bruteforce,
    backhaul_weight,
    backhaul_weights,
    poisson_binomial_pmf,
    request_prob,
)
from randcache.specfun import DomainError


def test_request_prob_formula():
    q, lu, lb = 0.3, 1e-3, 1e-4
    assert request_prob(q, lu, lb) == pytest.approx(1 - (1 + q * lu / (3.5 * lb)) ** -4.5, rel=1e-14)
    assert request_prob(0.0, lu, lb) == 0.0
    arr = request_prob(np.array([0.1, 0.2]), lu, lb)
    assert arr.shape == (2,) and arr[1] > arr[0]
    with pytest.raises(DomainError):
        request_prob(0.1, 0.0, lb)
    with pytest.raises(DomainError):
        request_prob(1.5, lu, lb)


def test_request_prob_tiny_density_is_accurate():
    # expm1/log1p form keeps relative accuracy when q lambda_u / lambda_b is tiny
    x = 1e-12
    assert request_prob(x, 3.5, 1.0) == pytest.approx(4.5 * x, rel=1e-9)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=0, max_size=10))
def test_poisson_binomial_is_a_pmf(p):
    pmf = poisson_binomial_pmf(p)
    assert len(pmf) == len(p) + 1
    assert pmf.sum() == pytest.approx(1.0)
    assert np.all(pmf >= -1e-15)
    assert np.dot(np.arange(len(pmf)), pmf) == pytest.approx(sum(p), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    F=st.integers(1, 9),
    gamma=st.floats(0, 2),
    lu=st.floats(1e-5, 1e-1),
    data=st.data(),
)
def test_dp_matches_enumeration(F, gamma, lu, data):
    q = zipf_popularity(F, gamma)
    backhaul = sorted(data.draw(st.sets(st.integers(1, F), min_size=1)))
    f = data.draw(st.sampled_from(backhaul))
    dp = backhaul_load_pmf(f, backhaul, q, lu, 1e-4)
    bf = backhaul_load_pmf_bruteforce(f, backhaul, q, lu, 1e-4)
    assert np.max(np.abs(dp - bf)) <= 1e-12


def test_load_pmf_errors():
    q = zipf_popularity(25, 1.0)
    with pytest.raises(DomainError):
        backhaul_load_pmf(3, [1, 2], q, 1e-3, 1e-4)
    with pytest.raises(DomainError):
        backhaul_load_pmf_bruteforce(1, list(range(1, 23)), q, 1e-3, 1e-4)


def test_single_backhaul_file_is_always_alone():
    q = zipf_popularity(3, 1.0)
    assert backhaul_load_pmf(2, [2], q, 1e-3, 1e-4) == pytest.approx([1.0])


def test_asymptotic_pmf():
    assert asymptotic_load_pmf(4) == pytest.approx([0, 0, 0, 1])
    with pytest.raises(DomainError):
        asymptotic_load_pmf(0)


def test_weight():
    # pmf over k = 1..3 with B = 2
    assert backhaul_weight(np.array([0.5, 0.25, 0.25]), 2) == pytest.approx(0.5 + 0.25 + 0.25 * 2 / 3)
    assert backhaul_weight(asymptotic_load_pmf(5), 2) == pytest.approx(0.4)


def test_weights_cases():
    q = zipf_popularity(6, 0.6)
    assert backhaul_weights([], q, 1e-3, 1e-4, 2) == {}
    assert backhaul_weights([1, 2], q, 1e-3, 1e-4, 2) == {1: 1.0, 2: 1.0}
    w0 = backhaul_weights([1, 2], q, 1e-3, 1e-4, 0)
    assert all(v == 0.0 for v in w0.values())
    w = backhaul_weights([1, 2, 3, 4], q, 1e-3, 1e-4, 2)
    assert all(0.5 < v < 1.0 for v in w.values())
    # a more popular requested file leaves fewer competing files likely requested
    assert w[1] > w[4]
    wa = backhaul_weights([1, 2, 3, 4], q, 1e-3, 1e-4, 2, asymptotic=True)
    assert set(wa.values()) == {0.5}


def test_weights_approach_asymptote():
    q = zipf_popularity(6, 0.6)
    w = backhaul_weights([1, 2, 3, 4], q, 10.0, 1e-4, 2)
    assert all(v == pytest.approx(0.5, abs=1e-6) for v in w.values())
