import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from randcache.specfun import (
    Coefficients,
    DomainError,
    NumericalError,
    _series,
    alpha_const,
    beta_fn,
    coefficients,
    ell_coeff,
    gauss_2f1,
    rho_coeff,
    theta_coeffs,
    zeta_coeffs,
)

betas = st.floats(2.2, 8.0)
taus = st.floats(1e-3, 1e3)


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(0.1, 12.0),
    b=st.floats(-1.0, 3.0),
    c=st.floats(0.3, 14.0),
    x=st.floats(-1e3, 0.0),
)
def test_2f1_matches_mpmath(a, b, c, x):
    ref = float(mpmath.hyp2f1(a, b, c, x))
    assert gauss_2f1(a, b, c, x) == pytest.approx(ref, rel=1e-11, abs=1e-300)


def test_2f1_edges():
    assert gauss_2f1(1.0, 2.0, 3.0, 0.0) == 1.0
    with pytest.raises(DomainError):
        gauss_2f1(1.0, 1.0, 2.0, 0.5)
    with pytest.raises(DomainError):
        gauss_2f1(1.0, 1.0, -2.0, -0.5)
    with pytest.raises(DomainError):
        gauss_2f1(1.0, 1.0, 2.0, -math.inf)


def test_series_reports_non_convergence():
    with pytest.raises(NumericalError):
        _series(1.0, 1.0, 1.5, 0.999, max_terms=5)


def test_arctan_identity():
    # 2F1(1, 1/2; 3/2; -x^2) = arctan(x)/x
    for x in (0.1, 1.0, 3.0):
        assert gauss_2f1(1.0, 0.5, 1.5, -x * x) == pytest.approx(math.atan(x) / x, rel=1e-14)


def test_beta_fn_against_scipy():
    for a, b in [(0.5, 0.5), (1.5, 3.25), (10.0, 0.1)]:
        assert beta_fn(a, b) == pytest.approx(special.beta(a, b), rel=1e-13)
    with pytest.raises(DomainError):
        beta_fn(0.0, 1.0)


def test_alpha_const():
    assert alpha_const(1) == pytest.approx(1.0)
    assert alpha_const(2) == pytest.approx(1 / math.sqrt(2))
    assert alpha_const(8) == pytest.approx(math.factorial(8) ** (-1 / 8))
    with pytest.raises(DomainError):
        alpha_const(0)


def test_rho_reference_value():
    # tau = 1, beta = 4: rho = arctan(1) = pi/4
    assert rho_coeff(1.0, 4.0) == pytest.approx(math.pi / 4, rel=1e-14)


def test_zeta_coeffs_beta4():
    z1, z2 = zeta_coeffs(1.0, 4.0)
    assert z2 == pytest.approx(math.pi / 2)
    assert z1 == pytest.approx(1 + math.pi / 4 - math.pi / 2)


@settings(max_examples=60, deadline=None)
@given(tau=taus, beta=betas)
def test_rho_quadrature(tau, beta):
    # rho = 2 int_1^inf tau u^(1-beta) / (1 + tau u^-beta) du
    ref, _ = integrate.quad(lambda u: 2 * tau * u ** (1 - beta) / (1 + tau * u ** -beta), 1, np.inf, epsrel=1e-12, limit=200)
    assert rho_coeff(tau, beta) == pytest.approx(ref, rel=1e-8)


def _ell_quad(i, tau, beta, lower):
    f = lambda u: 2 * tau**i * u ** (1 - i * beta) / (1 + tau * u**-beta) ** (i + 1)
    if lower == 0:
        a, _ = integrate.quad(f, 0, 1, epsrel=1e-12, limit=200)
        b, _ = integrate.quad(f, 1, np.inf, epsrel=1e-12, limit=200)
        return (a + b) / tau ** (2 / beta)
    v, _ = integrate.quad(f, 1, np.inf, epsrel=1e-12, limit=200)
    return v / tau ** (2 / beta)


@pytest.mark.parametrize("i", [1, 2, 3, 5])
@pytest.mark.parametrize("tau,beta", [(0.3, 3.0), (1.0, 4.0), (5.0, 4.5), (20.0, 2.7)])
def test_ell_quadrature(i, tau, beta):
    near = ell_coeff(i, 1.0, tau, beta)
    far = ell_coeff(i, 0.0, tau, beta)
    assert near == pytest.approx(_ell_quad(i, tau, beta, 1), rel=1e-8)
    assert far == pytest.approx(_ell_quad(i, tau, beta, 0), rel=1e-8)
    assert ell_coeff(i, 0.3, tau, beta) == pytest.approx(0.3 * near + 0.7 * far)
    assert ell_coeff(i, 0.3, tau, beta, kind="backhaul") == near


def test_ell_zero_is_rho_zeta2():
    tau, beta = 2.0, 3.5
    assert ell_coeff(0, 1.0, tau, beta) == pytest.approx(rho_coeff(tau, beta))
    assert ell_coeff(0, 0.0, tau, beta) == pytest.approx(zeta_coeffs(tau, beta)[1])


def test_ell_domain():
    with pytest.raises(DomainError):
        ell_coeff(1, 1.5, 1.0, 4.0)
    with pytest.raises(DomainError):
        ell_coeff(-1, 0.5, 1.0, 4.0)
    with pytest.raises(DomainError):
        ell_coeff(1, 0.5, 1.0, 2.0)
    with pytest.raises(DomainError):
        ell_coeff(1, 0.5, 0.0, 4.0)
    with pytest.raises(DomainError):
        ell_coeff(1, 0.5, 1.0, 4.0, kind="other")


@settings(max_examples=60, deadline=None)
@given(tau=taus, beta=betas, t=st.floats(0, 1))
def test_ell_non_increasing_from_one(tau, beta, t):
    vals = [ell_coeff(i, t, tau, beta) for i in range(1, 12)]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(vals, vals[1:]))
    assert all(v > 0 for v in vals)


def test_ell_large_index_is_finite():
    v = ell_coeff(200, 1.0, 500.0, 4.0)
    assert math.isfinite(v) and v > 0


def test_theta_is_shifted_zeta():
    N, tau, beta = 4, 1.5, 3.5
    for i in range(1, N + 1):
        assert theta_coeffs(i, tau, beta, N) == zeta_coeffs(i * alpha_const(N) * tau, beta)
    with pytest.raises(DomainError):
        theta_coeffs(0, tau, beta, N)
    with pytest.raises(DomainError):
        theta_coeffs(N + 1, tau, beta, N)


def test_coefficients_object():
    c = Coefficients(1.0, 4.0, 5)
    assert c.near.shape == (4,) and c.far.shape == (4,)
    assert c.theta_a.shape == (5,)
    assert list(c.binom_signed) == [5, -10, 10, -5, 1]
    assert c.l0(1.0) == pytest.approx(c.rho) and c.l0(0.0) == pytest.approx(c.zeta2)
    assert c.ell(np.array([0.2, 0.7])).shape == (4, 2)
    assert coefficients(1.0, 4.0, 5) is coefficients(1.0, 4.0, 5)
    with pytest.raises(DomainError):
        Coefficients(1.0, 4.0, 0)


def test_dB_dt_structure():
    c = Coefficients(2.0, 4.0, 40)
    col = c.dB_dt()
    k = col[1:]
    assert np.all(k >= 0)  # near terms never exceed far terms
    # the subdiagonal series sums to zeta2 - rho, so the partial sum approaches 1 from below
    assert 1.0 - (c.zeta2 - c.rho) + k.sum() < 1.0
    assert 1.0 - (c.zeta2 - c.rho) + k.sum() > 0.5
