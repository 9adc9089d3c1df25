"""Special functions and the scalar coefficients of the STP expressions.

Every analytic quantity in the package is built from three pieces:

* ``rho(tau, beta)``  -- interference from BSs farther than the serving BS,
  ``2 tau / (beta - 2) * 2F1(1, 1 - 2/beta; 2 - 2/beta; -tau)``;
* ``zeta2(tau, beta)`` -- interference from BSs anywhere in the plane,
  ``(2 pi / beta) csc(2 pi / beta) tau^(2/beta)``;
* the Toeplitz coefficients ``l_i`` (derivatives of the interference Laplace
  transform), see :func:`ell_coeff`.
"""

from __future__ import annotations

import functools
import math

import numpy as np

__all__ = [
    "DomainError",
    "NumericalError",
    "gauss_2f1",
    "beta_fn",
    "alpha_const",
    "rho_coeff",
    "zeta_coeffs",
    "theta_coeffs",
    "ell_coeff",
    "Coefficients",
    "coefficients",
]

MAX_TERMS = 1_000_000
_EPS = 1e-16


class DomainError(ValueError):
    """Argument outside the domain of a formula."""


class NumericalError(ArithmeticError):
    """An iterative evaluation failed to converge."""


def _series(a, b, c, z, max_terms=MAX_TERMS):
    """Sum the 2F1 power series for 0 <= z < 1 with a tail-bounded stop rule.

    Returns the sum and the sum of absolute terms (a cancellation measure).
    """
    total = 1.0
    term = 1.0
    mag = 1.0
    for n in range(max_terms):
        ratio = (a + n) * (b + n) / ((c + n) * (n + 1.0)) * z
        term *= ratio
        total += term
        mag += abs(term)
        if term == 0.0:
            return total, mag
        # remaining terms shrink at least geometrically with rate max(ratio, z)
        r = max(abs(ratio), z)
        if r < 1.0 and abs(term) * r / (1.0 - r) <= _EPS * abs(total):
            return total, mag
    raise NumericalError(
        f"2F1({a}, {b}; {c}; {z}) series did not converge in {max_terms} terms"
    )


def _check_c(c):
    if c <= 0 and float(c).is_integer():
        raise DomainError(f"2F1 undefined for non-positive integer c={c}")


def gauss_2f1(a: float, b: float, c: float, x: float) -> float:
    """Gauss hypergeometric function for real ``x <= 0``.

    The Pfaff transformation
    ``2F1(a,b;c;x) = (1-x)^(-a) 2F1(a, c-b; c; x/(x-1))`` maps the argument
    into ``[0, 1)`` where the power series converges. It applies with ``a`` and
    ``b`` swapped too; the form with less cancellation in its series is used.
    """
    _check_c(c)
    if not math.isfinite(x) or x > 0:
        raise DomainError(f"gauss_2f1 supports finite x <= 0, got {x}")
    if x == 0.0:
        return 1.0
    z = x / (x - 1.0)
    best = None
    for p, q in ((a, b), (b, a)):
        total, mag = _series(p, c - q, c, z)
        cond = mag / abs(total) if total else math.inf
        if best is None or cond < best[0]:
            best = (cond, (1.0 - x) ** (-p) * total)
    return best[1]


def beta_fn(a: float, b: float) -> float:
    """Beta function ``Gamma(a) Gamma(b) / Gamma(a+b)`` via log-gamma."""
    if a <= 0 or b <= 0:
        raise DomainError(f"beta_fn needs positive arguments, got ({a}, {b})")
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def alpha_const(N: int) -> float:
    """Alzer constant ``(N!)^(-1/N)``."""
    if int(N) != N or N < 1:
        raise DomainError(f"N must be a positive integer, got {N}")
    return math.exp(-math.lgamma(N + 1) / N)


def _check_beta(beta):
    if not beta > 2:
        raise DomainError(f"pathloss exponent must exceed 2, got {beta}")


def _check_tau(tau):
    if not (tau > 0 and math.isfinite(tau)):
        raise DomainError(f"SIR threshold must be positive and finite, got {tau}")


def rho_coeff(tau: float, beta: float) -> float:
    _check_beta(beta)
    _check_tau(tau)
    d = 2.0 / beta
    return 2.0 * tau / (beta - 2.0) * gauss_2f1(1.0, 1.0 - d, 2.0 - d, -tau)


def _zeta2(tau, beta):
    d = 2.0 / beta
    return math.pi * d / math.sin(math.pi * d) * tau**d


def zeta_coeffs(tau: float, beta: float) -> tuple[float, float]:
    """Single-antenna coefficients ``(zeta1, zeta2)``.

    The cached-file STP at ``N = 1`` is ``t / (zeta1 t + zeta2)``.
    """
    rho = rho_coeff(tau, beta)
    zeta2 = _zeta2(tau, beta)
    return 1.0 + rho - zeta2, zeta2


def theta_coeffs(i: int, tau: float, beta: float, N: int) -> tuple[float, float]:
    """``(theta_A(i), theta_C(i))``: zeta coefficients at threshold ``i alpha(N) tau``."""
    if int(i) != i or not 1 <= i <= N:
        raise DomainError(f"need 1 <= i <= N, got i={i}, N={N}")
    return zeta_coeffs(i * alpha_const(N) * tau, beta)


def _far_term(i, beta):
    # (2/beta) B(2/beta + 1, i - 2/beta): all BSs, no exclusion disc
    d = 2.0 / beta
    return d * beta_fn(d + 1.0, i - d)


def _near_term(i, tau, beta):
    # 2 tau^(i-2/beta) / (i beta - 2) 2F1(i+1, i-2/beta; i+1-2/beta; -tau),
    # powers combined in log space so large i and tau cannot overflow
    d = 2.0 / beta
    z = tau / (1.0 + tau)
    log_scale = (i - d) * math.log(tau) - (i + 1) * math.log1p(tau)
    return 2.0 / (i * beta - 2.0) * math.exp(log_scale) * _series(i + 1.0, 1.0, i + 1.0 - d, z)[0]


def ell_coeff(i: int, t_f: float, tau: float, beta: float, kind: str = "cached") -> float:
    """Toeplitz coefficient ``l_i`` for a cached (``kind="cached"``) or backhaul file.

    ``l_0`` is in units of ``pi lambda_b r^2``; ``l_i`` for ``i >= 1`` is in units
    of ``pi lambda_b r^2 tau^(2/beta)``.  Cached coefficients interpolate affinely
    between the backhaul value (``t_f = 1``) and the no-exclusion value (``t_f = 0``).
    """
    _check_beta(beta)
    _check_tau(tau)
    if int(i) != i or i < 0:
        raise DomainError(f"i must be a non-negative integer, got {i}")
    if kind == "backhaul":
        t_f = 1.0
    elif kind != "cached":
        raise DomainError(f"kind must be 'cached' or 'backhaul', got {kind!r}")
    elif not 0.0 <= t_f <= 1.0:
        raise DomainError(f"t_f must lie in [0, 1], got {t_f}")
    if i == 0:
        near, far = rho_coeff(tau, beta), _zeta2(tau, beta)
    else:
        near, far = _near_term(i, tau, beta), _far_term(i, beta)
    return t_f * near + (1.0 - t_f) * far


class Coefficients:
    """All scalar coefficients needed for one ``(tau, beta, N)`` triple.

    Attributes
    ----------
    rho, zeta1, zeta2 : float
    near, far : ndarray, shape (N-1,)
        ``l_i`` for ``i = 1..N-1`` at ``t = 1`` and ``t = 0``.
    scale : float
        ``tau^(2/beta)``, the factor multiplying the Toeplitz generator.
    theta_a, theta_c : ndarray, shape (N,)
        Upper-bound coefficients for ``i = 1..N``.
    binom_signed : ndarray, shape (N,)
        ``(-1)^(i+1) C(N, i)``.
    """

    def __init__(self, tau: float, beta: float, N: int):
        if int(N) != N or N < 1:
            raise DomainError(f"N must be a positive integer, got {N}")
        self.tau, self.beta, self.N = float(tau), float(beta), int(N)
        self.zeta1, self.zeta2 = zeta_coeffs(tau, beta)
        self.rho = self.zeta1 - 1.0 + self.zeta2
        self.scale = tau ** (2.0 / beta)
        self.near = np.array([_near_term(i, tau, beta) for i in range(1, N)])
        self.far = np.array([_far_term(i, beta) for i in range(1, N)])
        th = np.array([theta_coeffs(i, tau, beta, N) for i in range(1, N + 1)])
        self.theta_a, self.theta_c = th[:, 0], th[:, 1]
        self.binom_signed = np.array(
            [(-1) ** (i + 1) * math.comb(N, i) for i in range(1, N + 1)], dtype=float
        )

    def l0(self, t):
        return t * self.rho + (1.0 - t) * self.zeta2

    def ell(self, t):
        """``l_1..l_{N-1}``; for array ``t`` the result has shape (N-1, len(t))."""
        t = np.asarray(t, dtype=float)
        return np.multiply.outer(self.near, t) + np.multiply.outer(self.far, 1.0 - t)

    def dB_dt(self) -> np.ndarray:
        """First column of the derivative of ``B(t) = (t + l_0) I - tau^(2/beta) D``.

        Diagonal ``1 - k_0`` with ``k_0 = zeta2 - rho``; subdiagonals
        ``k_i = tau^(2/beta) (far_i - near_i)``.
        """
        k0 = self.zeta2 - self.rho
        return np.concatenate(([1.0 - k0], self.scale * (self.far - self.near)))


@functools.lru_cache(maxsize=256)
def coefficients(tau: float, beta: float, N: int) -> Coefficients:
    """Memoized :class:`Coefficients` (``lru_cache`` is thread-safe)."""
    return Coefficients(float(tau), float(beta), int(N))
