"""Successful transmission probability (STP) and area spectrum efficiency (ASE).

Exact STP uses the lower-triangular Toeplitz representation of the Gamma(N, 1)
serving gain; the upper bound replaces the Gamma CDF by Alzer's lower bound
``(1 - exp(-alpha x))^N``.  The analysis is interference limited (SIR).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import load
from .content import CachePlacement, ContentParams, FileAllocation, validate
from .specfun import DomainError, coefficients

__all__ = [
    "NetworkParams",
    "StpBreakdown",
    "dbm_to_watts",
    "toeplitz_first_column",
    "toeplitz_inv_l1norm",
    "stp_cached_exact",
    "stp_backhaul_exact",
    "stp_cached_exact_grad",
    "stp_total",
    "stp_single_antenna",
    "stp_cached_upper",
    "stp_cached_upper_grad",
    "stp_backhaul_upper",
    "stp_total_upper",
    "stp_total_upper_asymptotic",
    "ase_upper_asymptotic",
    "lemma3_bound_coeffs",
    "ase_from_stp",
]

PER_KM2 = 1e6


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class NetworkParams:
    """Physical-layer parameters; densities are per m^2, powers in watts."""

    lambda_b: float
    lambda_u: float
    beta: float
    N: int
    tau: float
    P_tx: float = 6.3
    sigma_n2: float = field(default_factory=lambda: dbm_to_watts(-97.5))

    def __post_init__(self):
        for name in ("lambda_b", "lambda_u", "tau", "P_tx", "sigma_n2"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive and finite, got {v}")
        if not self.beta > 2:
            raise DomainError(f"beta must exceed 2, got {self.beta}")
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def coeffs(self):
        return coefficients(self.tau, self.beta, self.N)

    def replace(self, **changes) -> "NetworkParams":
        return replace(self, **changes)


@dataclass
class StpBreakdown:
    """Per-file STP terms, totals and the expression that produced them."""

    per_cached_file: dict
    backhaul_term: float
    backhaul_weights: dict
    total_stp: float
    ase: float
    method: str
    stderr: Optional[float] = None

    def per_file(self, F: int) -> list[float]:
        """STP of each file ``1..F`` (cached STP, or admission weight times backhaul STP)."""
        out = []
        for f in range(1, F + 1):
            if f in self.per_cached_file:
                out.append(self.per_cached_file[f])
            else:
                out.append(self.backhaul_weights.get(f, 0.0) * self.backhaul_term)
        return out


def ase_from_stp(stp: float, net: NetworkParams) -> float:
    """ASE in bit/s/Hz/km^2."""
    return net.lambda_b * PER_KM2 * stp * math.log2(1.0 + net.tau)


# ---------------------------------------------------------------- Toeplitz


def toeplitz_first_column(ell, scale):
    """First column of ``(I - scale * D)^-1`` where ``D`` is generated by ``ell``.

    ``ell`` holds ``l_1..l_{N-1}`` (shape ``(N-1,)`` or ``(N-1, M)`` for ``M``
    independent matrices); ``scale`` is scalar or shape ``(M,)``.  Uses the
    forward recurrence ``x_0 = 1, x_n = scale * sum_{k=1}^n l_k x_{n-k}``.
    """
    ell = np.asarray(ell, dtype=float)
    scale = np.asarray(scale, dtype=float)
    N = ell.shape[0] + 1
    x = np.zeros((N,) + np.broadcast_shapes(ell.shape[1:], scale.shape))
    x[0] = 1.0
    for n in range(1, N):
        # sum_k l_k x_{n-k}, k = 1..n
        x[n] = scale * np.einsum("k...,k...->...", ell[:n], x[n - 1 :: -1][:n])
    return x


def _induced_l1(first_col):
    """Max column abs-sum of the lower-triangular Toeplitz matrix with this first column.

    Column ``j`` is the first column truncated to its first ``N - j`` entries,
    so the max is attained by the column with the largest partial abs-sum.
    """
    partial = np.cumsum(np.abs(first_col), axis=0)
    return partial.max(axis=0)


def toeplitz_inv_l1norm(ell, scale: float) -> float:
    """Induced 1-norm of ``(I - scale * D)^-1``."""
    x = toeplitz_first_column(np.asarray(ell, dtype=float), scale)
    if np.all(x >= -1e-12):
        return float(x.sum())
    return float(_induced_l1(x))


def _check_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < -1e-12) or np.any(t > 1 + 1e-12) or not np.all(np.isfinite(t)):
        raise DomainError("caching probability must lie in [0, 1]")
    return np.clip(t, 0.0, 1.0)


def _exact_parts(t, net):
    """Return ``(P, x, denom)``: STP, first column of ``(I - cD)^-1`` and ``t + l_0``."""
    c = net.coeffs
    t = _check_t(t)
    denom = t + c.l0(t)
    x = toeplitz_first_column(c.ell(t), c.scale / denom)
    if np.any(x < -1e-12):
        norm = _induced_l1(x)
    else:
        norm = x.sum(axis=0)
    return t / denom * norm, x, denom


def stp_cached_exact(t_f, net: NetworkParams):
    """Exact STP of a cached file with caching probability ``t_f`` (array-aware)."""
    p, _, _ = _exact_parts(t_f, net)
    return float(p) if np.ndim(p) == 0 else p


def stp_backhaul_exact(net: NetworkParams) -> float:
    """Exact STP of a backhaul file (nearest-BS association), before admission."""
    return stp_cached_exact(1.0, net)


def _conv(a, b):
    # truncated product of two lower-triangular Toeplitz generators
    N = a.shape[0]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape))
    for n in range(N):
        out[n] = np.einsum("k...,k...->...", a[: n + 1], b[n::-1][: n + 1])
    return out


def stp_cached_exact_grad(t_f, net: NetworkParams, kind: str = "exact"):
    """Derivative of the exact cached-file STP with respect to ``t_f``.

    With ``B(t) = (t + l_0) I - tau^(2/beta) D`` the STP is the first-column sum
    of ``t B^-1`` and its derivative matrix is ``B^-1 - t B^-1 B' B^-1``.

    ``kind="exact"`` returns the first-column sum of that matrix (the true
    derivative); ``kind="norm"`` returns its induced 1-norm.  They coincide
    when every entry of the derivative matrix is non-negative.
    """
    c = net.coeffs
    t = _check_t(t_f)
    _, x, denom = _exact_parts(t, net)
    binv = x / denom  # first column of B^-1
    dB = c.dB_dt().reshape((-1,) + (1,) * np.ndim(t))
    deriv = binv - t * _conv(_conv(binv, dB), binv)
    if kind == "exact":
        g = deriv.sum(axis=0)
    elif kind == "norm":
        g = _induced_l1(deriv)
    else:
        raise DomainError(f"unknown gradient kind {kind!r}")
    return float(g) if np.ndim(g) == 0 else g


# ---------------------------------------------------------------- upper bound


def stp_cached_upper(t_f, net: NetworkParams):
    """Gamma-approximation upper bound ``sum_i (-1)^(i+1) C(N,i) t / (theta_A t + theta_C)``."""
    c = net.coeffs
    t = _check_t(t_f)
    terms = np.multiply.outer(c.binom_signed, t) / (np.multiply.outer(c.theta_a, t) + c.theta_c.reshape((-1,) + (1,) * t.ndim))
    p = terms.sum(axis=0)
    return float(p) if np.ndim(p) == 0 else p


def stp_cached_upper_grad(t_f, net: NetworkParams):
    """Closed-form derivative ``sum_i (-1)^(i+1) C(N,i) theta_C / (theta_A t + theta_C)^2``."""
    c = net.coeffs
    t = _check_t(t_f)
    shape = (-1,) + (1,) * t.ndim
    den = np.multiply.outer(c.theta_a, t) + c.theta_c.reshape(shape)
    g = ((c.binom_signed * c.theta_c).reshape(shape) / den**2).sum(axis=0)
    return float(g) if np.ndim(g) == 0 else g


def stp_backhaul_upper(net: NetworkParams) -> float:
    return stp_cached_upper(1.0, net)


# ---------------------------------------------------------------- totals


def _check_inputs(alloc, placement, content):
    problems = validate(alloc, placement, content)
    if problems:
        raise DomainError("infeasible allocation/placement: " + "; ".join(problems))


def _combine(alloc, placement, net, content, cached_fn, backhaul_stp, method, asymptotic=False):
    _check_inputs(alloc, placement, content)
    files = list(alloc.cached)
    t = placement.vector(files)
    p_cached = np.atleast_1d(cached_fn(t, net)) if files else np.array([])
    weights = load.backhaul_weights(
        alloc.backhaul, content.q, net.lambda_u, net.lambda_b, content.B, asymptotic=asymptotic
    )
    q = content.q
    total = float(sum(q[f - 1] * p for f, p in zip(files, p_cached)))
    total += float(sum(q[f - 1] * w for f, w in weights.items())) * backhaul_stp
    total = min(max(total, 0.0), 1.0)
    return StpBreakdown(
        per_cached_file={f: float(p) for f, p in zip(files, p_cached)},
        backhaul_term=backhaul_stp,
        backhaul_weights=weights,
        total_stp=total,
        ase=ase_from_stp(total, net),
        method=method,
    )


def stp_total(alloc: FileAllocation, placement: CachePlacement, net: NetworkParams, content: ContentParams) -> StpBreakdown:
    """Exact STP and ASE with the Poisson-binomial backhaul load."""
    return _combine(alloc, placement, net, content, stp_cached_exact, stp_backhaul_exact(net), "exact")


def stp_single_antenna(alloc: FileAllocation, placement: CachePlacement, net: NetworkParams, content: ContentParams) -> StpBreakdown:
    """Closed form for ``N = 1``: cached term ``t / (zeta1 t + zeta2)``."""
    if net.N != 1:
        raise DomainError(f"single-antenna closed form needs N=1, got N={net.N}")
    z1, z2 = net.coeffs.zeta1, net.coeffs.zeta2

    def cached(t, _net):
        return t / (z1 * t + z2)

    return _combine(alloc, placement, net, content, cached, 1.0 / (z1 + z2), "single_antenna")


def stp_total_upper(alloc: FileAllocation, placement: CachePlacement, net: NetworkParams, content: ContentParams) -> StpBreakdown:
    """Upper bound of the STP with the Poisson-binomial backhaul load."""
    return _combine(alloc, placement, net, content, stp_cached_upper, stp_backhaul_upper(net), "upper")


def stp_total_upper_asymptotic(alloc, placement, net, content) -> StpBreakdown:
    """Upper bound with every backhaul file requested (``lambda_u -> inf``)."""
    return _combine(
        alloc, placement, net, content, stp_cached_upper, stp_backhaul_upper(net), "asymptotic", asymptotic=True
    )


def ase_upper_asymptotic(alloc: FileAllocation, placement: CachePlacement, net: NetworkParams, content: ContentParams) -> float:
    """Asymptotic upper bound of the ASE; backhaul weight is ``B / max(F_b, B)``."""
    return stp_total_upper_asymptotic(alloc, placement, net, content).ase


# ---------------------------------------------------------------- bounds


def lemma3_bound_coeffs(net: NetworkParams) -> tuple[float, float, float, float]:
    """``(mu_A, nu_A, mu_B, nu_B)`` with ``t/(mu_A t + nu_A) <= P(t) <= t/(mu_B t + nu_B)``.

    Both bounds write ``t + l_0 - tau^(2/beta) sum_i w_i l_i`` as ``mu t + nu``;
    the lower bound uses weights ``w_i = (N-i)/N`` (test vector of ones), the
    upper bound ``w_i = 1`` (Neumann series bound).
    """
    c = net.coeffs
    N = net.N
    i = np.arange(1, N)
    w_lower = (N - i) / N
    k = c.scale * (c.far - c.near)  # subdiagonals of dB/dt, all >= 0
    far = c.scale * c.far
    mu_a = c.zeta1 + float(np.dot(w_lower, k))
    nu_a = c.zeta2 - float(np.dot(w_lower, far))
    mu_b = c.zeta1 + float(k.sum())
    nu_b = c.zeta2 - float(far.sum())
    return mu_a, nu_a, mu_b, nu_b
