"""Number of distinct backhaul files requested at the tagged BS.

Each backhaul file other than the requested one is independently requested at
the tagged BS with probability ``P_i``; the count is therefore one plus a
Poisson-binomial variable.
"""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from .specfun import DomainError

__all__ = [
    "request_prob",
    "poisson_binomial_pmf",
    "backhaul_load_pmf",
    "backhaul_load_pmf_bruteforce",
    "asymptotic_load_pmf",
    "backhaul_weight",
    "backhaul_weights",
]

BRUTEFORCE_MAX = 20


def request_prob(q_i, lambda_u: float, lambda_b: float):
    """Probability that at least one user of a BS requests a file of popularity ``q_i``.

    Uses the mean-cell-load approximation ``1 - (1 + q_i lambda_u / (3.5 lambda_b))^-4.5``.
    """
    if not (lambda_u > 0 and lambda_b > 0):
        raise DomainError("densities must be positive")
    q_i = np.asarray(q_i, dtype=float)
    if np.any(q_i < 0) or np.any(q_i > 1):
        raise DomainError("popularity must lie in [0, 1]")
    p = -np.expm1(-4.5 * np.log1p(q_i * lambda_u / (3.5 * lambda_b)))
    return float(p) if p.ndim == 0 else p


def poisson_binomial_pmf(probs: Sequence[float]) -> np.ndarray:
    """pmf of the number of successes among independent Bernoulli(``probs``) trials."""
    pmf = np.zeros(len(probs) + 1)
    pmf[0] = 1.0
    for n, p in enumerate(probs, start=1):
        pmf[1 : n + 1] = pmf[1 : n + 1] * (1.0 - p) + pmf[:n] * p
        pmf[0] *= 1.0 - p
    return pmf


def _other_probs(requested_file, backhaul_set, q, lambda_u, lambda_b):
    backhaul_set = list(backhaul_set)
    if requested_file not in backhaul_set:
        raise DomainError(f"file {requested_file} is not in the backhaul set")
    q = np.asarray(q, dtype=float)
    others = [f for f in backhaul_set if f != requested_file]
    return request_prob(q[np.array(others, dtype=int) - 1], lambda_u, lambda_b) if others else np.array([])


def backhaul_load_pmf(requested_file, backhaul_set, q, lambda_u, lambda_b) -> np.ndarray:
    """``P(F_b^r = k)`` for ``k = 1..F_b`` given that ``requested_file`` is requested.

    Entry ``k - 1`` of the result holds the probability of ``k`` requested files.
    """
    return poisson_binomial_pmf(np.atleast_1d(_other_probs(requested_file, backhaul_set, q, lambda_u, lambda_b)))


def backhaul_load_pmf_bruteforce(requested_file, backhaul_set, q, lambda_u, lambda_b) -> np.ndarray:
    """Same as :func:`backhaul_load_pmf` by enumerating every subset of the other files."""
    if len(backhaul_set) > BRUTEFORCE_MAX:
        raise DomainError(f"subset enumeration limited to {BRUTEFORCE_MAX} files")
    p = np.atleast_1d(_other_probs(requested_file, backhaul_set, q, lambda_u, lambda_b))
    n = len(p)
    pmf = np.zeros(n + 1)
    for k in range(n + 1):
        for chosen in itertools.combinations(range(n), k):
            mask = np.zeros(n, dtype=bool)
            mask[list(chosen)] = True
            pmf[k] += np.prod(p[mask]) * np.prod(1.0 - p[~mask])
    return pmf


def asymptotic_load_pmf(F_b: int) -> np.ndarray:
    """Limit ``lambda_u -> inf``: every backhaul file is requested."""
    if F_b < 1:
        raise DomainError("need at least one backhaul file")
    pmf = np.zeros(F_b)
    pmf[-1] = 1.0
    return pmf


def backhaul_weight(pmf: np.ndarray, B: int) -> float:
    """Admission probability ``sum_k pmf(k) B / max(k, B)``."""
    k = np.arange(1, len(pmf) + 1)
    return float(np.dot(pmf, B / np.maximum(k, B)))


def backhaul_weights(backhaul_set, q, lambda_u, lambda_b, B, asymptotic=False) -> dict[int, float]:
    """Admission probability of every backhaul file."""
    backhaul_set = list(backhaul_set)
    F_b = len(backhaul_set)
    if F_b == 0:
        return {}
    if F_b <= B:
        return {f: 1.0 for f in backhaul_set}
    if asymptotic:
        w = backhaul_weight(asymptotic_load_pmf(F_b), B)
        return {f: w for f in backhaul_set}
    return {
        f: backhaul_weight(backhaul_load_pmf(f, backhaul_set, q, lambda_u, lambda_b), B)
        for f in backhaul_set
    }
