"""ASE maximization over file allocation and cache placement, plus baselines."""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import analytic
from .analytic import NetworkParams
from .content import CachePlacement, ContentParams, FileAllocation
from .specfun import DomainError

__all__ = [
    "OptimizerConfig",
    "Solution",
    "project_capped_simplex",
    "grad_matrix_dBdt",
    "projected_gradient_ascent",
    "optimize_placement_exact",
    "optimize_placement_single_antenna",
    "optimize_full",
    "optimize_asymptotic",
    "asymptotic_objective",
    "optimize_asymptotic_placement",
    "enumeration_count",
    "baseline_scheme",
    "baseline_marginals",
    "ENUMERATION_LIMIT",
]

ENUMERATION_LIMIT = 1_000_000


@dataclass(frozen=True)
class OptimizerConfig:
    """Gradient-projection settings.

    ``step_rule="adaptive"`` grows the step by ``growth`` after each accepted
    iteration and halves it on an objective decrease; ``"sqrt"`` uses
    ``step0 / sqrt(n)`` with the same halving.  Steps are measured in units of
    ``t`` along the sup-normalized ascent direction.
    """

    max_iters: int = 10_000
    step_rule: str = "adaptive"
    step0: float = 0.1
    growth: float = 2.0
    max_halvings: int = 20
    convergence_tol: float = 1e-6
    direction: str = "exact"
    threads: int = 1

    def __post_init__(self):
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")
        if not self.convergence_tol > 0:
            raise DomainError("convergence_tol must be positive")
        if self.step_rule not in ("adaptive", "sqrt"):
            raise DomainError(f"unknown step rule {self.step_rule!r}")
        if self.direction not in ("exact", "paper"):
            raise DomainError(f"unknown direction {self.direction!r}")


@dataclass
class Solution:
    alloc: FileAllocation
    placement: CachePlacement
    objective: float
    iterations: int = 0
    converged: bool = True
    scheme: str = ""
    content: Optional[ContentParams] = None
    history: list = field(default_factory=list, repr=False)
    info: dict = field(default_factory=dict)


# ---------------------------------------------------------------- projection


def project_capped_simplex(t_raw, C: float, return_shift: bool = False):
    """Euclidean projection onto ``{t in [0,1]^n : sum t <= C}``.

    The result is ``clip(t_raw - u, 0, 1)`` with ``u = 0`` when the clipped
    vector already fits, otherwise ``u > 0`` solves ``sum clip(t_raw - u) = C``.
    """
    if C < 0:
        raise DomainError(f"capacity must be non-negative, got {C}")
    t_raw = np.asarray(t_raw, dtype=float)
    clipped = np.clip(t_raw, 0.0, 1.0)
    if clipped.sum() <= C:
        return (clipped, 0.0) if return_shift else clipped
    lo, hi = 0.0, float(t_raw.max())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s = np.clip(t_raw - mid, 0.0, 1.0).sum()
        if abs(s - C) < 1e-13:
            lo = hi = mid
            break
        if s > C:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    out = np.clip(t_raw - hi, 0.0, 1.0)
    return (out, hi) if return_shift else out


def grad_matrix_dBdt(net: NetworkParams) -> np.ndarray:
    """First column of ``dB/dt``: ``(1 - k_0, k_1, ..., k_{N-1})``, independent of ``t``."""
    return net.coeffs.dB_dt()


# ---------------------------------------------------------------- ascent


def projected_gradient_ascent(
    objective: Callable[[np.ndarray], float],
    gradient: Callable[[np.ndarray], np.ndarray],
    t0,
    C: float,
    cfg: OptimizerConfig,
):
    """Maximize ``objective`` over the capped simplex.

    Returns ``(t, value, iterations, converged, history)``; ``history`` holds
    the objective after every accepted iterate and is non-decreasing.
    """
    t = project_capped_simplex(t0, C)
    f = objective(t)
    history = [f]
    step = cfg.step0
    converged = False
    n = 0
    for n in range(1, cfg.max_iters + 1):
        g = gradient(t)
        gmax = float(np.max(np.abs(g))) if g.size else 0.0
        if gmax == 0.0 or not math.isfinite(gmax):
            converged = gmax == 0.0
            break
        d = g / gmax
        if cfg.step_rule == "sqrt":
            step = cfg.step0 / math.sqrt(n)
        for _ in range(cfg.max_halvings + 1):
            cand = project_capped_simplex(t + step * d, C)
            fc = objective(cand)
            if fc >= f:
                break
            step *= 0.5
        else:
            # no ascent at the smallest step: stationary to working precision
            converged = True
            break
        move = float(np.max(np.abs(cand - t))) if t.size else 0.0
        t, f = cand, fc
        history.append(f)
        if move < cfg.convergence_tol:
            converged = True
            break
        if cfg.step_rule == "adaptive":
            step = min(step * cfg.growth, 1.0)
    return t, f, n, converged, history


def _ase_factor(net):
    return net.lambda_b * analytic.PER_KM2 * math.log2(1.0 + net.tau)


def _backhaul_only(alloc, net, content, scheme):
    placement = CachePlacement({f: 0.0 for f in alloc.cached})
    obj = analytic.stp_total(alloc, placement, net, content).ase
    return Solution(alloc, placement, obj, 0, True, scheme)


def optimize_placement_exact(alloc: FileAllocation, net: NetworkParams, content: ContentParams, cfg: OptimizerConfig = OptimizerConfig()) -> Solution:
    """Cache placement for a fixed allocation by gradient projection on the exact STP."""
    files = list(alloc.cached)
    if not files:
        return _backhaul_only(alloc, net, content, "exact_placement")
    q = content.q[np.array(files) - 1]
    K = _ase_factor(net)

    def objective(t):
        return K * float(np.dot(q, analytic.stp_cached_exact(t, net)))

    kind = "exact" if cfg.direction == "exact" else "norm"

    def gradient(t):
        return K * q * analytic.stp_cached_exact_grad(t, net, kind=kind)

    t0 = np.full(len(files), 1.0 / len(files))
    t, _, iters, conv, hist = projected_gradient_ascent(objective, gradient, t0, content.C, cfg)
    placement = CachePlacement.from_vector(files, t)
    total = analytic.stp_total(alloc, placement, net, content).ase
    g_exact = analytic.stp_cached_exact_grad(t, net, kind="exact")
    g_norm = analytic.stp_cached_exact_grad(t, net, kind="norm")
    residual = float(np.max(np.abs(g_norm - g_exact) / np.maximum(np.abs(g_exact), 1e-300)))
    return Solution(
        alloc, placement, total, iters, conv, "exact_placement", history=hist,
        info={"direction": cfg.direction, "norm_vs_derivative_residual": residual},
    )


def optimize_placement_single_antenna(alloc: FileAllocation, net: NetworkParams, content: ContentParams) -> Solution:
    """Water-filling placement for ``N = 1``.

    ``t_f = clip((sqrt(K q_f zeta2 / u) - zeta2) / zeta1, 0, 1)`` with the dual
    variable ``u`` found by bisection on the budget ``sum t_f = C``.
    """
    if net.N != 1:
        raise DomainError(f"closed-form placement needs N=1, got N={net.N}")
    files = list(alloc.cached)
    if not files:
        return _backhaul_only(alloc, net, content, "single_antenna_placement")
    z1, z2 = net.coeffs.zeta1, net.coeffs.zeta2
    K = _ase_factor(net)
    q = content.q[np.array(files) - 1]
    C = content.C

    def t_of(u):
        return np.clip((np.sqrt(K * q * z2 / u) - z2) / z1, 0.0, 1.0)

    if len(files) <= C:
        t, u = np.ones(len(files)), 0.0
    elif C == 0:
        t, u = np.zeros(len(files)), math.inf
    else:
        # sum t(u) is non-increasing in u; bracket in log space
        lo, hi = math.log(K * q.min() * z2 / (z1 + z2) ** 2) - 1.0, math.log(K * q.max() / z2) + 1.0
        for _ in range(300):
            mid = 0.5 * (lo + hi)
            s = t_of(math.exp(mid)).sum()
            if abs(s - C) < 1e-13:
                lo = hi = mid
                break
            if s > C:
                lo = mid
            else:
                hi = mid
        u = math.exp(hi)
        t = t_of(u)
    placement = CachePlacement.from_vector(files, t)
    total = analytic.stp_total(alloc, placement, net, content).ase
    # KKT residual on interior coordinates: K q z2 / (z1 t + z2)^2 == u
    interior = (t > 1e-12) & (t < 1 - 1e-12)
    grad = K * q * z2 / (z1 * t + z2) ** 2
    kkt = float(np.max(np.abs(grad[interior] - u)) / u) if interior.any() and u > 0 else 0.0
    return Solution(alloc, placement, total, 0, True, "single_antenna_placement", info={"dual": u, "kkt_residual": kkt})


def _inner(alloc, net, content, cfg):
    if len(alloc.cached) <= content.C:
        placement = CachePlacement({f: 1.0 for f in alloc.cached})
        return Solution(alloc, placement, analytic.stp_total(alloc, placement, net, content).ase, 0, True)
    if net.N == 1:
        return optimize_placement_single_antenna(alloc, net, content)
    return optimize_placement_exact(alloc, net, content, cfg)


def enumeration_count(F: int, sizes) -> int:
    return sum(math.comb(F, k) for k in sizes)


def optimize_full(net: NetworkParams, content: ContentParams, cfg: OptimizerConfig = OptimizerConfig(), prune: bool = True) -> Solution:
    """Search cached sets of size ``C..F-B`` (all sizes when ``prune=False``).

    The inner placement solver is the closed form at ``N = 1`` and gradient
    projection otherwise.  Ties keep the first candidate in lexicographic order.
    """
    F, B, C = content.F, content.B, content.C
    sizes = range(C, F - B + 1) if prune else range(0, F + 1)
    count = enumeration_count(F, sizes)
    if count > ENUMERATION_LIMIT:
        raise DomainError(
            f"{count} candidate cached sets exceed {ENUMERATION_LIMIT}; use optimize_asymptotic"
        )
    candidates = [
        FileAllocation.from_cached(subset, F)
        for k in sizes
        for subset in itertools.combinations(range(1, F + 1), k)
    ]

    def solve(alloc):
        return _inner(alloc, net, content, cfg)

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(solve, candidates))
    else:
        results = [solve(a) for a in candidates]
    best = None
    for sol in results:
        if best is None or sol.objective > best.objective:
            best = sol
    best.scheme = "exact_opt"
    best.info = dict(best.info, candidates=len(candidates))
    return best


# ---------------------------------------------------------------- asymptotic


def asymptotic_objective(alloc: FileAllocation, placement: CachePlacement, net: NetworkParams, content: ContentParams) -> float:
    return analytic.ase_upper_asymptotic(alloc, placement, net, content)


def optimize_asymptotic_placement(alloc: FileAllocation, net: NetworkParams, content: ContentParams, cfg: OptimizerConfig = OptimizerConfig()) -> Solution:
    """Gradient projection on the asymptotic upper bound for a fixed allocation."""
    files = list(alloc.cached)
    if not files:
        placement = CachePlacement({})
        return Solution(alloc, placement, asymptotic_objective(alloc, placement, net, content), 0, True, "asym_placement")
    q = content.q[np.array(files) - 1]
    K = _ase_factor(net)

    def objective(t):
        return K * float(np.dot(q, analytic.stp_cached_upper(t, net)))

    def gradient(t):
        return K * q * analytic.stp_cached_upper_grad(t, net)

    t0 = np.full(len(files), 1.0 / len(files))
    t, _, iters, conv, hist = projected_gradient_ascent(objective, gradient, t0, content.C, cfg)
    placement = CachePlacement.from_vector(files, t)
    obj = asymptotic_objective(alloc, placement, net, content)
    return Solution(alloc, placement, obj, iters, conv, "asym_placement", history=hist)


def optimize_asymptotic(net: NetworkParams, content: ContentParams, cfg: OptimizerConfig = OptimizerConfig()) -> Solution:
    """Backhaul the ``B`` most popular files, cache the rest, optimize ``t`` on the bound."""
    F, B = content.F, content.B
    alloc = FileAllocation.from_backhaul(range(1, min(B, F) + 1), F)
    sol = optimize_asymptotic_placement(alloc, net, content, cfg)
    sol.scheme = "asym_opt"
    return sol


# ---------------------------------------------------------------- baselines


def baseline_marginals(kind: str, content: ContentParams) -> np.ndarray:
    """Per-file probability that a BS holds a file under UC or IID selection of ``B + C`` files.

    UC: ``(B + C) / F`` for every file.  IID: proportional to popularity,
    capped at one, with the excess redistributed so the marginals sum to ``B + C``.
    """
    M = content.B + content.C
    F = content.F
    if kind == "UC":
        return np.full(F, M / F)
    if kind == "IID":
        q = content.q
        capped = np.zeros(F, dtype=bool)
        p = np.zeros(F)
        for _ in range(F + 1):
            free = ~capped
            budget = M - capped.sum()
            p = np.where(capped, 1.0, q * budget / q[free].sum() if free.any() else 0.0)
            over = free & (p > 1.0)
            if not over.any():
                break
            capped |= over
        return np.minimum(p, 1.0)
    raise DomainError(f"unknown baseline kind {kind!r}")


def baseline_scheme(kind: str, net: NetworkParams, content: ContentParams) -> Solution:
    """MPC, UC or IID.

    MPC backhauls the ``B`` most popular files and caches the next ``C`` with
    probability one.  UC and IID let every BS hold a random set of ``B + C``
    files; a BS serves any file it holds, so they are evaluated as random
    caching with capacity ``B + C`` over the whole library (``solution.content``
    carries these effective parameters).
    """
    F, B, C = content.F, content.B, content.C
    if kind == "MPC":
        alloc = FileAllocation.from_backhaul(range(1, B + 1), F)
        placement = CachePlacement({f: (1.0 if f <= B + C else 0.0) for f in alloc.cached})
        obj = analytic.stp_total(alloc, placement, net, content).ase
        return Solution(alloc, placement, obj, 0, True, "MPC")
    if kind in ("UC", "IID"):
        effective = ContentParams(F, content.gamma, B + C, 0, q=content.q)
        alloc = FileAllocation(tuple(range(1, F + 1)), ())
        p = baseline_marginals(kind, content)
        placement = CachePlacement.from_vector(alloc.cached, p)
        obj = analytic.stp_total(alloc, placement, net, effective).ase
        return Solution(alloc, placement, obj, 0, True, kind, content=effective)
    raise DomainError(f"unknown baseline kind {kind!r}")
