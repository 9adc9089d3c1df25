"""Stochastic-geometry simulator for the STP and ASE.

Each realization places BSs as a PPP on a disk around the typical user at the
origin, draws the requested file from the popularity profile, picks the
serving BS (nearest BS holding the file for cached files, nearest BS for
backhaul files) and tests the SIR or SINR against the threshold.

Realizations are grouped in fixed-size batches.  Batch ``b`` draws from its
own generator seeded with ``SeedSequence([seed, b])``, so results do not
depend on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from . import load
from .analytic import PER_KM2, NetworkParams
from .content import CachePlacement, ContentParams, FileAllocation, holds_file, segment_lengths, segment_starts, validate
from .specfun import DomainError

__all__ = [
    "SimConfig",
    "Estimate",
    "sample_ppp",
    "mrt_equivalent_gains",
    "simulate_stp",
    "simulate_ase",
    "default_window_radius",
]

BATCH_SIZE = 2048
MISSING_WARN_FRACTION = 0.01


def default_window_radius(lambda_b: float) -> float:
    """About twenty mean nearest-BS distances."""
    return 20.0 / math.sqrt(math.pi * lambda_b)


@dataclass(frozen=True)
class SimConfig:
    """Monte Carlo settings.

    ``metric`` is ``"SIR"`` or ``"SINR"``.  ``load_mode="pmf"`` draws the number of
    requested backhaul files from the analytic load pmf; ``"users"`` drops a user
    PPP and counts the distinct backhaul files requested in the serving cell.
    """

    realizations: int
    seed: int = 0
    metric: str = "SIR"
    window_radius: Optional[float] = None
    threads: int = 1
    load_mode: str = "pmf"
    batch_size: int = BATCH_SIZE

    def __post_init__(self):
        if int(self.realizations) != self.realizations or self.realizations < 1:
            raise DomainError(f"realizations must be a positive integer, got {self.realizations}")
        if self.window_radius is not None and not self.window_radius > 0:
            raise DomainError(f"window radius must be positive, got {self.window_radius}")
        if self.metric not in ("SIR", "SINR"):
            raise DomainError(f"metric must be SIR or SINR, got {self.metric!r}")
        if self.load_mode not in ("pmf", "users"):
            raise DomainError(f"load mode must be 'pmf' or 'users', got {self.load_mode!r}")
        if self.threads < 1 or self.batch_size < 1:
            raise DomainError("threads and batch_size must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")


@dataclass
class Estimate:
    """Sample mean with standard error ``std / sqrt(n)``."""

    mean: float
    stderr: float
    n: int
    warning: Optional[str] = None
    per_file: dict = field(default_factory=dict, repr=False)

    def scaled(self, factor: float) -> "Estimate":
        return Estimate(self.mean * factor, self.stderr * factor, self.n, self.warning, self.per_file)


def sample_ppp(lam: float, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Homogeneous PPP of density ``lam`` on the disk of the given radius; shape ``(n, 2)``."""
    if not (lam > 0 and radius > 0):
        raise DomainError("density and radius must be positive")
    n = rng.poisson(lam * math.pi * radius**2)
    r = radius * np.sqrt(rng.random(n))
    phi = rng.uniform(0.0, 2.0 * math.pi, n)
    return np.column_stack((r * np.cos(phi), r * np.sin(phi)))


def mrt_equivalent_gains(N: int, size: int, rng: np.random.Generator):
    """Serving and interfering gains from explicit Rayleigh channels and MRT beams.

    The served user's gain is ``|h|^2`` for ``h ~ CN(0, I_N)``; an interfering
    BS beams towards its own user, so the gain is ``|h^H w|^2`` with ``w`` an
    independent unit vector.  Returns ``(g_serving, g_interf)``.
    """

    def cn(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)

    h = cn(size, N)
    g_serving = np.sum(np.abs(h) ** 2, axis=1)
    h_i, v = cn(size, N), cn(size, N)
    w = v / np.linalg.norm(v, axis=1, keepdims=True)
    g_interf = np.abs(np.sum(np.conj(h_i) * w, axis=1)) ** 2
    return g_serving, g_interf


class _Plan:
    """Per-file lookup tables shared by all batches."""

    def __init__(self, alloc, placement, net, content, sim):
        F = content.F
        self.F = F
        self.q = content.q
        self.cached = np.zeros(F + 1, dtype=bool)
        self.start = np.zeros(F + 1)
        self.length = np.zeros(F + 1)
        files = list(alloc.cached)
        if files:
            t = np.clip(placement.vector(files), 0.0, 1.0)
            self.cached[files] = True
            self.start[files] = segment_starts(t)
            self.length[files] = segment_lengths(t)
        self.B = content.B
        self.backhaul = list(alloc.backhaul)
        self.cdf = {}
        if sim.load_mode == "pmf":
            for f in self.backhaul:
                pmf = load.backhaul_load_pmf(f, self.backhaul, self.q, net.lambda_u, net.lambda_b)
                self.cdf[f] = np.cumsum(pmf)
        self.is_backhaul = np.zeros(F + 1, dtype=bool)
        self.is_backhaul[self.backhaul] = True
        self.radius = sim.window_radius or default_window_radius(net.lambda_b)
        self.net = net
        self.sim = sim


def _admit_pmf(plan, files, rng):
    ok = np.zeros(len(files), dtype=bool)
    u_load, u_admit = rng.random(len(files)), rng.random(len(files))
    for j, f in enumerate(files):
        cdf = plan.cdf[f]
        k = min(int(np.searchsorted(cdf, u_load[j] * cdf[-1], side="left")) + 1, len(cdf))
        ok[j] = u_admit[j] < plan.B / max(k, plan.B)
    return ok


def _admit_users(plan, files, radii, rng):
    # the tagged user's own request is f; count distinct backhaul files asked for in its cell
    net = plan.net
    ok = np.zeros(len(files), dtype=bool)
    R = plan.radius
    for j, f in enumerate(files):
        r = radii[j]
        r = r[np.isfinite(r)]
        phi = rng.uniform(0.0, 2.0 * math.pi, len(r))
        bs = np.column_stack((r * np.cos(phi), r * np.sin(phi)))
        serving = int(np.argmin(r))
        users = sample_ppp(net.lambda_u, R, rng)
        requested = {f}
        if len(users):
            _, cell = cKDTree(bs).query(users)
            mine = users[cell == serving]
            if len(mine):
                req = rng.choice(plan.F, size=len(mine), p=plan.q) + 1
                requested.update(int(x) for x in req if plan.is_backhaul[x])
        ok[j] = rng.random() < plan.B / max(len(requested), plan.B)
    return ok


def _run_batch(plan: _Plan, batch_idx: int, m: int):
    net, sim = plan.net, plan.sim
    rng = np.random.default_rng(np.random.SeedSequence([sim.seed, batch_idx]))
    R = plan.radius
    files = rng.choice(plan.F, size=m, p=plan.q) + 1
    counts = rng.poisson(net.lambda_b * math.pi * R**2, size=m)
    kmax = max(int(counts.max()), 1)
    valid = np.arange(kmax)[None, :] < counts[:, None]
    radii = np.where(valid, R * np.sqrt(rng.random((m, kmax))), np.inf)
    u_cache = rng.random((m, kmax))
    g_int = rng.exponential(size=(m, kmax))
    g_serv = rng.gamma(net.N, size=m)

    cached = plan.cached[files]
    holder = holds_file(u_cache, plan.start[files][:, None], plan.length[files][:, None])
    candidate = valid & np.where(cached[:, None], holder, True)
    cand_r = np.where(candidate, radii, np.inf)
    serving = np.argmin(cand_r, axis=1)
    rows = np.arange(m)
    r1 = cand_r[rows, serving]
    found = np.isfinite(r1)

    with np.errstate(divide="ignore"):
        power = np.where(valid, radii ** (-net.beta), 0.0) * g_int
    interference = power.sum(axis=1) - np.where(found, power[rows, serving], 0.0)
    signal = np.where(found, r1 ** (-net.beta) * g_serv, 0.0)
    if sim.metric == "SIR":
        success = found & (signal > net.tau * interference)
    else:
        noise = net.sigma_n2 / net.P_tx
        success = found & (signal > net.tau * (interference + noise))

    bh = ~cached & plan.is_backhaul[files]
    if bh.any() and plan.B < len(plan.backhaul):
        idx = np.flatnonzero(bh)
        if sim.load_mode == "pmf":
            admitted = _admit_pmf(plan, files[idx], rng)
        else:
            admitted = _admit_users(plan, files[idx], radii[idx], rng)
        success[idx] &= admitted

    req = np.bincount(files, minlength=plan.F + 1)
    hit = np.bincount(files[success], minlength=plan.F + 1)
    missing = int(np.sum(cached & ~found))
    return int(success.sum()), req, hit, missing, int(cached.sum())


def _batches(n, size):
    full, rest = divmod(n, size)
    return [(b, size) for b in range(full)] + ([(full, rest)] if rest else [])


def simulate_stp(
    alloc: FileAllocation,
    placement: CachePlacement,
    net: NetworkParams,
    content: ContentParams,
    sim: SimConfig,
) -> Estimate:
    """Empirical STP (success fraction) with its standard error and per-file counts.

    ``per_file`` maps each file to ``(requests, successes)``.  A cached request
    with no holder inside the window counts as a failure; if that happens in
    more than 1% of cached requests the estimate carries a warning.
    """
    problems = validate(alloc, placement, content)
    if problems:
        raise DomainError("infeasible allocation/placement: " + "; ".join(problems))
    plan = _Plan(alloc, placement, net, content, sim)
    jobs = _batches(int(sim.realizations), sim.batch_size)
    if sim.threads > 1:
        with ThreadPoolExecutor(sim.threads) as pool:
            results = list(pool.map(lambda job: _run_batch(plan, *job), jobs))
    else:
        results = [_run_batch(plan, *job) for job in jobs]

    n = int(sim.realizations)
    succ = sum(r[0] for r in results)
    req = sum(r[1] for r in results)
    hit = sum(r[2] for r in results)
    missing = sum(r[3] for r in results)
    cached_requests = sum(r[4] for r in results)

    p = succ / n
    std = math.sqrt(p * (1.0 - p) * n / (n - 1)) if n > 1 else 0.0
    warning = None
    if cached_requests and missing / cached_requests > MISSING_WARN_FRACTION:
        warning = (
            f"no holder inside the window for {missing / cached_requests:.2%} of cached requests; "
            "increase window_radius"
        )
    per_file = {f: (int(req[f]), int(hit[f])) for f in range(1, content.F + 1)}
    return Estimate(p, std / math.sqrt(n), n, warning, per_file)


def simulate_ase(
    alloc: FileAllocation,
    placement: CachePlacement,
    net: NetworkParams,
    content: ContentParams,
    sim: SimConfig,
) -> Estimate:
    """Empirical ASE in bit/s/Hz/km^2."""
    est = simulate_stp(alloc, placement, net, content, sim)
    return est.scaled(net.lambda_b * PER_KM2 * math.log2(1.0 + net.tau))
