import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randcache import analytic
from randcache.analytic import NetworkParams
from randcache.content import CachePlacement, ContentParams, FileAllocation, validate
from randcache.optimize import (
    ENUMERATION_LIMIT,
    OptimizerConfig,
    asymptotic_objective,
    baseline_marginals,
    baseline_scheme,
    enumeration_count,
    optimize_asymptotic,
    optimize_full,
    optimize_placement_exact,
    optimize_placement_single_antenna,
    project_capped_simplex,
    projected_gradient_ascent,
)
from randcache.specfun import DomainError

vectors = st.lists(st.floats(-3, 3), min_size=1, max_size=15)


@settings(max_examples=200, deadline=None)
@given(x=vectors, C=st.floats(0, 10), data=st.data())
def test_projection_is_euclidean_projection(x, C, data):
    x = np.array(x)
    p = project_capped_simplex(x, C)
    assert np.all(p >= 0) and np.all(p <= 1)
    assert p.sum() <= C + 1e-9
    # variational inequality: (x - p) . (y - p) <= 0 for every feasible y
    y = np.array(data.draw(st.lists(st.floats(0, 1), min_size=len(x), max_size=len(x))))
    if y.sum() > C:
        y = y * (C / y.sum()) if y.sum() > 0 else y
    assert np.dot(x - p, y - p) <= 1e-7
    assert project_capped_simplex(p, C) == pytest.approx(p, abs=1e-9)


def test_projection_examples():
    assert project_capped_simplex([0.5, 0.2], 2) == pytest.approx([0.5, 0.2])
    assert project_capped_simplex([2.0, -1.0], 2) == pytest.approx([1.0, 0.0])
    p, u = project_capped_simplex([1.0, 1.0, 1.0], 1.5, return_shift=True)
    assert p == pytest.approx([0.5] * 3) and u == pytest.approx(0.5)
    with pytest.raises(DomainError):
        project_capped_simplex([0.1], -1)


def test_config_validation():
    with pytest.raises(DomainError):
        OptimizerConfig(step_rule="other")
    with pytest.raises(DomainError):
        OptimizerConfig(direction="other")
    with pytest.raises(DomainError):
        OptimizerConfig(max_iters=0)


def test_ascent_history_is_monotone():
    target = np.array([0.9, 0.1, 0.6])

    def f(t):
        return -float(np.sum((t - target) ** 2))

    def g(t):
        return -2 * (t - target)

    t, val, n, conv, hist = projected_gradient_ascent(f, g, np.zeros(3), 1.0, OptimizerConfig())
    assert conv
    assert all(b >= a for a, b in zip(hist, hist[1:]))
    # projection of target onto {sum <= 1}
    assert t == pytest.approx(project_capped_simplex(target, 1.0), abs=1e-5)


def _net(N, lu=1e-3, tau=1.0):
    return NetworkParams(1e-4, lu, 4.0, N, tau)


def test_single_antenna_gradient_matches_closed_form():
    content = ContentParams(6, 0.6, 2, 2)
    alloc = FileAllocation.from_cached([3, 4, 5, 6], 6)
    a = optimize_placement_exact(alloc, _net(1), content)
    b = optimize_placement_single_antenna(alloc, _net(1), content)
    assert a.objective == pytest.approx(b.objective, abs=1e-6)
    assert a.placement.vector([3, 4, 5, 6]) == pytest.approx(b.placement.vector([3, 4, 5, 6]), abs=1e-4)
    assert b.info["kkt_residual"] < 1e-8
    assert sum(b.placement.t.values()) == pytest.approx(2.0)


def test_sqrt_rule_is_available():
    content = ContentParams(6, 0.6, 2, 2)
    alloc = FileAllocation.from_cached([3, 4, 5, 6], 6)
    sol = optimize_placement_exact(alloc, _net(2), content, OptimizerConfig(step_rule="sqrt", max_iters=200))
    assert validate(sol.alloc, sol.placement, content) == []


def test_paper_direction_is_feasible():
    content = ContentParams(6, 0.6, 2, 2)
    alloc = FileAllocation.from_cached([3, 4, 5, 6], 6)
    sol = optimize_placement_exact(alloc, _net(4), content, OptimizerConfig(direction="paper"))
    assert validate(sol.alloc, sol.placement, content) == []
    assert sol.info["direction"] == "paper"


@pytest.mark.parametrize("seed", range(10))
def test_exact_placement_beats_uniform(seed):
    rng = np.random.default_rng(seed)
    F = int(rng.integers(5, 15))
    C = int(rng.integers(1, F - 2))
    B = int(rng.integers(0, F - C))
    content = ContentParams(F, float(rng.uniform(0.2, 1.5)), C, B)
    net = NetworkParams(1e-4, float(10 ** rng.uniform(-4, -2)), 4.0, int(rng.integers(2, 6)), float(10 ** rng.uniform(-0.5, 0.5)))
    cached = list(range(B + 1, F + 1))
    alloc = FileAllocation.from_cached(cached, F)
    sol = optimize_placement_exact(alloc, net, content)
    uniform = CachePlacement({f: C / len(cached) for f in cached})
    assert sol.objective >= analytic.stp_total(alloc, uniform, net, content).ase - 1e-9
    assert validate(sol.alloc, sol.placement, content) == []


def test_optimize_full_small():
    content = ContentParams(5, 0.8, 1, 1)
    sol = optimize_full(_net(2), content)
    ref = optimize_full(_net(2), content, prune=False)
    assert sol.alloc == ref.alloc
    assert sol.objective == pytest.approx(ref.objective)
    assert sol.info["candidates"] == enumeration_count(5, range(1, 5))


def test_optimize_full_limit():
    content = ContentParams(40, 0.8, 10, 10)
    with pytest.raises(DomainError):
        optimize_full(_net(1), content)
    assert enumeration_count(40, range(10, 31)) > ENUMERATION_LIMIT


def test_optimize_full_threads_identical():
    content = ContentParams(6, 0.6, 2, 2)
    a = optimize_full(_net(2), content)
    b = optimize_full(_net(2), content, OptimizerConfig(threads=3))
    assert a.alloc == b.alloc and a.objective == b.objective


def test_asymptotic_allocation_and_bound():
    content = ContentParams(20, 0.8, 5, 3)
    sol = optimize_asymptotic(_net(4, lu=5e-3), content)
    assert sol.alloc.backhaul == (1, 2, 3)
    assert sum(sol.placement.t.values()) == pytest.approx(5.0, abs=1e-6)
    # the placement favours popular files
    t = sol.placement.vector(sol.alloc.cached)
    assert np.all(np.diff(t) <= 1e-9)


def _random_instance(seed):
    rng = np.random.default_rng(100 + seed)
    F = int(rng.integers(10, 40))
    C = int(rng.integers(1, F // 3))
    B = int(rng.integers(1, F // 3))
    content = ContentParams(F, float(rng.uniform(0.2, 1.5)), C, B)
    net = NetworkParams(1e-4, 5e-3, float(rng.uniform(3, 5)), int(rng.integers(1, 9)), 1.0)
    return net, content


def _violations(kinds):
    bad = []
    for seed in range(50):
        net, content = _random_instance(seed)
        best = optimize_asymptotic(net, content).objective
        for kind in kinds:
            b = baseline_scheme(kind, net, content)
            metric = asymptotic_objective(b.alloc, b.placement, net, b.content or content)
            if best < metric - 1e-9:
                bad.append((seed, kind, round(best, 3), round(metric, 3)))
    return bad


def test_asymptotic_beats_mpc_on_its_metric():
    assert _violations(["MPC"]) == []


def test_asymptotic_beats_random_baselines_on_its_metric():
    # UC/IID give every BS B+C content-centric slots with no backhaul contention,
    # which lies outside the allocation/placement space the optimum ranges over
    bad = _violations(["UC", "IID"])
    assert bad == [], f"{len(bad)} of 100 comparisons lost: {bad}"


def test_baseline_marginals():
    content = ContentParams(10, 2.0, 3, 2)
    uc = baseline_marginals("UC", content)
    assert uc == pytest.approx([0.5] * 10)
    iid = baseline_marginals("IID", content)
    assert iid.sum() == pytest.approx(5.0)
    assert np.all(iid <= 1.0) and np.all(np.diff(iid) <= 1e-12)
    assert iid[0] == 1.0  # the heaviest file is capped
    with pytest.raises(DomainError):
        baseline_marginals("MPC", content)


def test_baseline_schemes():
    content = ContentParams(10, 1.0, 3, 2)
    net = _net(2)
    mpc = baseline_scheme("MPC", net, content)
    assert mpc.alloc.backhaul == (1, 2)
    assert [f for f, v in mpc.placement.t.items() if v == 1.0] == [3, 4, 5]
    uc = baseline_scheme("UC", net, content)
    assert uc.content.C == 5 and uc.content.B == 0
    with pytest.raises(DomainError):
        baseline_scheme("XYZ", net, content)


def test_uc_independent_of_popularity():
    net = _net(8, lu=5e-3)
    vals = [baseline_scheme("UC", net, ContentParams(50, g, 5, 3)).objective for g in (0.2, 0.8, 1.4)]
    assert max(vals) - min(vals) < 1e-9 * max(vals)
