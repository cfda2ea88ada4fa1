import math

import numpy as np
import pytest

from ehfbl.bounds import ChannelSpec, Infeasible, corollary_save, theorem_log_M
from ehfbl.optimizer import SearchSpec, m_ladder, optimize

P1 = ChannelSpec(1.0)


def test_m_ladder():
    lad = m_ladder(1000, 1)
    assert lad[0] == 0 and lad[-1] == 500
    assert lad == sorted(set(lad))
    assert m_ladder(3, 2) == [0]


def test_single_point_grid():
    s = SearchSpec([0.05], [300], [0.5], refine=False)
    res = optimize(P1, 10 ** 6, 0.02, s)
    assert (res.config.rho, res.config.m, res.config.eps1) == (0.05, 300, 0.01)
    assert res.bound.log_M == theorem_log_M(P1, res.config).log_M
    assert len(res.trace) == 1


def test_all_infeasible():
    with pytest.raises(Infeasible):
        optimize(P1, 50, 0.02, SearchSpec(refine=False))


def test_bad_search_values():
    with pytest.raises(ValueError):
        optimize(P1, 1000, 0.02, SearchSpec([0.8]))
    with pytest.raises(ValueError):
        optimize(P1, 1000, 0.02, SearchSpec(eps1_fractions=[1.0]))
    with pytest.raises(ValueError):
        optimize(P1, 1000, 1.5)


def test_dominates_grid_and_corollary():
    n, eps = 10 ** 5, 0.05
    cp = corollary_save(P1, n, eps / 2, eps / 2)
    s = SearchSpec(list(np.geomspace(1e-3, 0.3, 20)) + [cp.rho], [0, cp.m, 2 * cp.m], [0.5, 0.7])
    res = optimize(P1, n, eps, s)
    grid = [t["log_M"] for t in res.trace if t["stage"] == "grid" and t["log_M"] is not None]
    assert res.bound.log_M >= max(grid)
    if cp.theorem.feasible:
        assert res.bound.log_M >= cp.theorem.log_M
    assert res.bound.rate < 0.5 * math.log(2)


def test_rerun_is_bitwise_identical():
    s = SearchSpec(np.geomspace(1e-3, 0.3, 12), [0, 100, 400], [0.3, 0.6])
    a = optimize(P1, 10 ** 5, 0.05, s)
    b = optimize(P1, 10 ** 5, 0.05, s)
    assert a.trace == b.trace and a.config == b.config


def test_tie_break_prefers_smaller_rho_then_m():
    # at gamma > 0 the m saving blocks trade against gamma; duplicated grid
    # values must resolve to one well-defined point
    s = SearchSpec([0.02, 0.02], [10, 10], [0.5], refine=False)
    res = optimize(P1, 10 ** 5, 0.05, s)
    assert res.config.rho == 0.02 and res.config.m == 10
