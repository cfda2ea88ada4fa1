import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehfbl.bounds import (ChannelSpec, Constant, Infeasible, SchemeConfig, SquaredGaussian,
                          TwoPoint)
from ehfbl.ehsim import (EnergyTrace, EscapeProcess, encode_batch, encode_save_transmit,
                         load_energy_trace, mc_escape, mc_mismatch, mc_mismatch_grid,
                         mismatch_counts, sample_energy_trace, trial_draws)
from ehfbl.specmath import RandomStream, phi


def test_trace_sampling_shapes():
    s = RandomStream(3, 0)
    t = sample_energy_trace(Constant(2.0), 10, 3, s)
    assert np.all(t.values == 2.0) and t.n == 10
    t = sample_energy_trace(SquaredGaussian(1.0), 7, 7, s)
    assert len(set(t.values)) == 1
    t = sample_energy_trace(SquaredGaussian(1.0), 10, 4, s)
    assert np.all(t.values[:4] == t.values[0]) and np.all(t.values[8:] == t.values[8])
    assert len(t.heads) == 3
    with pytest.raises(ValueError):
        sample_energy_trace(Constant(1.0), 0, 1, s)


def test_trace_moments(oracles):
    t = sample_energy_trace(SquaredGaussian(1.0), 1_000_000, 1, RandomStream(11, 0))
    assert abs(t.values.mean() - 1) < 0.01
    assert abs((t.values ** 2).mean() - 3) < 0.09


def test_hand_example():
    out = encode_save_transmit([1.0, 2.0], EnergyTrace([2.0, 1.0]), 0)
    assert list(out.transmitted) == [1.0, 0.0]
    assert list(out.mismatch_set) == [1]  # 0-based slot index
    assert list(out.battery) == [1.0, 2.0]


def test_no_energy_and_unlimited_energy():
    x = RandomStream(1, 0).normal(20) + 0.1
    out = encode_save_transmit(x, EnergyTrace(np.zeros(20)), 0)
    assert np.all(out.transmitted == 0) and list(out.mismatch_set) == list(range(20))
    out = encode_save_transmit(x, EnergyTrace(np.full(20, 1e9), 4), 2)
    assert len(out.mismatch_set) == 0
    assert np.all(out.transmitted[:8] == 0) and np.all(out.transmitted[8:] == x[8:])


def test_rejects_empty_transmission_phase():
    with pytest.raises(ValueError):
        encode_save_transmit(np.ones(10), EnergyTrace(np.ones(10), 5), 2)
    with pytest.raises(ValueError):
        encode_save_transmit(np.ones(10), EnergyTrace(np.ones(9)), 0)
    with pytest.raises(ValueError):
        EnergyTrace([-1.0])


@given(st.integers(1, 60), st.integers(1, 8), st.integers(0, 2 ** 31), st.floats(0.05, 3.0))
@settings(max_examples=150, deadline=None)
def test_encoder_invariants(n, L, seed, S):
    s = RandomStream(seed, 0)
    nb = -(-n // L)
    m = int(s.integers(nb))
    trace = sample_energy_trace(SquaredGaussian(1.0), n, L, s)
    x = math.sqrt(S) * s.normal(n)
    out = encode_save_transmit(x, trace, m)
    tx = out.transmitted
    # energy feasibility at every prefix
    assert np.all(np.cumsum(tx * tx) <= np.cumsum(trace.values) + 1e-9)
    assert np.all(out.battery >= -1e-9)
    assert np.all(tx[:m * L] == 0)
    changed = np.flatnonzero(tx != x)
    assert np.all(tx[changed] == 0)
    Q = set(out.mismatch_set.tolist())
    assert Q == {k for k in changed if k >= m * L} | {k for k in Q if x[k] == 0}
    for k in Q:
        b = k // L
        assert set(range(b * L, min(b * L + L, n))) <= Q
    # the batch encoder agrees with the reference
    sent, mism = encode_batch(x[None], trace.heads[None], n, L, m)
    assert np.array_equal(sent[0], tx)
    assert np.array_equal(np.flatnonzero(mism[0]), out.mismatch_set)


def test_trial_draws_match_streams():
    parts = [(SquaredGaussian(2.0), 3), ("normal", 5), ("uniform", 2), (Constant(1.0), 4)]
    rows = trial_draws(9, 4, 7, parts)
    for r, i in enumerate(range(4, 7)):
        s = RandomStream(9, i)
        assert np.array_equal(rows[0][r], SquaredGaussian(2.0).sample(s, 3))
        assert np.array_equal(rows[1][r], s.normal(5))
        assert np.array_equal(rows[2][r], s.uniform(2))
        assert np.all(rows[3][r] == 1.0)
    with pytest.raises(ValueError):
        trial_draws(1, 0, 1, [("cauchy", 1)])


def test_counts_match_reference_encoder():
    spec = ChannelSpec(1.0, L=3)
    n, m, S = 40, 2, 0.8
    counts = mismatch_counts(spec, n, [(m, S)], 50, seed=17)[0]
    for i in range(50):
        s = RandomStream(17, i)
        trace = sample_energy_trace(spec.energy, n, 3, s)
        x = math.sqrt(S) * s.normal(n)
        assert counts[i] == len(encode_save_transmit(x, trace, m).mismatch_set)


def test_slot1_oracle(oracles):
    # Constant(P) energy, m = 0: slot 0 fails exactly when X_0^2 > P
    P, rho = 1.0, 0.5
    spec = ChannelSpec(P, Constant(P))
    S = (1 - rho) * P
    want = 2 * phi(-math.sqrt(P / S))
    assert abs(want - oracles["slot1_mismatch_p1_s0.5"]) < 1e-14
    trials = 200_000
    sizes = []
    for a in range(0, trials, 20000):
        (G,) = trial_draws(5, a, a + 20000, [("normal", 1)])
        sizes.append(S * G[:, 0] ** 2 > P)
    p = np.concatenate(sizes).mean()
    assert abs(p - want) < 4 * math.sqrt(want * (1 - want) / trials)
    st_ = mc_mismatch(spec, SchemeConfig(10, 0, rho, 0.01, 0.01), 0.0, 2000, 5)
    assert st_.estimate.p_hat > 0


def test_impossible_gamma_is_certified():
    spec = ChannelSpec(1.0)
    st_ = mc_mismatch(spec, SchemeConfig(10, 0, 0.2, 0.01, 0.01), 20.0, 500, 1)
    assert st_.estimate.successes == 0 and st_.impossible
    assert st_.verdict == "certified"


def test_monotone_in_rho():
    spec = ChannelSpec(1.0)
    rhos = [0.05, 0.1, 0.2, 0.3, 0.4]
    res = mc_mismatch_grid(spec, 400, [0], rhos, [0.0], 2000, seed=3)
    p = [r.estimate.p_hat for r in res]
    assert all(a >= b for a, b in zip(p, p[1:]))


def test_grid_matches_single_calls():
    spec = ChannelSpec(1.0, L=2)
    res = mc_mismatch_grid(spec, 200, [0, 5], [0.1, 0.3], [0.0, 2.0], 300, seed=8)
    k = 0
    for m in (0, 5):
        for rho in (0.1, 0.3):
            for g in (0.0, 2.0):
                one = mc_mismatch(spec, SchemeConfig(200, m, rho, 0.01, 0.01), g, 300, 8)
                assert res[k].as_dict() == one.as_dict()
                k += 1


def test_unlimited_energy_has_no_mismatch():
    trace = EnergyTrace(np.full(100, 1e9))
    st_ = mc_mismatch(ChannelSpec(1.0), SchemeConfig(100, 0, 0.2, 0.01, 0.01), 0.0, 200, 2,
                      trace=trace)
    assert st_.estimate.successes == 0


def test_trace_replay(tmp_path):
    path = tmp_path / "trace.txt"
    path.write_text("1.5\n0\n2.25\n\n")
    t = load_energy_trace(path, 6, 2)
    assert list(t.values) == [1.5, 1.5, 0, 0, 2.25, 2.25]
    with pytest.raises(ValueError):
        load_energy_trace(path, 7, 2)
    spec = ChannelSpec(1.0, L=2)
    a = mc_mismatch(spec, SchemeConfig(6, 0, 0.3, 0.01, 0.01), 0.0, 300, 4, trace=t)
    b = mc_mismatch(spec, SchemeConfig(6, 0, 0.3, 0.01, 0.01), 0.0, 300, 4, trace=t)
    assert a.as_dict() == b.as_dict()
    assert a.estimate.successes > 0
    with pytest.raises(ValueError):
        mc_mismatch(ChannelSpec(1.0), SchemeConfig(6, 0, 0.3, 0.01, 0.01), 0.0, 10, 4, trace=t)


def test_thread_count_does_not_change_results(monkeypatch):
    spec = ChannelSpec(1.0, L=4)
    cfg = SchemeConfig(400, 3, 0.2, 0.01, 0.01)
    out = []
    for threads in ("1", "3"):
        monkeypatch.setenv("EHFBL_THREADS", threads)
        out.append((mc_mismatch(spec, cfg, 0.0, 2500, 12).as_dict(),
                    mc_escape(spec, cfg, 2500, 12, horizon=80).as_dict()))
    assert out[0] == out[1]


def test_escape_process_path():
    proc = EscapeProcess(2, 5)
    b = proc.path([1, 1, 1, 1, 1], [0, 0, 0.5, 4, 0])
    assert list(b) == [1, 2, 2.5, -0.5, -0.5]
    assert proc.stopping_time([1, 1, 1, 1, 1], [0, 0, 0.5, 4, 0]) == 4
    assert proc.stopping_time([1] * 5, [0] * 5) is None
    assert np.all(np.diff(proc.path([1, 2, 0, 0, 0], [9, 9, 0, 0, 0])[:2]) >= 0)
    with pytest.raises(ValueError):
        EscapeProcess(0, 0)


def test_escape_trivial_cases():
    spec = ChannelSpec(1.0, Constant(1.0))
    cfg = SchemeConfig(100, 20, 0.2, 0.01, 0.01)
    st_ = mc_escape(spec, cfg, 500, 1, horizon=20)
    assert st_.estimate.successes == 0 and st_.verdict == "certified"
    st_ = mc_escape(ChannelSpec(1.0), SchemeConfig(100, 0, 0.2, 0.01, 0.01), 500, 1, horizon=50)
    assert st_.bound == 1.0 and st_.verdict == "vacuous"


def test_escape_matches_process():
    spec = ChannelSpec(1.0, TwoPoint(0.5, 1.5, 0.5), L=2)
    S, m, horizon = 0.9, 3, 30
    from ehfbl.ehsim import escape_events
    ev = escape_events(spec, S, [m], horizon, 40, seed=6)[0]
    proc = EscapeProcess(m, horizon)
    for i in range(40):
        s = RandomStream(6, i)
        E = spec.energy.sample(s, horizon)
        g = s.normal(horizon * 2)
        x2 = S * (g * g).reshape(horizon, 2).sum(axis=1)
        assert ev[i] == (proc.path(2 * E, x2)[-1] < 0)


def test_infeasible_plan():
    with pytest.raises(Infeasible):
        mismatch_counts(ChannelSpec(1.0, L=4), 8, [(2, 0.5)], 10, 1)
