import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ehfbl.specmath import (ConfidenceEstimate, QuadratureError, RandomStream, binomial_lower,
                            binomial_upper, gauss_expect, inv_phi, map_trial_chunks, phi,
                            uniform_rows, verdict)


def test_phi_reference_points(oracles):
    assert phi(0.0) == 0.5
    assert abs(phi(1.959964) - oracles["phi_1.959964"]) < 1e-12
    assert phi(-8.0) < 1e-15
    assert abs(phi(-8.0) - oracles["phi_-8"]) < 1e-20


def test_phi_vectorized_matches_scalar():
    xs = np.linspace(-7, 7, 57)
    assert np.allclose(phi(xs), [phi(float(x)) for x in xs], rtol=0, atol=1e-15)


@given(st.floats(-30, 30))
def test_phi_symmetry_and_range(x):
    assert 0.0 <= phi(x) <= 1.0
    assert abs(phi(-x) + phi(x) - 1.0) <= 1e-12


@given(st.floats(-10, 10), st.floats(0, 5))
def test_phi_monotone(x, d):
    assert phi(x + d) >= phi(x)


def test_inv_phi_reference_points(oracles):
    assert inv_phi(0.5) == 0.0
    assert abs(inv_phi(0.975) - oracles["inv_phi_0.975"]) < 1e-9
    assert abs(inv_phi(0.01) - oracles["inv_phi_0.01"]) < 1e-9


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_inv_phi_domain(p):
    with pytest.raises(ValueError):
        inv_phi(p)


@given(st.floats(1e-300, 1 - 1e-16, exclude_max=True))
def test_inv_phi_roundtrip(p):
    assert abs(phi(inv_phi(p)) - p) <= 1e-10


@given(st.floats(-6, 6))
def test_phi_then_inv_phi(x):
    assert abs(inv_phi(phi(x)) - x) <= 1e-8


def test_gauss_expect_normal_moments():
    want = [1, 0, 1, 0, 3, 0, 15]
    for k, w in enumerate(want):
        assert abs(gauss_expect(lambda x, z, k=k: x ** k) - w) < 1e-10
    assert abs(gauss_expect(lambda x, z: z * z) - 1.0) < 1e-10
    assert abs(gauss_expect(lambda x, z: x * z) - 0.0) < 1e-10


def test_gauss_expect_abs_cube(oracles):
    assert abs(gauss_expect(lambda x, z: np.abs(x) ** 3, tol=1e-6) - oracles["abs_moment_3"]) < 1e-5


def test_gauss_expect_nonconvergence():
    # a discontinuous integrand cannot meet a tiny tolerance
    with pytest.raises(QuadratureError):
        gauss_expect(lambda x, z: (x > 0.1234).astype(float), tol=1e-14, max_order=64)
    with pytest.raises(ValueError):
        gauss_expect(lambda x, z: x, tol=0)


def test_binomial_bounds(oracles):
    assert abs(binomial_upper(0, 100, 0.99) - oracles["cp_upper_0_100"]) < 1e-12
    assert binomial_upper(100, 100, 0.99) == 1.0
    u = binomial_upper(50, 100, 0.99)
    assert 0.5 < u < 0.63
    assert abs(u - oracles["cp_upper_50_100"]) < 1e-9
    assert binomial_lower(0, 100) == 0.0
    assert binomial_lower(50, 100) < 0.5
    with pytest.raises(ValueError):
        binomial_upper(5, 4)


@given(st.integers(1, 2000), st.data())
@settings(max_examples=60)
def test_confidence_estimate_ordering(trials, data):
    k = data.draw(st.integers(0, trials))
    est = ConfidenceEstimate(trials, k)
    assert 0.0 <= est.lower <= est.p_hat <= est.upper <= 1.0


@given(st.integers(1, 500), st.integers(1, 20))
@settings(max_examples=40)
def test_upper_nonincreasing_in_trials_at_fixed_rate(base, mult):
    # same p_hat, more trials: tighter bound
    a = ConfidenceEstimate(2 * base, base).upper
    b = ConfidenceEstimate(2 * base * (mult + 1), base * (mult + 1)).upper
    assert b <= a + 1e-12


def test_stream_reproducible_and_distinct():
    a = RandomStream(42, 7).uniform(1000)
    b = RandomStream(42, 7).uniform(1000)
    c = RandomStream(42, 8).uniform(1000)
    d = RandomStream(43, 7).uniform(1000)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
    assert np.all((a > 0) & (a < 1))
    # weak independence check between neighbouring substreams
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.15


def test_stream_sequence_is_split_invariant():
    s = RandomStream(3, 1)
    whole = RandomStream(3, 1).normal(10)
    parts = np.concatenate([s.normal(4), s.normal(6)])
    assert np.array_equal(whole, parts)


def test_stream_samples_have_right_law():
    s = RandomStream(11, 0)
    z = s.normal(200_000)
    assert abs(z.mean()) < 0.01 and abs(z.var() - 1) < 0.02
    c = s.chisquare(5, 100_000)
    assert abs(c.mean() - 5) < 0.05
    ints = [s.integers(3) for _ in range(3000)]
    assert set(ints) == {0, 1, 2}


def test_uniform_rows_match_streams():
    rows = uniform_rows(9, [0, 5, 2 ** 63 + 1], 17)
    for r, sid in zip(rows, [0, 5, 2 ** 63 + 1]):
        assert np.array_equal(r, RandomStream(9, sid).uniform(17))


def test_map_trial_chunks_is_thread_invariant(monkeypatch):
    def fn(a, b):
        return float(uniform_rows(1, range(a, b), 3).sum())

    monkeypatch.setenv("EHFBL_THREADS", "1")
    one = map_trial_chunks(fn, 1050, 100)
    monkeypatch.setenv("EHFBL_THREADS", "8")
    eight = map_trial_chunks(fn, 1050, 100)
    assert one == eight
    assert len(one) == 11


def test_verdict_labels():
    assert verdict(ConfidenceEstimate(100, 0), 1.0) == "vacuous"
    assert verdict(ConfidenceEstimate(1000, 0), 0.01) == "certified"
    assert verdict(ConfidenceEstimate(1000, 500), 0.01) == "violated"
    assert verdict(ConfidenceEstimate(100, 0), 0.01) == "inconclusive"
