import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boostripple import harmonic_model as hm
from boostripple.numerics import mat_exp

BETA = 2 * math.pi * 400
T = 1 / 18000


def test_build_S_structure():
    s = hm.build_S(1.0)
    assert s[2, 1] == 1 and s[1, 2] == -1 and s[4, 3] == 2 and s[6, 5] == 3
    assert not s[0].any() and not s[:, 0].any()
    np.testing.assert_array_equal(np.diag(s), 0)
    np.testing.assert_array_equal(s, -s.T)


def test_build_S_third_harmonic_entry():
    assert hm.build_S(2513.27)[6, 5] == pytest.approx(7539.8, abs=0.1)


def test_build_S_rejects_nonpositive_beta():
    with pytest.raises(ValueError):
        hm.build_S(0.0)


def test_output_map():
    g = hm.output_map()
    np.testing.assert_array_equal(g, [1, 1, 0, 1, 0, 1, 0])
    assert g @ np.eye(7)[0] == 1
    assert np.count_nonzero(g) == 4


def test_output_map_reads_cosine_terms():
    h = hm.HarmonicDecomposition(24.0, (0.2, 0.05, 0.02), (0.3, 1.0, -0.5), BETA)
    x = hm.state_from_harmonics(h)
    expected = 24.0 + 0.2 * math.cos(0.3) + 0.05 * math.cos(1.0) + 0.02 * math.cos(-0.5)
    assert hm.output_map() @ x == pytest.approx(expected, abs=1e-14)


def test_discretize_printed_entries():
    sd = hm.discretize(BETA, T)
    assert sd[1, 1] == pytest.approx(0.99027, abs=1e-5)
    assert sd[1, 2] == pytest.approx(-0.13918, abs=1e-5)
    assert sd[2, 1] == pytest.approx(0.13918, abs=1e-5)
    assert sd[5, 5] == pytest.approx(0.91355, abs=1e-5)


def test_discretize_zero_period():
    np.testing.assert_array_equal(hm.discretize(BETA, 0.0), np.eye(7))


def test_discretize_equals_mat_exp():
    np.testing.assert_allclose(hm.discretize(BETA, T), mat_exp(hm.build_S(BETA), T), atol=1e-12)


def test_discretize_aliasing_guard():
    with pytest.raises(ValueError):
        hm.discretize(BETA, 1.1 * math.pi / 3 / BETA)


def test_state_from_harmonics_examples():
    np.testing.assert_array_equal(
        hm.state_from_harmonics(hm.HarmonicDecomposition(28, (0, 0, 0), (0, 0, 0), 1.0)),
        [28, 0, 0, 0, 0, 0, 0])
    x = hm.state_from_harmonics(hm.HarmonicDecomposition(0, (1, 0, 0), (math.pi / 2, 0, 0), 1.0))
    np.testing.assert_allclose(x, [0, 0, 1, 0, 0, 0, 0], atol=1e-16)


def test_harmonics_from_state_examples():
    h = hm.harmonics_from_state([28, 0, 0, 0, 0, 0, 0], BETA)
    assert h.v_a == 28 and h.magnitudes == (0, 0, 0) and h.phases == (0, 0, 0)
    h = hm.harmonics_from_state([0, 3, 4, 0, 0, 0, 0], BETA)
    assert h.magnitudes[0] == pytest.approx(5.0)
    assert h.phases[0] == pytest.approx(0.9273, abs=1e-4)


def test_decomposition_validation():
    with pytest.raises(ValueError):
        hm.HarmonicDecomposition(0, (1, 2), (0, 0), 1.0)
    with pytest.raises(ValueError):
        hm.HarmonicDecomposition(0, (-1, 0, 0), (0, 0, 0), 1.0)
    with pytest.raises(ValueError):
        hm.HarmonicDecomposition(0, (1, 0, 0), (0, 0, 0), 0.0)


def test_phase_normalized():
    h = hm.HarmonicDecomposition(0, (1, 1, 1), (3 * math.pi, -math.pi, 7.0), 1.0)
    assert all(-math.pi < p <= math.pi for p in h.phases)
    assert h.phases[0] == pytest.approx(math.pi)


mags = st.floats(0.01, 10.0)
phases = st.floats(-math.pi + 1e-6, math.pi)


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 50), mags, mags, mags, phases, phases, phases)
def test_round_trip(va, b1, b2, b3, p1, p2, p3):
    h = hm.HarmonicDecomposition(va, (b1, b2, b3), (p1, p2, p3), BETA)
    back = hm.harmonics_from_state(hm.state_from_harmonics(h), BETA)
    assert back.v_a == pytest.approx(va, abs=1e-12)
    np.testing.assert_allclose(back.magnitudes, h.magnitudes, atol=1e-12)
    d = np.angle(np.exp(1j * (np.array(back.phases) - np.array(h.phases))))
    np.testing.assert_allclose(d, 0, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=7, max_size=7))
def test_state_round_trip(x):
    x = np.array(x)
    if np.any(hm.harmonic_amplitudes(x) == 0):
        return
    back = hm.state_from_harmonics(hm.harmonics_from_state(x, BETA))
    np.testing.assert_allclose(back, x, atol=1e-12)


def test_propagate_zero_steps():
    x = np.arange(7.0)
    np.testing.assert_array_equal(hm.propagate(x, hm.discretize(BETA, T), 0), x)


def test_output_equivalence_random():
    rng = np.random.default_rng(7)
    sd = hm.discretize(BETA, T)
    g = hm.output_map()
    for _ in range(1000):
        h = hm.HarmonicDecomposition(rng.uniform(-30, 30), tuple(rng.uniform(0, 2, 3)),
                                     tuple(rng.uniform(-math.pi, math.pi, 3)), BETA)
        k = int(rng.integers(0, 2000))
        y = g @ hm.propagate(hm.state_from_harmonics(h), sd, k)
        assert y == pytest.approx(float(h.evaluate(k * T)), abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=7, max_size=7), st.integers(0, 5000))
def test_propagate_preserves_amplitudes(x, k):
    x = np.array(x)
    y = hm.propagate(x, hm.discretize(BETA, T), k)
    np.testing.assert_allclose(hm.harmonic_amplitudes(y), hm.harmonic_amplitudes(x),
                               atol=1e-9 * (1 + np.linalg.norm(x)))


def test_full_rotation_returns():
    # beta T = 2 pi / 45 exactly -> 45 steps per fundamental period
    beta = 2 * math.pi * 400
    x = np.array([1.0, 0.3, -0.2, 0.1, 0.05, 0.0, 0.02])
    y = hm.propagate(x, hm.discretize(beta, T), round(2 * math.pi / (beta * T)))
    np.testing.assert_allclose(y[1:3], x[1:3], atol=1e-6)
