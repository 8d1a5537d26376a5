import math

import numpy as np
import pytest

from boostripple import harmonic_model as hm
from boostripple.observer import (HarmonicObserver, MeasurementError, ObserverState, beta_from_speed,
                                  design, retune, step, step_decomposed)

BETA = 2 * math.pi * 400
T = 1 / 18000
AMPS = (0.2, 0.05, 0.02)
PHASES = (0.0, 1.0, -0.5)


def synth(beta, k, dc=24.0, amps=AMPS, phases=PHASES):
    t = np.asarray(k) * T
    return dc + sum(b * np.cos(n * beta * t + p) for n, (b, p) in enumerate(zip(amps, phases), 1))


def run_observer(cfg, ys, st=None, stepper=step_decomposed):
    st = st or ObserverState.from_first_sample(ys[0])
    for y in ys:
        st = stepper(cfg, st, y)
    return st


def test_design_matches_printed_gain():
    cfg = design(BETA, T, 0.99)
    np.testing.assert_allclose(cfg.L_d, [0.0098, 0.0195, 0.0019, 0.0192, 0.0037, 0.0189, 0.0047],
                               atol=2e-3)


def test_design_near_unit_rho_gives_small_gain():
    assert np.linalg.norm(design(BETA, T, 0.999999).L_d) < 1e-5


def test_design_residuals_at_100_hz():
    assert design(2 * math.pi * 100, T, 0.99).placement_residuals().max() <= 1e-6


@pytest.mark.parametrize("rho", [0.0, 1.0, 1.5, -0.2])
def test_design_rejects_rho(rho):
    with pytest.raises(ValueError, match="rho"):
        design(BETA, T, rho)


def test_design_rejects_aliasing():
    with pytest.raises(ValueError):
        design(2 * math.pi * 3500, T, 0.99)


def test_step_zero_innovation():
    cfg = design(BETA, T, 0.99)
    z = np.random.default_rng(1).normal(size=7)
    out = step(cfg, ObserverState(z, 3), float(cfg.G @ z))
    np.testing.assert_allclose(out.z, cfg.S_d @ z, rtol=0, atol=1e-15)
    assert out.samples_seen == 4


def test_constant_input_is_fixed_point():
    cfg = design(BETA, T, 0.99)
    st = ObserverState.from_first_sample(24.0)
    for _ in range(100):
        st = step(cfg, st, 24.0)
    np.testing.assert_array_equal(st.z, [24.0, 0, 0, 0, 0, 0, 0])


def test_non_finite_measurement_rejected():
    cfg = design(BETA, T, 0.99)
    st = ObserverState.from_first_sample(1.0)
    for fn in (step, step_decomposed):
        with pytest.raises(MeasurementError):
            fn(cfg, st, float("nan"))
    assert st.samples_seen == 0


def test_synthetic_convergence():
    cfg = design(BETA, T, 0.99)
    n = int(0.5 / T)
    ys = synth(BETA, np.arange(n))
    st = run_observer(cfg, ys)
    # after consuming y[0..n-1] the state estimates x[n]
    y_next = synth(BETA, n)
    assert abs(cfg.G @ st.z - y_next) < 1e-3 * sum(AMPS)
    h = hm.harmonics_from_state(st.z, BETA)
    for j, (b, p) in enumerate(zip(AMPS, PHASES)):
        n_ = j + 1
        assert h.magnitudes[j] == pytest.approx(b, rel=0.01)
        expected = p + n_ * BETA * n * T
        assert abs(math.remainder(h.phases[j] - expected, 2 * math.pi)) < 0.01


def test_step_decomposed_equals_step():
    cfg = design(BETA, T, 0.99)
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(10_000):
        st = ObserverState(rng.normal(scale=10, size=7), 0)
        y = float(rng.normal(scale=30))
        worst = max(worst, np.abs(step(cfg, st, y).z - step_decomposed(cfg, st, y).z).max())
    assert worst <= 1e-12


def test_stateful_observer_matches_step():
    cfg = design(BETA, T, 0.99)
    ys = synth(BETA, np.arange(500)) + np.random.default_rng(0).normal(scale=0.01, size=500)
    obs = HarmonicObserver(BETA, T, 0.99)
    for y in ys:
        obs.update(y)
    ref = run_observer(cfg, ys, stepper=step)
    np.testing.assert_allclose(obs.z, ref.z, atol=1e-12)
    assert obs.samples_seen == 500


def test_beta_from_speed():
    assert beta_from_speed(1000, 4, 6) == pytest.approx(2 * math.pi * 400)
    assert beta_from_speed(60, 1, 1) == pytest.approx(2 * math.pi)
    assert beta_from_speed(500, 4) == pytest.approx(1256.6, abs=0.05)
    with pytest.raises(ValueError):
        beta_from_speed(0, 4)
    with pytest.raises(ValueError):
        beta_from_speed(100, 0)


def test_retune_same_beta_is_identity():
    cfg = design(BETA, T, 0.99)
    new = retune(cfg, BETA)
    np.testing.assert_allclose(new.S_d, cfg.S_d, atol=1e-12)
    np.testing.assert_allclose(new.L_d, cfg.L_d, atol=1e-12)


def test_retune_keeps_state():
    obs = HarmonicObserver(BETA, T, 0.99)
    for y in synth(BETA, np.arange(50)):
        obs.update(y)
    before = obs.state
    assert obs.request_beta(BETA / 2, 1.0)
    after = obs.state
    np.testing.assert_array_equal(before.z, after.z)
    assert before.samples_seen == after.samples_seen
    assert obs.cfg.beta == BETA / 2


def test_retune_cadence():
    obs = HarmonicObserver(BETA, T, 0.99, retune_interval=0.01)
    assert obs.request_beta(BETA * 1.1, 0.0)
    assert not obs.request_beta(BETA * 1.2, 0.005)
    assert obs.request_beta(BETA * 1.2, 0.0101)


def test_reconverges_after_frequency_step():
    k1 = int(0.3 / T)
    k2 = int(0.5 / T)
    obs = HarmonicObserver(BETA, T, 0.99)
    for k in range(k1):
        obs.update(synth(BETA, k))
    obs.request_beta(BETA / 2, k1 * T)
    # 200 Hz signal from here on (phase-continuous in sample index is not required)
    for k in range(k1, k1 + k2):
        obs.update(synth(BETA / 2, k))
    err = abs(obs.cfg.G @ obs.z - synth(BETA / 2, k1 + k2))
    assert err < 0.01 * sum(AMPS)


def test_error_contraction():
    rho = 0.99
    cfg = design(BETA, T, rho)
    m = math.ceil(math.log(0.1) / math.log(rho))
    x = hm.state_from_harmonics(hm.HarmonicDecomposition(24, AMPS, PHASES, BETA))
    z = np.zeros(7)
    z[0] = 20.0
    e0 = np.linalg.norm(z - x)
    st = ObserverState(z, 0)
    # ||e[k]|| <= C rho^k: C fixed from the first block must hold for all later samples
    scaled = []
    ends = [e0]
    for block in range(10):
        for i in range(m):
            st = step(cfg, st, float(cfg.G @ x))
            x = cfg.S_d @ x
            k = block * m + i + 1
            scaled.append(np.linalg.norm(st.z - x) / rho ** k)
        ends.append(np.linalg.norm(st.z - x))
    c = 1.01 * max(scaled[:m])
    assert max(scaled) <= c
    # 10x per m samples on average once past the first block
    shrink = (ends[-1] / ends[1]) ** (1 / (len(ends) - 2))
    assert shrink <= 0.1


def test_switching_alternation_rejected():
    cfg = design(BETA, T, 0.99)
    n = int(0.5 / T)
    k = np.arange(n)
    clean = synth(BETA, k)
    alt = 0.05 * (-1.0) ** k
    st = ObserverState.from_first_sample(clean[0])
    recon = np.empty(n)
    for i in range(n):
        recon[i] = cfg.G @ st.z
        st = step(cfg, st, clean[i] + alt[i])
    tail = slice(n // 2, n)
    sign = (-1.0) ** k[tail]
    in_amp = abs(np.mean(alt[tail] * sign))
    out_amp = abs(np.mean((recon[tail] - clean[tail]) * sign))
    assert 20 * math.log10(out_amp / in_amp) <= -20
