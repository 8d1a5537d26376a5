"""Seven-state autonomous model of a dc level plus three harmonics.

State layout: ``x[0]`` is the dc level, ``(x[1], x[2])``, ``(x[3], x[4])``
and ``(x[5], x[6])`` are the cosine/sine pairs of harmonics 1, 2 and 3 of
the fundamental angular frequency ``beta``.  The measured signal is
``G @ x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

N_HARMONICS = 3
N_STATES = 1 + 2 * N_HARMONICS

_G = np.array([1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0])


@dataclass(frozen=True)
class HarmonicDecomposition:
    """``v(t) = v_a + sum_n b_n cos(n beta t + phi_n)`` for n = 1..3."""

    v_a: float
    magnitudes: tuple[float, float, float]
    phases: tuple[float, float, float]
    beta: float

    def __post_init__(self):
        if len(self.magnitudes) != N_HARMONICS or len(self.phases) != N_HARMONICS:
            raise ValueError("exactly three harmonics are required")
        if any(b < 0 for b in self.magnitudes):
            raise ValueError("harmonic magnitudes must be >= 0")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        object.__setattr__(self, "magnitudes", tuple(float(b) for b in self.magnitudes))
        object.__setattr__(self, "phases", tuple(_wrap(p) for p in self.phases))

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, self.v_a)
        for n, (b, phi) in enumerate(zip(self.magnitudes, self.phases), start=1):
            out = out + b * np.cos(n * self.beta * t + phi)
        return out


def _wrap(phi: float) -> float:
    """Map an angle to (-pi, pi]."""
    w = math.atan2(math.sin(phi), math.cos(phi))
    return math.pi if w == -math.pi else w


def _check_beta(beta: float) -> None:
    if not (math.isfinite(beta) and beta > 0):
        raise ValueError(f"beta must be positive, got {beta}")


def build_S(beta: float) -> np.ndarray:
    """Continuous-time generator: zero first row, ``[[0, -n b], [n b, 0]]`` blocks."""
    _check_beta(beta)
    s = np.zeros((N_STATES, N_STATES))
    for n in range(1, N_HARMONICS + 1):
        i = 2 * n - 1
        s[i, i + 1] = -n * beta
        s[i + 1, i] = n * beta
    return s


def output_map() -> np.ndarray:
    return _G.copy()


def discretize(beta: float, T: float) -> np.ndarray:
    """Closed-form ``exp(build_S(beta) * T)``.

    Each block is ``[[cos nbT, -sin nbT], [sin nbT, cos nbT]]``.  Requires
    ``0 <= beta*T < pi/3`` so that the third harmonic stays below Nyquist.
    """
    _check_beta(beta)
    if T < 0 or not beta * T < math.pi / 3:
        raise ValueError(f"beta*T = {beta * T:.4g} violates 0 <= beta*T < pi/3 (aliasing)")
    sd = np.eye(N_STATES)
    for n in range(1, N_HARMONICS + 1):
        i = 2 * n - 1
        c, s = math.cos(n * beta * T), math.sin(n * beta * T)
        sd[i, i], sd[i, i + 1] = c, -s
        sd[i + 1, i], sd[i + 1, i + 1] = s, c
    return sd


def eigenvalues(beta: float, T: float) -> np.ndarray:
    """Analytic spectrum of ``discretize(beta, T)``: 1 and ``exp(+-i n beta T)``."""
    ev = [1.0 + 0j]
    for n in range(1, N_HARMONICS + 1):
        w = n * beta * T
        ev += [complex(math.cos(w), math.sin(w)), complex(math.cos(w), -math.sin(w))]
    return np.array(ev)


def state_from_harmonics(h: HarmonicDecomposition) -> np.ndarray:
    x = np.empty(N_STATES)
    x[0] = h.v_a
    for n, (b, phi) in enumerate(zip(h.magnitudes, h.phases), start=1):
        x[2 * n - 1] = b * math.cos(phi)
        x[2 * n] = b * math.sin(phi)
    return x


def harmonics_from_state(x, beta: float) -> HarmonicDecomposition:
    x = np.asarray(x, dtype=float)
    if x.shape != (N_STATES,):
        raise ValueError(f"state must have {N_STATES} entries")
    mags, phases = [], []
    for n in range(1, N_HARMONICS + 1):
        c, s = x[2 * n - 1], x[2 * n]
        b = math.hypot(c, s)
        mags.append(b)
        phases.append(math.atan2(s, c) if b > 0 else 0.0)
    return HarmonicDecomposition(float(x[0]), tuple(mags), tuple(phases), beta)


def harmonic_amplitudes(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.hypot(x[1::2], x[2::2])


def propagate(x, sd, k: int) -> np.ndarray:
    """Apply ``sd`` to ``x`` ``k`` times."""
    if k < 0:
        raise ValueError("k must be >= 0")
    out = np.asarray(x, dtype=float).copy()
    p = np.linalg.matrix_power(np.asarray(sd, dtype=float), k)
    return p @ out
