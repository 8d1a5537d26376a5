"""Discrete harmonic observer for a sampled scalar signal.

The observer runs in predictor form::

    z[k+1] = S_d z[k] + L_d (y[k] - G z[k])

so the estimation error obeys ``e[k+1] = (S_d - L_d G) e[k]``.  ``L_d`` is
placed so that the error poles sit at ``rho`` times the (unit-circle)
eigenvalues of ``S_d``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import harmonic_model as hm
from .numerics import char_poly, poly_eval, pole_place_observer


class MeasurementError(ValueError):
    """A non-finite sample was offered to the observer."""


@dataclass(frozen=True)
class ObserverConfig:
    beta: float
    T: float
    rho: float
    S_d: np.ndarray = field(repr=False)
    G: np.ndarray = field(repr=False)
    L_d: np.ndarray

    @property
    def targets(self) -> np.ndarray:
        return self.rho * hm.eigenvalues(self.beta, self.T)

    def placement_residuals(self) -> np.ndarray:
        """|char_poly(S_d - L_d G)| at each target pole."""
        cp = char_poly(self.S_d - np.outer(self.L_d, self.G))
        return np.array([abs(poly_eval(cp, t)) for t in self.targets])


@dataclass
class ObserverState:
    z: np.ndarray
    samples_seen: int = 0

    @classmethod
    def from_first_sample(cls, y0: float) -> "ObserverState":
        z = np.zeros(hm.N_STATES)
        z[0] = y0
        return cls(z, 0)

    def output(self) -> float:
        return float(hm.output_map() @ self.z)


def design(beta: float, T: float, rho: float) -> ObserverConfig:
    if not 0.0 < rho < 1.0:
        raise ValueError("rho must be in (0,1)")
    if not (T > 0 and math.isfinite(T)):
        raise ValueError("T must be positive")
    if not 3 * beta * T < math.pi:
        raise ValueError(f"aliasing: 3*beta*T = {3 * beta * T:.4g} must be < pi")
    sd = hm.discretize(beta, T)
    g = hm.output_map()
    targets = rho * hm.eigenvalues(beta, T)
    l_d = pole_place_observer(sd, g, targets)
    return ObserverConfig(beta=beta, T=T, rho=rho, S_d=sd, G=g, L_d=l_d)


def retune(cfg: ObserverConfig, new_beta: float) -> ObserverConfig:
    """Full redesign at ``new_beta``; any ObserverState is reused as is."""
    return design(new_beta, cfg.T, cfg.rho)


def _check(y: float) -> float:
    y = float(y)
    if not math.isfinite(y):
        raise MeasurementError(f"non-finite measurement {y!r}")
    return y


def step(cfg: ObserverConfig, st: ObserverState, y: float) -> ObserverState:
    y = _check(y)
    innovation = y - cfg.G @ st.z
    z = cfg.S_d @ st.z + cfg.L_d * innovation
    return ObserverState(z, st.samples_seen + 1)


def step_decomposed(cfg: ObserverConfig, st: ObserverState, y: float) -> ObserverState:
    """Same update as :func:`step` using the 1 + 2 + 2 + 2 block structure.

    Multiplies per update: 3 blocks x 4 rotation terms + 7 gain terms = 19.
    """
    y = _check(y)
    z = st.z
    sd = cfg.S_d
    l = cfg.L_d
    innovation = y - (z[0] + z[1] + z[3] + z[5])
    out = np.empty(7)
    out[0] = z[0] + l[0] * innovation
    for i in (1, 3, 5):
        a, b = z[i], z[i + 1]
        out[i] = sd[i, i] * a + sd[i, i + 1] * b + l[i] * innovation
        out[i + 1] = sd[i + 1, i] * a + sd[i + 1, i + 1] * b + l[i + 1] * innovation
    return ObserverState(out, st.samples_seen + 1)


def beta_from_speed(rpm: float, pole_pairs: int, pulses_per_electrical_cycle: int = 6) -> float:
    """Ripple angular frequency for a six-step drive turning at ``rpm``."""
    if not rpm > 0:
        raise ValueError("rpm must be positive")
    if pole_pairs < 1 or pulses_per_electrical_cycle < 1:
        raise ValueError("pole_pairs and pulses_per_electrical_cycle must be >= 1")
    return 2.0 * math.pi * (rpm / 60.0) * pole_pairs * pulses_per_electrical_cycle


class HarmonicObserver:
    """Stateful observer used inside the simulation loop.

    Keeps the state as plain floats (the per-sample update is the hot path),
    initializes from the first sample and accepts retune requests at most
    once per ``retune_interval`` seconds of sample time.
    """

    def __init__(self, beta: float, T: float, rho: float, retune_interval: float = 0.01,
                 retune_tolerance: float = 2e-3):
        self.retune_interval = retune_interval
        self.retune_tolerance = retune_tolerance
        self._last_retune = -math.inf
        self._z: list[float] | None = None
        self.samples_seen = 0
        self._load(design(beta, T, rho))

    def _load(self, cfg: ObserverConfig) -> None:
        self.cfg = cfg
        sd = cfg.S_d
        self._rot = [(sd[i, i], sd[i, i + 1], sd[i + 1, i], sd[i + 1, i + 1]) for i in (1, 3, 5)]
        self._gain = [float(v) for v in cfg.L_d]

    @property
    def z(self) -> np.ndarray:
        return np.array(self._z) if self._z is not None else np.zeros(hm.N_STATES)

    @property
    def state(self) -> ObserverState | None:
        if self._z is None:
            return None
        return ObserverState(np.array(self._z), self.samples_seen)

    def update(self, y: float) -> list[float]:
        y = _check(y)
        z = self._z
        if z is None:
            z = [y, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        l = self._gain
        e = y - (z[0] + z[1] + z[3] + z[5])
        out = [z[0] + l[0] * e, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        for j, i in enumerate((1, 3, 5)):
            a, b, c, d = self._rot[j]
            out[i] = a * z[i] + b * z[i + 1] + l[i] * e
            out[i + 1] = c * z[i] + d * z[i + 1] + l[i + 1] * e
        self._z = out
        self.samples_seen += 1
        return out

    def request_beta(self, beta: float, t: float) -> bool:
        """Retune if ``beta`` moved by more than the tolerance and the cadence allows."""
        if t - self._last_retune < self.retune_interval - 1e-12:
            return False
        self._last_retune = t
        if abs(beta - self.cfg.beta) <= self.retune_tolerance * self.cfg.beta:
            return False
        self._load(retune(self.cfg, beta))
        return True
