"""Duty-cycle law: PI plus inductor-current damping plus harmonic state feedback.

::

    D = D0 + k1 (i_L - i_L0) + k2 (v_dc - v_ref) + k3 * integral(v_dc - v_ref)
           + Kv . zv[1:7]  (t >= enable_time_v)
           + Ki . zi[1:7]  (t >= enable_time_i)

saturated to ``[duty_min, duty_max]``.  The integral is accumulated by
forward Euler and the sample's increment is discarded whenever the output
saturates.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Reference harmonic feedback gains on z2..z7.
REFERENCE_KV = (-0.3, 0.2, -0.1, 0.2, -0.03, 0.14)
ZERO_K = (0.0,) * 6


@dataclass(frozen=True)
class ControllerConfig:
    D0: float = 1.0 - 13.9 / 24.0
    i_L0: float = 0.9
    v_ref: float = 24.0
    k1: float = -0.08
    k2: float = -0.06
    # Negative like k1, k2: more duty raises v_dc, so all error gains share a sign.
    k3: float = -1.0
    T: float = 1.0 / 18000.0
    duty_min: float = 0.0
    duty_max: float = 0.8
    Kv: tuple[float, ...] = REFERENCE_KV
    Ki: tuple[float, ...] = ZERO_K
    enable_time_v: float = 0.1
    enable_time_i: float = 0.2

    def __post_init__(self):
        if not 0.0 <= self.duty_min < self.duty_max <= 1.0:
            raise ValueError("need 0 <= duty_min < duty_max <= 1")
        if self.enable_time_v < 0 or self.enable_time_i < 0:
            raise ValueError("enable times must be >= 0")
        if not self.T > 0:
            raise ValueError("T must be positive")
        for name in ("Kv", "Ki"):
            k = tuple(float(v) for v in getattr(self, name))
            if len(k) != 6:
                raise ValueError(f"{name} needs 6 gains (z2..z7)")
            object.__setattr__(self, name, k)

    @property
    def integral_limit(self) -> float:
        if self.k3 == 0:
            return math.inf
        return (self.duty_max - self.duty_min) / abs(self.k3)


@dataclass
class ControllerState:
    integral: float = 0.0
    t: float = 0.0


def harmonic_term(K, z) -> float:
    """``K . (z2, ..., z7)``; the dc estimate z1 is never fed back."""
    return (K[0] * z[1] + K[1] * z[2] + K[2] * z[3] + K[3] * z[4]
            + K[4] * z[5] + K[5] * z[6])


def _integrate(cfg: ControllerConfig, integral: float, v_dc: float) -> float:
    lim = cfg.integral_limit
    return min(lim, max(-lim, integral + (v_dc - cfg.v_ref) * cfg.T))


def base_duty(cfg: ControllerConfig, st: ControllerState, i_L: float, v_dc: float) -> float:
    """PI law before saturation; updates ``st.integral`` in place."""
    st.integral = _integrate(cfg, st.integral, v_dc)
    return (cfg.D0 + cfg.k1 * (i_L - cfg.i_L0) + cfg.k2 * (v_dc - cfg.v_ref)
            + cfg.k3 * st.integral)


def compute_duty(cfg: ControllerConfig, st: ControllerState, i_L: float, v_dc: float,
                 zv, zi, t: float) -> float:
    if t < st.t:
        raise ValueError("time must be nondecreasing")
    st.t = t
    previous = st.integral
    d = base_duty(cfg, st, i_L, v_dc)
    if t >= cfg.enable_time_v:
        d += harmonic_term(cfg.Kv, zv)
    if t >= cfg.enable_time_i:
        d += harmonic_term(cfg.Ki, zi)
    if d > cfg.duty_max or d < cfg.duty_min or not math.isfinite(d):
        st.integral = previous
        return cfg.duty_max if not d < cfg.duty_max else cfg.duty_min
    return d
